"""Closed-form precoding map, equivariance checks, losses and dataset export.

The alternating solver's whole output is determined by per-user auxiliary
variables: a combined receiver row a_bar_k = u_k a_k and a combined weight
u_bar_k = u_k ||a_k||^2.  ``cfp`` rebuilds the precoder from those labels and
the statistical-CSI tensors alone, in one linear solve per user.  The mapping
from CSI to labels is equivariant under user permutations, equivariant under
satellite permutations for the per-satellite receiver entries, and invariant
for the per-user weights; ``check_equivariance`` verifies this on concrete
instances.  The loss helpers are scale-invariant, matching the per-user
scaling freedom of the labels, and ``export_dataset`` writes solver-labelled
samples in a little-endian, self-describing binary format for external
trainers.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, LinkStat, ScenarioScsi
from .rates import rate_ap1
from .solvers import (AuxVars, ConvergenceTrace, PrecoderSolution, SolverConfig,
                      _ScenarioArrays, _solve_ridge, project_per_satellite,
                      solve_ms_jocdwm)

DATASET_MAGIC = b"SMDSET01"


@dataclass
class MappingInputs:
    """Real-valued CSI tensors: d_tensor[k, s] = [gamma, kappa, theta_x,
    theta_y, mean_phase], f_matrix[k] = [noise power, rate weight],
    p_vector[s] = satellite power budget."""
    d_tensor: np.ndarray          # (K, S, 5)
    f_matrix: np.ndarray          # (K, 2)
    p_vector: np.ndarray          # (S,)

    def __post_init__(self):
        self.d_tensor = np.asarray(self.d_tensor, dtype=float)
        self.f_matrix = np.asarray(self.f_matrix, dtype=float)
        self.p_vector = np.asarray(self.p_vector, dtype=float)
        if self.d_tensor.ndim != 3 or self.d_tensor.shape[2] != 5:
            raise ValueError("d_tensor must be (K, S, 5)")
        if self.f_matrix.shape != (self.d_tensor.shape[0], 2):
            raise ValueError("f_matrix must be (K, 2)")
        if self.p_vector.shape != (self.d_tensor.shape[1],):
            raise ValueError("p_vector must be (S,)")

    @classmethod
    def from_scenario(cls, scsi: ScenarioScsi) -> "MappingInputs":
        mp = scsi.stat_grid("mean_phase")
        if np.any(np.abs(np.imag(mp)) > 1e-12):
            raise ValueError("mean phase factors must be real for the CSI tensor")
        d = np.stack([scsi.stat_grid("gamma"), scsi.stat_grid("kappa"),
                      scsi.stat_grid("theta_x"), scsi.stat_grid("theta_y"),
                      np.real(mp)], axis=2)
        f = np.stack([scsi.noise_power, scsi.weights], axis=1)
        return cls(d_tensor=d, f_matrix=f, p_vector=scsi.power_budget.copy())

    def to_scenario(self, array: ArrayGeometry) -> ScenarioScsi:
        K, S, _ = self.d_tensor.shape
        stats = [[LinkStat(gamma=float(self.d_tensor[k, s, 0]),
                           kappa=float(self.d_tensor[k, s, 1]),
                           theta_x=float(self.d_tensor[k, s, 2]),
                           theta_y=float(self.d_tensor[k, s, 3]),
                           mean_phase=complex(self.d_tensor[k, s, 4]))
                  for s in range(S)] for k in range(K)]
        return ScenarioScsi(stats=stats, noise_power=self.f_matrix[:, 0].copy(),
                            weights=self.f_matrix[:, 1].copy(),
                            power_budget=self.p_vector.copy(), array=array)

    def permute(self, user_perm: np.ndarray | None = None,
                sat_perm: np.ndarray | None = None) -> "MappingInputs":
        d, f, p = self.d_tensor, self.f_matrix, self.p_vector
        if user_perm is not None:
            d, f = d[user_perm], f[user_perm]
        if sat_perm is not None:
            d, p = d[:, sat_perm], p[sat_perm]
        return MappingInputs(d_tensor=d.copy(), f_matrix=f.copy(), p_vector=p.copy())


@dataclass
class MappingLabels:
    """Solver labels: rows a_bar[k] = u_k a_k (length S+1, entry 0 is the
    satellite-invariant component) and weights u_bar[k] = u_k ||a_k||^2."""
    a_bar: np.ndarray             # (K, S+1) complex
    u_bar: np.ndarray             # (K,) positive

    def __post_init__(self):
        self.a_bar = np.asarray(self.a_bar, dtype=complex)
        self.u_bar = np.asarray(self.u_bar, dtype=float)
        if self.a_bar.ndim != 2 or self.u_bar.shape != (self.a_bar.shape[0],):
            raise ValueError("label shapes disagree")
        if not np.all(np.isfinite(self.u_bar)) or np.any(self.u_bar <= 0):
            raise ValueError("u_bar must be finite and positive")

    @classmethod
    def from_aux(cls, aux: AuxVars) -> "MappingLabels":
        a = aux.a                                  # (S+1, K)
        u = aux.u
        aa = np.real(np.einsum("sk,sk->k", a.conj(), a))
        return cls(a_bar=(u[None, :] * a).T, u_bar=u * aa)


def cfp(labels: MappingLabels, inputs: MappingInputs, array: ArrayGeometry,
        solver_cfg: SolverConfig | None = None
        ) -> tuple[PrecoderSolution, ConvergenceTrace]:
    """Closed-form precoding from labels: one ridge solve per user, per-user
    power normalization, then the per-satellite projection.

    The per-user power rule is the equal split P_k = sum_s P_s / K.
    """
    cfg = solver_cfg or SolverConfig()
    scsi = inputs.to_scenario(array)
    arr = _ScenarioArrays(scsi)
    K, S, dim = arr.K, arr.S, arr.dim
    if labels.a_bar.shape != (K, S + 1):
        raise ValueError("a_bar must be (K, S+1)")
    if not np.all(np.isfinite(labels.a_bar)):
        raise ValueError("labels must be finite")
    p_k = float(np.sum(arr.p_sat)) / K
    beta, sigma2 = arr.beta, arr.sigma2
    trace = ConvergenceTrace(method="CFP", iterations=1)

    c = beta * labels.u_bar
    t_blocks = np.empty((S, arr.n_t, arr.n_t), dtype=complex)
    for s in range(S):
        rows = arr.coef_qt[:, s, None] * arr.V[:, s, :]
        t_blocks[s] = (rows.conj().T * c) @ rows

    w = np.zeros((K, dim), dtype=complex)
    eta = np.zeros(K)
    inactive = np.zeros(K, dtype=bool)
    for k in range(K):
        rhs = beta[k] * arr.factors[k].apply_q_adjoint(labels.a_bar[k])
        if not np.any(rhs):
            inactive[k] = True
            continue
        xi = np.zeros((dim, dim), dtype=complex)
        for s in range(S):
            sl = slice(s * arr.n_t, (s + 1) * arr.n_t)
            xi[sl, sl] = t_blocks[s]
            row = arr.rho[k, s] * arr.V[k, s]
            xi[sl, sl] -= c[k] * np.outer(np.conj(row), row)
        xi += c[k] * np.outer(np.conj(arr.mean_rows[k]), arr.mean_rows[k])
        mu = c[k] * sigma2[k] / p_k
        w_bar = _solve_ridge(xi, mu, rhs, cfg.ridge_floor)
        trace.n_linear_solves += 1
        eta[k] = math.sqrt(p_k / float(np.real(w_bar.conj() @ w_bar)))
        w[k] = eta[k] * w_bar

    w_proj, scales = project_per_satellite(w, arr.p_sat, arr.n_t)
    sol = PrecoderSolution(w=w_proj, eta=eta, per_user_power=np.full(K, p_k),
                           n_t=arr.n_t, method="CFP", inactive_users=inactive,
                           sat_scales=scales)
    return sol, trace


def permute_labels(labels: MappingLabels, user_perm: np.ndarray | None = None,
                   sat_perm: np.ndarray | None = None) -> MappingLabels:
    """Apply permutations the way an equivariant mapping must: users permute
    both labels; satellites permute only the per-satellite receiver entries."""
    a, u = labels.a_bar, labels.u_bar
    if user_perm is not None:
        a, u = a[user_perm], u[user_perm]
    if sat_perm is not None:
        a = np.concatenate([a[:, :1], a[:, 1:][:, sat_perm]], axis=1)
    return MappingLabels(a_bar=a.copy(), u_bar=u.copy())


def permute_precoder(w: np.ndarray, n_t: int, user_perm: np.ndarray | None = None,
                     sat_perm: np.ndarray | None = None) -> np.ndarray:
    """Permute precoder rows (users) and satellite blocks."""
    K = w.shape[0]
    blocks = w.reshape(K, -1, n_t)
    if user_perm is not None:
        blocks = blocks[user_perm]
    if sat_perm is not None:
        blocks = blocks[:, sat_perm]
    return blocks.reshape(K, -1)


def check_equivariance(inputs: MappingInputs, array: ArrayGeometry,
                       permutations: list[tuple[np.ndarray, np.ndarray]],
                       mode: str = "solver",
                       solver_cfg: SolverConfig | None = None) -> dict:
    """Verify permutation equivariance of the solver or the closed-form map.

    For each (user_perm, sat_perm) pair the scenario is permuted and re-run;
    the report records the worst deviations between the permuted baseline
    outputs and the outputs of the permuted run (precoder arrangement, label
    transformation, weighted sum-rate invariance).
    """
    if mode not in ("solver", "cfp"):
        raise ValueError("mode must be 'solver' or 'cfp'")
    cfg = solver_cfg or SolverConfig()
    base_scsi = inputs.to_scenario(array)
    base_sol, base_trace = solve_ms_jocdwm(base_scsi, cfg)
    base_labels = MappingLabels.from_aux(base_trace.final_aux)
    base_rate = rate_ap1(base_sol.w, base_scsi).sum_rate

    worst_w = 0.0
    worst_rate = 0.0
    worst_labels = 0.0
    for user_perm, sat_perm in permutations:
        perm_inputs = inputs.permute(user_perm, sat_perm)
        perm_scsi = perm_inputs.to_scenario(array)
        if mode == "solver":
            sol, trace = solve_ms_jocdwm(perm_scsi, cfg)
            labels = MappingLabels.from_aux(trace.final_aux)
            expected_labels = permute_labels(base_labels, user_perm, sat_perm)
            dev_l = max(
                float(np.max(np.abs(labels.a_bar - expected_labels.a_bar))),
                float(np.max(np.abs(labels.u_bar - expected_labels.u_bar))))
            worst_labels = max(worst_labels, dev_l)
        else:
            perm_label_in = permute_labels(base_labels, user_perm, sat_perm)
            sol, _ = cfp(perm_label_in, perm_inputs, array, cfg)
        expected_w = permute_precoder(base_sol.w, array.n_t, user_perm, sat_perm)
        scale = max(float(np.max(np.abs(expected_w))), 1e-300)
        worst_w = max(worst_w, float(np.max(np.abs(sol.w - expected_w))) / scale)
        rate = rate_ap1(sol.w, perm_scsi).sum_rate
        worst_rate = max(worst_rate, abs(rate - base_rate) / max(base_rate, 1e-300))
    return {"mode": mode, "n_permutations": len(permutations),
            "max_precoder_deviation": worst_w,
            "max_rate_deviation": worst_rate,
            "max_label_deviation": worst_labels,
            "baseline_sum_rate": base_rate}


def si_nmse(x_hat: np.ndarray, x: np.ndarray, convention: str = "least_squares",
            eps: float = 1e-8) -> float:
    """Scale-invariant normalized squared error ||X - xi X_hat||^2 / (||X||^2 + eps).

    convention "least_squares": xi = <X_hat, X> / <X_hat, X_hat>, the actual
    minimizer, exactly zero whenever X_hat is a nonzero complex multiple of X.
    convention "target_normalized": xi = <X_hat, X> / <X, X> (an alternative
    normalization by the target energy; not the least-squares minimizer).
    """
    x_hat = np.asarray(x_hat, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if x_hat.shape != x.shape:
        raise ValueError("shapes must match")
    inner = complex(np.vdot(x_hat, x))           # <X_hat, X> = sum conj(X_hat) X
    target = float(np.real(np.vdot(x, x)))
    if convention == "least_squares":
        denom = float(np.real(np.vdot(x_hat, x_hat)))
        xi = inner / denom if denom > 0 else 0.0
    elif convention == "target_normalized":
        xi = inner / target if target > 0 else 0.0
    else:
        raise ValueError("unknown convention")
    resid = x - xi * x_hat
    return float(np.real(np.vdot(resid, resid)) / (target + eps))


def vcossim(x_hat: np.ndarray, x: np.ndarray) -> float:
    """|vec(X_hat)^H vec(X)| / (||X_hat|| ||X||); rejects zero-norm inputs."""
    x_hat = np.asarray(x_hat, dtype=complex)
    x = np.asarray(x, dtype=complex)
    n1 = float(np.linalg.norm(x_hat))
    n2 = float(np.linalg.norm(x))
    if n1 == 0.0 or n2 == 0.0:
        raise ValueError("zero-norm input")
    return float(abs(np.vdot(x_hat, x)) / (n1 * n2))


def combined_label_loss(pred: MappingLabels, target: MappingLabels,
                        c: float = 0.5, convention: str = "least_squares") -> float:
    """c * mean-over-users si_nmse(a_bar rows) + (1 - c) * si_nmse(u_bar)."""
    K = target.a_bar.shape[0]
    a_term = sum(si_nmse(pred.a_bar[k], target.a_bar[k], convention)
                 for k in range(K)) / K
    u_term = si_nmse(pred.u_bar.astype(complex), target.u_bar.astype(complex),
                     convention)
    return c * a_term + (1.0 - c) * u_term


def export_dataset(scenario_factory, n_samples: int, rng_seed: int, path: str,
                   power_grid_dbm: tuple = (20, 25, 30, 35, 40, 45, 50),
                   solver_cfg: SolverConfig | None = None,
                   config_info: dict | None = None) -> dict:
    """Generate solver-labelled samples and write them to a binary file.

    Each sample draws a transmit power from the grid, builds a scenario via
    ``scenario_factory(sample_seed, p_tx_w)``, runs the joint covariance
    solver, and stores the CSI tensors, the labels (a_bar, u_bar) and the
    achieved weighted sum rate.  A JSON manifest with the seed, dimensions
    and a config digest is written next to the file.

    File layout (all little-endian): 8-byte magic, four uint32 (K, S, N_T,
    n_samples), then per sample float64 blocks: d (K*S*5), f (K*2), p (S),
    a_bar (K*(S+1)*2, interleaved real/imag), u_bar (K), r_ap1 (1).

    Returns the manifest dictionary.
    """
    cfg = solver_cfg or SolverConfig()
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    seeds = np.random.SeedSequence(rng_seed).spawn(n_samples)
    dims = None
    records = []
    for i, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        p_dbm = float(power_grid_dbm[int(rng.integers(0, len(power_grid_dbm)))])
        p_w = 10.0 ** ((p_dbm - 30.0) / 10.0)
        try:
            scsi = scenario_factory(int(rng.integers(0, 2**63 - 1)), p_w)
            sol, trace = solve_ms_jocdwm(scsi, cfg)
            labels = MappingLabels.from_aux(trace.final_aux)
            inputs = MappingInputs.from_scenario(scsi)
            achieved = rate_ap1(sol.w, scsi).sum_rate
        except (ValueError, FloatingPointError) as exc:
            raise RuntimeError(f"sample {i} failed: {exc}") from exc
        k, s = inputs.d_tensor.shape[:2]
        if dims is None:
            dims = (k, s, scsi.array.n_t)
        elif dims != (k, s, scsi.array.n_t):
            raise RuntimeError(f"sample {i} changed dimensions")
        records.append((inputs, labels, achieved, p_dbm))

    k, s, n_t = dims
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<4I", k, s, n_t, n_samples))
        for inputs, labels, achieved, _ in records:
            inputs.d_tensor.astype("<f8").tofile(fh)
            inputs.f_matrix.astype("<f8").tofile(fh)
            inputs.p_vector.astype("<f8").tofile(fh)
            ab = np.empty((k, s + 1, 2))
            ab[..., 0] = labels.a_bar.real
            ab[..., 1] = labels.a_bar.imag
            ab.astype("<f8").tofile(fh)
            labels.u_bar.astype("<f8").tofile(fh)
            np.array([achieved], dtype="<f8").tofile(fh)

    digest_src = json.dumps(config_info or {}, sort_keys=True).encode()
    manifest = {
        "format": DATASET_MAGIC.decode(),
        "n_samples": n_samples,
        "seed": rng_seed,
        "num_users": k,
        "num_satellites": s,
        "num_antennas": n_t,
        "power_grid_dbm": list(power_grid_dbm),
        "config_digest": hashlib.sha256(digest_src).hexdigest(),
        "si_nmse_convention": "least_squares",
    }
    with open(path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def read_dataset(path: str) -> tuple[dict, list[dict]]:
    """Read a dataset file back into (header, records)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != DATASET_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        k, s, n_t, n_samples = struct.unpack("<4I", fh.read(16))
        records = []
        for _ in range(n_samples):
            d = np.fromfile(fh, dtype="<f8", count=k * s * 5).reshape(k, s, 5)
            f = np.fromfile(fh, dtype="<f8", count=k * 2).reshape(k, 2)
            p = np.fromfile(fh, dtype="<f8", count=s)
            ab = np.fromfile(fh, dtype="<f8", count=k * (s + 1) * 2)
            ab = ab.reshape(k, s + 1, 2)
            u = np.fromfile(fh, dtype="<f8", count=k)
            r = float(np.fromfile(fh, dtype="<f8", count=1)[0])
            records.append({
                "inputs": MappingInputs(d_tensor=d, f_matrix=f, p_vector=p),
                "labels": MappingLabels(a_bar=ab[..., 0] + 1j * ab[..., 1], u_bar=u),
                "r_ap1": r,
            })
    return {"num_users": k, "num_satellites": s, "num_antennas": n_t,
            "n_samples": n_samples}, records
