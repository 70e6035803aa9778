"""Distributed precoder solvers.

Two joint multi-satellite alternating optimizers share one loop skeleton:

* ``solve_ms_jocdwm`` — weighted-MSE minimization whose virtual receiver acts
  on a thin factor Q of the full channel covariance, so the surrogate equals
  the covariance-exact rate objective at every optimal receiver/weight pair.
* ``solve_ms_jowm``   — the classical scalar-receiver variant built on the
  channel mean only.

Each iteration updates the virtual receivers, the MSE weights, and then every
user's precoder through a ridge-regularized closed form with an exact
per-user power normalization; a final projection enforces the per-satellite
budgets.  Single-satellite and per-satellite baselines (SS-M, SS-WM,
MS-SepWM) operate on the mean channels alone.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .channel import ScenarioScsi
from .factorization import CovarianceFactors, build_factors


@dataclass(frozen=True)
class SolverConfig:
    """Iteration caps and numerical guards for the alternating solvers."""
    i_max: int = 10              # joint multi-satellite solvers
    chi: float = 0.001           # stop when the weighted MSE improvement drops below
    i_max1: int = 300            # baseline WMMSE cap
    init_scheme: str = "matched_filter"
    ridge_floor: float = 1e-12
    keep_iterates: bool = False  # snapshot the precoder after every iteration

    def __post_init__(self):
        if self.i_max < 1:
            raise ValueError("i_max must be >= 1")
        if self.chi <= 0:
            raise ValueError("chi must be positive")
        if self.i_max1 < 1:
            raise ValueError("i_max1 must be >= 1")


@dataclass
class PrecoderSolution:
    """Stacked precoders w[k] of length S*N_T plus bookkeeping.

    per_user_power holds the per-user power targets enforced before the
    per-satellite projection; sat_scales are the projection factors (1 where
    the budget was already met).
    """
    w: np.ndarray                 # (K, S*N_T)
    eta: np.ndarray               # (K,)
    per_user_power: np.ndarray    # (K,)
    n_t: int
    method: str = ""
    inactive_users: np.ndarray = None
    sat_scales: np.ndarray = None

    @property
    def num_users(self) -> int:
        return self.w.shape[0]

    @property
    def num_satellites(self) -> int:
        return self.w.shape[1] // self.n_t

    def per_satellite_matrix(self, s: int) -> np.ndarray:
        """W_s with one column per user (N_T x K)."""
        return self.w[:, s * self.n_t:(s + 1) * self.n_t].T

    def satellite_powers(self) -> np.ndarray:
        blocks = self.w.reshape(self.num_users, self.num_satellites, self.n_t)
        return np.sum(np.abs(blocks) ** 2, axis=(0, 2))


@dataclass
class AuxVars:
    """Virtual receivers (one column per user), MSE weights and values."""
    a: np.ndarray                 # (S+1, K) or (1, K) for the mean-only solver
    u: np.ndarray                 # (K,)
    e_tilde: np.ndarray           # (K,)


@dataclass
class ConvergenceTrace:
    method: str
    iterations: int = 0
    objective: list = field(default_factory=list)     # after the weight update
    e_tilde: list = field(default_factory=list)       # per-iteration (K,) arrays
    r_ap1_pre: list = field(default_factory=list)     # rate of the entering precoder
    r_ap1: list = field(default_factory=list)         # rate after the precoder update
    r_ap2: list = field(default_factory=list)
    deltas: list = field(default_factory=list)        # weighted MSE improvements
    n_linear_solves: int = 0
    wall_time_s: float = 0.0
    breakdown: bool = False
    messages: list = field(default_factory=list)
    final_aux: AuxVars | None = None
    iterates: list | None = None


class XiOperator:
    """The per-user quadratic-form matrix of the precoder update, kept as a
    weighted sum of rank-one rows so products cost O(K S N_T).

    Terms are (weight, block, row): ``block is None`` marks a full stacked
    row, otherwise the row lives in that satellite's N_T segment.  All
    weights are nonnegative, so the operator is Hermitian PSD.
    """

    def __init__(self, dim: int, n_t: int,
                 terms: list[tuple[float, int | None, np.ndarray]]):
        self.dim = dim
        self.n_t = n_t
        self.terms = terms

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim,):
            raise ValueError("dimension mismatch")
        out = np.zeros(self.dim, dtype=complex)
        for weight, block, row in self.terms:
            if block is None:
                out += weight * np.conj(row) * (row @ x)
            else:
                sl = slice(block * self.n_t, (block + 1) * self.n_t)
                out[sl] += weight * np.conj(row) * (row @ x[sl])
        return out

    def dense(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim), dtype=complex)
        for weight, block, row in self.terms:
            if block is None:
                m += weight * np.outer(np.conj(row), row)
            else:
                sl = slice(block * self.n_t, (block + 1) * self.n_t)
                m[sl, sl] += weight * np.outer(np.conj(row), row)
        return m


class _ScenarioArrays:
    """Array staging of one scenario: steering stack, factor coefficients and
    per-user factor objects shared by the solvers and the rate evaluators."""

    def __init__(self, scsi: ScenarioScsi):
        self.scsi = scsi
        self.K = scsi.num_users
        self.S = scsi.num_satellites
        self.n_t = scsi.array.n_t
        self.dim = self.S * self.n_t
        self.factors = [build_factors(scsi.stats[k], scsi.array)
                        for k in range(self.K)]
        self.V = scsi.steering_tensor()                      # (K, S, N_T)
        self.rho = np.array([f.mean_coef for f in self.factors])      # (K, S)
        self.coef_q = np.array([f.block_coef for f in self.factors])  # (K, S)
        self.coef_qt = np.array([f.tilde_coef for f in self.factors])  # (K, S)
        self.mean_rows = np.array([f.mean_row for f in self.factors])  # (K, dim)
        self.sigma2 = scsi.noise_power
        self.beta = scsi.weights
        self.p_sat = scsi.power_budget

    def cross_products(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """t[k, i, s] = v_{s,k}^T w_{s,i} and m[k, i] = mean-row_k . w_i."""
        w3 = w.reshape(self.K, self.S, self.n_t)
        t = np.einsum("ksn,isn->kis", self.V, w3)
        m = np.einsum("ks,kis->ki", self.rho, t)
        return t, m

    def quad_terms(self, t: np.ndarray, m: np.ndarray):
        """Signal, per-pair block interference and total denominators."""
        K = self.K
        tkk = t[np.arange(K), np.arange(K), :]               # (K, S)
        signal = np.abs(m[np.arange(K), np.arange(K)]) ** 2 \
            + np.sum(np.abs(self.coef_q * tkk) ** 2, axis=1)
        block_forms = np.sum(np.abs(self.coef_qt[:, None, :] * t) ** 2, axis=2)
        interf = block_forms.sum(axis=1) - block_forms[np.arange(K), np.arange(K)]
        denom = signal + interf + self.sigma2
        return signal, interf, denom

    def rates_ap1_ap2(self, w: np.ndarray) -> tuple[float, float]:
        """Weighted sums of the covariance-exact and mean-channel rates."""
        t, m = self.cross_products(w)
        signal, interf, _ = self.quad_terms(t, m)
        mean_sig = np.abs(m[np.arange(self.K), np.arange(self.K)]) ** 2
        r1 = np.log2(1.0 + signal / (interf + self.sigma2))
        r2 = np.log2(1.0 + mean_sig / (interf + signal - mean_sig + self.sigma2))
        return float(self.beta @ r1), float(self.beta @ r2)


def _deterministic_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate a vector so its largest-magnitude entry is real positive."""
    idx = int(np.argmax(np.abs(vec)))
    pivot = vec[idx]
    if abs(pivot) == 0.0:
        return vec
    return vec * (np.conj(pivot) / abs(pivot))


def init_precoder(scsi: ScenarioScsi, cfg: SolverConfig | None = None) -> PrecoderSolution:
    """Matched-filter initialization toward each user's stacked mean channel.

    Users with an all-zero channel mean (every link Rayleigh) fall back to
    the dominant eigenvector of their covariance, with a deterministic phase
    convention.  Every precoder is scaled to the equal power split
    P_k = sum_s P_s / K.
    """
    cfg = cfg or SolverConfig()
    arr = _ScenarioArrays(scsi)
    p_k = float(np.sum(arr.p_sat)) / arr.K
    w = np.empty((arr.K, arr.dim), dtype=complex)
    for k in range(arr.K):
        direction = np.conj(arr.mean_rows[k])
        norm = np.linalg.norm(direction)
        if norm < 1e-300:
            omega = arr.factors[k].omega_dense()
            _, vecs = np.linalg.eigh(omega)
            direction = _deterministic_phase(vecs[:, -1])
            norm = np.linalg.norm(direction)
        w[k] = direction * (math.sqrt(p_k) / norm)
    return PrecoderSolution(w=w, eta=np.ones(arr.K), per_user_power=np.full(arr.K, p_k),
                            n_t=arr.n_t, method="init",
                            inactive_users=np.zeros(arr.K, dtype=bool),
                            sat_scales=np.ones(arr.S))


def update_receiver(w: np.ndarray, k: int, factors_k: CovarianceFactors,
                    sigma2_k: float) -> np.ndarray:
    """Optimal virtual receiver a_k = Q_k w_k / (total received power + noise)."""
    qw = factors_k.apply_q(w[k])
    denom = float(np.real(qw.conj() @ qw)) + sigma2_k
    for i in range(w.shape[0]):
        if i != k:
            qt = factors_k.apply_q_tilde(w[i])
            denom += float(np.real(qt.conj() @ qt))
    return qw / denom


def mse_cdwmmse(w: np.ndarray, k: int, a_k: np.ndarray,
                factors_k: CovarianceFactors, sigma2_k: float) -> float:
    """Surrogate MSE of user k for an arbitrary virtual receiver.

    Mathematically real; the imaginary residue is asserted tiny and dropped.
    Raises on a nonpositive value (numerical breakdown upstream).
    """
    qw = factors_k.apply_q(w[k])
    quad = float(np.real(qw.conj() @ qw))
    for i in range(w.shape[0]):
        if i != k:
            qt = factors_k.apply_q_tilde(w[i])
            quad += float(np.real(qt.conj() @ qt))
    aa = float(np.real(a_k.conj() @ a_k))
    # The two cross terms are conjugates; computing them through independent
    # paths makes the imaginary residue a real check on factor assembly.
    cross1 = complex(a_k.conj() @ qw)
    cross2 = complex(np.conj(factors_k.apply_q_adjoint(a_k)) @ w[k])
    value = aa * quad - cross1 - cross2 + aa * sigma2_k + 1.0
    term_scale = max(1.0, aa * quad, abs(cross1) + abs(cross2))
    if abs(value.imag) > 1e-10 * term_scale:
        raise FloatingPointError(
            f"MSE has imaginary residue {value.imag:.3e} for user {k}")
    if not np.isfinite(value.real) or value.real <= 0.0:
        raise FloatingPointError(f"invalid MSE {value!r} for user {k}")
    return value.real


def build_xi(a: np.ndarray, u: np.ndarray, beta: np.ndarray,
             factors: list[CovarianceFactors], k: int) -> XiOperator:
    """Precoder-update operator: own covariance weighted by user k's receiver
    energy plus every other user's block-diagonal covariance.

    ``a`` has one receiver column per user, shape (S+1, K) (or (1, K) for the
    mean-only solver).
    """
    fk = factors[k]
    dim, n_t = fk.dim, fk.n_t
    aa = np.real(np.einsum("sk,sk->k", a.conj(), a))
    c = beta * u * aa
    terms: list[tuple[float, int | None, np.ndarray]] = [(c[k], None, fk.mean_row)]
    for s in range(fk.num_satellites):
        terms.append((c[k], s, fk.block_rows[s]))
    for i, fi in enumerate(factors):
        if i == k:
            continue
        for s in range(fi.num_satellites):
            terms.append((c[i], s, fi.tilde_rows[s]))
    return XiOperator(dim=dim, n_t=n_t, terms=terms)


def _solve_ridge(xi_dense: np.ndarray, mu: float, rhs: np.ndarray,
                 ridge_floor: float) -> np.ndarray:
    """Hermitian-PD solve of (xi + mu I) x = rhs with escalating jitter."""
    n = xi_dense.shape[0]
    scale = float(np.real(np.trace(xi_dense))) / n + mu
    jitter = 0.0
    for _ in range(6):
        try:
            cho = scipy.linalg.cho_factor(
                xi_dense + (mu + jitter) * np.eye(n), lower=True, check_finite=False)
            return scipy.linalg.cho_solve(cho, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, ridge_floor * max(scale, 1e-300))
    return np.linalg.lstsq(xi_dense + (mu + jitter) * np.eye(n), rhs, rcond=None)[0]


def closed_form_precoder(xi: XiOperator, factors_k: CovarianceFactors,
                         a_k: np.ndarray, u_k: float, beta_k: float,
                         sigma2_k: float, p_k: float,
                         ridge_floor: float = 1e-12) -> tuple[np.ndarray, float, bool]:
    """Closed-form per-user precoder under the equality power constraint.

    Solves (Xi + beta u a^H a sigma^2 / P_k I) w = beta u Q^H a and scales the
    result to power exactly P_k.  Returns (w_k, eta_k, active): an all-zero
    right-hand side yields a zero precoder flagged inactive.

    Args:
        xi: quadratic operator from :func:`build_xi`.
        factors_k: user k's covariance factors.
        a_k: virtual receiver, shape (S+1,).
        u_k, beta_k, sigma2_k, p_k: weight, rate weight, noise power, power target.
    """
    if p_k <= 0:
        raise ValueError("p_k must be positive")
    rhs = beta_k * u_k * factors_k.apply_q_adjoint(a_k)
    if not np.any(rhs):
        return np.zeros(xi.dim, dtype=complex), 0.0, False
    aa = float(np.real(a_k.conj() @ a_k))
    mu = beta_k * u_k * aa * sigma2_k / p_k
    w_bar = _solve_ridge(xi.dense(), mu, rhs, ridge_floor)
    eta = math.sqrt(p_k / float(np.real(w_bar.conj() @ w_bar)))
    return eta * w_bar, eta, True


def project_per_satellite(w: np.ndarray, power_budget: np.ndarray,
                          n_t: int) -> tuple[np.ndarray, np.ndarray]:
    """Scale each satellite's slice down to its power budget (never up).

    Returns the projected stack and the per-satellite scale factors.
    """
    K = w.shape[0]
    S = len(power_budget)
    blocks = w.reshape(K, S, n_t).copy()
    scales = np.ones(S)
    for s in range(S):
        used = float(np.sum(np.abs(blocks[:, s, :]) ** 2))
        if used > power_budget[s] > 0:
            scales[s] = math.sqrt(power_budget[s] / used)
            blocks[:, s, :] *= scales[s]
    return blocks.reshape(K, S * n_t), scales


def _alternating_solve(scsi: ScenarioScsi, cfg: SolverConfig, mode: str,
                       w_init: np.ndarray | None = None
                       ) -> tuple[PrecoderSolution, ConvergenceTrace]:
    """Shared loop of the joint multi-satellite solvers.

    mode "cd": vector receiver on the covariance factor rows.
    mode "wm": scalar receiver on the stacked channel mean.
    """
    start = time.perf_counter()
    arr = _ScenarioArrays(scsi)
    K, S, dim = arr.K, arr.S, arr.dim
    method = "MS-JoCDWM" if mode == "cd" else "MS-JoWM"
    trace = ConvergenceTrace(method=method)
    if cfg.keep_iterates:
        trace.iterates = []

    if w_init is None:
        w = init_precoder(scsi, cfg).w.copy()
    else:
        w = np.array(w_init, dtype=complex)
        if w.shape != (K, dim):
            raise ValueError("w_init has the wrong shape")
    if cfg.keep_iterates:
        trace.iterates.append(w.copy())

    p_k = float(np.sum(arr.p_sat)) / K
    beta, sigma2 = arr.beta, arr.sigma2
    idx = np.arange(K)
    # The zero-precoder MSE is 1, the natural no-information starting value
    # for the improvement-based stopping rule.
    e_t = np.ones(K)
    e_prev = np.full(K, np.inf)
    eta_arr = np.ones(K)
    inactive = np.zeros(K, dtype=bool)
    last_aux = None
    n = 0

    while n < cfg.i_max:
        with np.errstate(divide="ignore"):
            delta = float(beta @ np.log2(e_prev / e_t))
        if n > 0 and delta <= cfg.chi:
            break
        n += 1
        e_prev = e_t.copy()

        t, m = arr.cross_products(w)
        signal, interf, denom = arr.quad_terms(t, m)
        tkk = t[idx, idx, :]
        mkk = m[idx, idx]
        r1_pre = float(beta @ np.log2(1.0 + signal / (interf + sigma2)))
        trace.r_ap1_pre.append(r1_pre)

        # Virtual receivers: numerator rows of the factor applied to own w.
        if mode == "cd":
            num = np.concatenate([mkk[None, :], (arr.coef_q * tkk).T], axis=0)
        else:
            num = mkk[None, :]
        a_mat = num / denom[None, :]
        aa = np.real(np.einsum("sk,sk->k", a_mat.conj(), a_mat))

        # Weighted MSE and weights.
        cross = np.einsum("sk,sk->k", a_mat.conj(), num)
        quad = signal + interf
        e_t = aa * quad - 2.0 * cross.real + aa * sigma2 + 1.0
        if (not np.all(np.isfinite(e_t))) or np.any(e_t <= 0.0) \
                or np.any(np.abs(cross.imag) > 1e-10 * np.maximum(1.0, np.abs(cross.real))):
            trace.breakdown = True
            trace.messages.append(f"iteration {n}: invalid MSE values {e_t}")
            e_t = np.where(np.isfinite(e_prev), e_prev, np.ones(K))
            n -= 1
            break
        u = 1.0 / e_t
        obj = float(beta @ (u * e_t - np.log2(u)))
        trace.objective.append(obj)
        trace.e_tilde.append(e_t.copy())
        trace.deltas.append(delta if np.isfinite(delta) else float("inf"))
        last_aux = AuxVars(a=a_mat.copy(), u=u.copy(), e_tilde=e_t.copy())

        # Precoder update: shared block-diagonal interference matrix plus the
        # per-user rank corrections, then one ridge solve per user.
        c = beta * u * aa
        t_blocks = np.empty((S, arr.n_t, arr.n_t), dtype=complex)
        for s in range(S):
            rows = arr.coef_qt[:, s, None] * arr.V[:, s, :]       # (K, N_T)
            t_blocks[s] = (rows.conj().T * c) @ rows
        for k in range(K):
            if mode == "cd":
                rhs = beta[k] * u[k] * arr.factors[k].apply_q_adjoint(a_mat[:, k])
            else:
                rhs = beta[k] * u[k] * np.conj(arr.mean_rows[k]) * a_mat[0, k]
            if not np.any(rhs):
                w[k] = 0.0
                eta_arr[k] = 0.0
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
            eta_arr[k] = math.sqrt(p_k / float(np.real(w_bar.conj() @ w_bar)))
            w[k] = eta_arr[k] * w_bar
            inactive[k] = False

        r1, r2 = arr.rates_ap1_ap2(w)
        trace.r_ap1.append(r1)
        trace.r_ap2.append(r2)
        if cfg.keep_iterates:
            trace.iterates.append(w.copy())

    trace.iterations = n
    w_proj, scales = project_per_satellite(w, arr.p_sat, arr.n_t)
    trace.final_aux = last_aux
    trace.wall_time_s = time.perf_counter() - start
    sol = PrecoderSolution(w=w_proj, eta=eta_arr, per_user_power=np.full(K, p_k),
                           n_t=arr.n_t, method=method, inactive_users=inactive,
                           sat_scales=scales)
    return sol, trace


def solve_ms_jocdwm(scsi: ScenarioScsi, cfg: SolverConfig | None = None,
                    w_init: np.ndarray | None = None
                    ) -> tuple[PrecoderSolution, ConvergenceTrace]:
    """Joint multi-satellite covariance-decomposition WMMSE solver."""
    return _alternating_solve(scsi, cfg or SolverConfig(), "cd", w_init)


def solve_ms_jowm(scsi: ScenarioScsi, cfg: SolverConfig | None = None,
                  w_init: np.ndarray | None = None
                  ) -> tuple[PrecoderSolution, ConvergenceTrace]:
    """Joint multi-satellite WMMSE on the channel mean (scalar receivers)."""
    return _alternating_solve(scsi, cfg or SolverConfig(), "wm", w_init)


def _wmmse_deterministic(h: np.ndarray, sigma2: np.ndarray, beta: np.ndarray,
                         power: float, cfg: SolverConfig
                         ) -> tuple[np.ndarray, int, int, list[float]]:
    """Sum-power WMMSE treating the rows of ``h`` as exact channels.

    Returns (precoder rows (K, N_T), iterations, linear solves, objective
    trace).  The power constraint is enforced through the water-level search
    on the eigen-decomposition of the update matrix; the final precoder is
    rescaled to use the budget exactly.
    """
    K, n_t = h.shape
    w = np.conj(h)
    norms = np.linalg.norm(w, axis=1)
    fallback = norms < 1e-300
    if np.any(fallback):
        w[fallback] = 1.0 / math.sqrt(n_t)
        norms = np.linalg.norm(w, axis=1)
    w *= math.sqrt(power / K) / norms[:, None]

    e = np.ones(K)
    e_prev = np.full(K, np.inf)
    objective: list[float] = []
    solves = 0
    it = 0
    while it < cfg.i_max1:
        with np.errstate(divide="ignore"):
            delta = float(beta @ np.log2(e_prev / e))
        if it > 0 and delta <= cfg.chi:
            break
        it += 1
        e_prev = e.copy()

        g = h @ w.T                                   # g[k, i] = h_k . w_i
        denom = np.sum(np.abs(g) ** 2, axis=1) + sigma2
        a = np.diag(g) / denom
        e = np.abs(a) ** 2 * denom - 2.0 * np.real(np.conj(a) * np.diag(g)) + 1.0
        if np.any(e <= 0) or not np.all(np.isfinite(e)):
            break
        u = 1.0 / e
        objective.append(float(beta @ (u * e - np.log2(u))))

        c = beta * u * np.abs(a) ** 2
        m = (h.conj().T * c) @ h
        lam, basis = np.linalg.eigh(m)
        lam = np.maximum(lam, 0.0)
        b = (beta * u * np.conj(a))[:, None] * np.conj(h)     # rhs rows
        coeff = basis.conj().T @ b.T                          # (N_T, K)
        mag2 = np.abs(coeff) ** 2
        tol = max(float(lam[-1]), 1e-300) * 1e-12
        live = lam > tol

        def total_power(mu: float) -> float:
            scale = np.zeros_like(lam)
            active = live | (mu > 0)
            scale[active] = 1.0 / (lam[active] + mu) ** 2
            return float(np.sum(mag2 * scale[:, None]))

        if total_power(0.0) <= power:
            mu = 0.0
        else:
            hi = math.sqrt(float(np.sum(mag2)) / power)
            lo = 0.0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if total_power(mid) > power:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-15 * max(hi, 1.0):
                    break
            mu = hi
        gains = np.zeros_like(lam)
        sel = live | (mu > 0)
        gains[sel] = 1.0 / (lam[sel] + mu)
        w = (basis @ (coeff * gains[:, None])).T
        solves += K

    used = float(np.sum(np.abs(w) ** 2))
    if used > 0:
        w *= math.sqrt(power / used)
    return w, it, solves, objective


def solve_baselines(scsi: ScenarioScsi, cfg: SolverConfig | None = None,
                    which: str = "SS-WM", serving_satellite: int = 0
                    ) -> tuple[PrecoderSolution, ConvergenceTrace]:
    """Mean-channel baselines.

    SS-M: regularized channel inversion on the serving satellite's mean
    channels.  SS-WM: iterative WMMSE on the same channels.  MS-SepWM:
    independent per-satellite WMMSE, each satellite serving every user from
    its own budget.  The serving satellite defaults to index 0, the closest
    one under the range-ordered selection.
    """
    cfg = cfg or SolverConfig()
    if which not in ("SS-M", "SS-WM", "MS-SepWM"):
        raise ValueError(f"unknown baseline {which!r}")
    start = time.perf_counter()
    arr = _ScenarioArrays(scsi)
    K, S, n_t = arr.K, arr.S, arr.n_t
    trace = ConvergenceTrace(method=which)
    w = np.zeros((K, S * n_t), dtype=complex)

    def mean_rows_of(s: int) -> np.ndarray:
        return arr.rho[:, s, None] * arr.V[:, s, :]

    if which == "MS-SepWM":
        for s in range(S):
            ws, it, solves, obj = _wmmse_deterministic(
                mean_rows_of(s), arr.sigma2, arr.beta, float(arr.p_sat[s]), cfg)
            w[:, s * n_t:(s + 1) * n_t] = ws
            trace.iterations = max(trace.iterations, it)
            trace.n_linear_solves += solves
            trace.objective = obj if s == serving_satellite else trace.objective
    else:
        s0 = serving_satellite
        h = mean_rows_of(s0)
        power = float(arr.p_sat[s0])
        if which == "SS-M":
            gram = h @ h.conj().T
            delta = float(np.sum(arr.sigma2)) / power
            ws = (h.conj().T @ np.linalg.solve(gram + delta * np.eye(K), np.eye(K))).T
            used = float(np.sum(np.abs(ws) ** 2))
            if used > 0:
                ws *= math.sqrt(power / used)
            trace.iterations = 1
            trace.n_linear_solves = 1
        else:
            ws, it, solves, obj = _wmmse_deterministic(
                h, arr.sigma2, arr.beta, power, cfg)
            trace.iterations = it
            trace.n_linear_solves = solves
            trace.objective = obj
        w[:, s0 * n_t:(s0 + 1) * n_t] = ws

    r1, r2 = arr.rates_ap1_ap2(w)
    trace.r_ap1.append(r1)
    trace.r_ap2.append(r2)
    trace.wall_time_s = time.perf_counter() - start
    sol = PrecoderSolution(w=w, eta=np.ones(K),
                           per_user_power=np.sum(np.abs(w) ** 2, axis=1),
                           n_t=n_t, method=which,
                           inactive_users=np.zeros(K, dtype=bool),
                           sat_scales=np.ones(S))
    return sol, trace
