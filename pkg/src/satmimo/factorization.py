"""Low-rank factorization of the stacked channel covariance.

For user k the (S N_T x S N_T) covariance Omega_k of the stacked channel and
its block-diagonal part Omega_tilde_k admit exact thin factorizations

    Omega_k       = Q_k^H Q_k,        Q_k:       (S+1) x S N_T
    Omega_tilde_k = Q_tilde_k^H Q_tilde_k,  Q_tilde_k:  S x S N_T

where row 0 of Q_k is the stacked channel-mean row and the remaining rows are
per-satellite blocks scaled by varkappa = sqrt(gamma/|rho|^2 - 1) (and
varkappa_tilde = sqrt(gamma/|rho|^2) for the block-diagonal factor).  Rows are
stored sparsely (one N_T block per satellite row) so quadratic forms cost
O(S N_T) instead of O(S^2 N_T^2); no full covariance is materialized in the
solver hot path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, LinkStat, rho, steering_vector


@dataclass
class CovarianceFactors:
    """Thin covariance factors of one user.

    mean_row is the stacked E{h^T} (length S*N_T).  block_rows[s] holds the
    only nonzero N_T-segment of factor row s+1; tilde_rows[s] likewise for
    the block-diagonal factor.  varkappa/varkappa_tilde keep the scalar
    coefficients for inspection.
    """
    mean_row: np.ndarray          # (S*N_T,)
    block_rows: np.ndarray        # (S, N_T)
    tilde_rows: np.ndarray        # (S, N_T)
    varkappa: np.ndarray          # (S,)
    varkappa_tilde: np.ndarray    # (S,)
    n_t: int
    mean_coef: np.ndarray = None    # (S,) rho per satellite
    block_coef: np.ndarray = None   # (S,) scalar of block_rows[s] relative to v
    tilde_coef: np.ndarray = None   # (S,)

    @property
    def num_satellites(self) -> int:
        return self.block_rows.shape[0]

    @property
    def dim(self) -> int:
        return self.num_satellites * self.n_t

    def q_matrix(self) -> np.ndarray:
        """Dense (S+1) x S*N_T factor (row 0 = mean row, block rows below)."""
        S, n_t = self.num_satellites, self.n_t
        q = np.zeros((S + 1, S * n_t), dtype=complex)
        q[0] = self.mean_row
        for s in range(S):
            q[s + 1, s * n_t:(s + 1) * n_t] = self.block_rows[s]
        return q

    def q_tilde_matrix(self) -> np.ndarray:
        """Dense S x S*N_T block-diagonal factor."""
        S, n_t = self.num_satellites, self.n_t
        q = np.zeros((S, S * n_t), dtype=complex)
        for s in range(S):
            q[s, s * n_t:(s + 1) * n_t] = self.tilde_rows[s]
        return q

    def apply_q(self, w: np.ndarray) -> np.ndarray:
        """Q w in O(S N_T): entry 0 from the mean row, one entry per block."""
        w = np.asarray(w)
        if w.shape != (self.dim,):
            raise ValueError("stacked vector has wrong length")
        blocks = w.reshape(self.num_satellites, self.n_t)
        out = np.empty(self.num_satellites + 1, dtype=complex)
        out[0] = self.mean_row @ w
        out[1:] = np.einsum("sn,sn->s", self.block_rows, blocks)
        return out

    def apply_q_tilde(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w)
        if w.shape != (self.dim,):
            raise ValueError("stacked vector has wrong length")
        blocks = w.reshape(self.num_satellites, self.n_t)
        return np.einsum("sn,sn->s", self.tilde_rows, blocks)

    def apply_q_adjoint(self, qw: np.ndarray) -> np.ndarray:
        """Q^H applied to an (S+1,) vector."""
        qw = np.asarray(qw)
        if qw.shape != (self.num_satellites + 1,):
            raise ValueError("adjoint input must have length S + 1")
        out = np.conj(self.mean_row) * qw[0]
        blocks = out.reshape(self.num_satellites, self.n_t)
        blocks += np.conj(self.block_rows) * qw[1:, None]
        return out

    def omega_dense(self) -> np.ndarray:
        """Dense Omega = Q^H Q (test/diagnostic use)."""
        q = self.q_matrix()
        return q.conj().T @ q

    def omega_tilde_dense(self) -> np.ndarray:
        q = self.q_tilde_matrix()
        return q.conj().T @ q


def build_factors(scsi_column: list[LinkStat], array: ArrayGeometry) -> CovarianceFactors:
    """Construct the thin covariance factors from one user's link statistics.

    The block rows are built from the deterministic mean direction rho * v of
    each link; with that choice Q^H Q reproduces the covariance exactly.  A
    kappa = 0 link has rho = 0, and its rows degenerate continuously to
    sqrt(gamma) * v^T (scaled steering alone).
    """
    S = len(scsi_column)
    n_t = array.n_t
    mean_row = np.zeros(S * n_t, dtype=complex)
    block_rows = np.zeros((S, n_t), dtype=complex)
    tilde_rows = np.zeros((S, n_t), dtype=complex)
    vk = np.zeros(S)
    vkt = np.zeros(S)
    mean_coef = np.zeros(S, dtype=complex)
    block_coef = np.zeros(S, dtype=complex)
    tilde_coef = np.zeros(S, dtype=complex)

    for s, stat in enumerate(scsi_column):
        v = steering_vector(stat.theta_x, stat.theta_y, array)
        r = rho(stat)
        r2 = abs(r) ** 2
        if r2 > stat.gamma * (1.0 + 1e-12):
            raise ValueError(
                f"link {s}: |rho|^2 = {r2:.3e} exceeds gamma = {stat.gamma:.3e}")
        if r2 > 0.0:
            vk[s] = np.sqrt(max(stat.gamma / r2 - 1.0, 0.0))
            vkt[s] = np.sqrt(stat.gamma / r2)
            mean_coef[s] = r
            block_coef[s] = vk[s] * r
            tilde_coef[s] = vkt[s] * r
        else:
            # Rayleigh link: zero mean, rows carry the full power directly.
            vk[s] = np.inf
            vkt[s] = np.inf
            block_coef[s] = np.sqrt(stat.gamma)
            tilde_coef[s] = np.sqrt(stat.gamma)
        mean_row[s * n_t:(s + 1) * n_t] = mean_coef[s] * v
        block_rows[s] = block_coef[s] * v
        tilde_rows[s] = tilde_coef[s] * v
    return CovarianceFactors(mean_row=mean_row, block_rows=block_rows,
                             tilde_rows=tilde_rows, varkappa=vk,
                             varkappa_tilde=vkt, n_t=n_t, mean_coef=mean_coef,
                             block_coef=block_coef, tilde_coef=tilde_coef)


def quad_form(factors: CovarianceFactors, w: np.ndarray, which: str = "full") -> float:
    """Quadratic form w^H Omega w (which="full") or w^H Omega_tilde w
    (which="block") evaluated as ||Q w||^2 / ||Q_tilde w||^2."""
    if which == "full":
        qw = factors.apply_q(w)
    elif which == "block":
        qw = factors.apply_q_tilde(w)
    else:
        raise ValueError("which must be 'full' or 'block'")
    return float(np.real(qw.conj() @ qw))


def cholesky_reference(omega: np.ndarray, jitter: float = 1e-12) -> np.ndarray:
    """Reference triangular factor with L^H L = omega (upper-triangular L).

    Used only to confirm that the thin factors span the same quadratic forms;
    semidefinite inputs get a diagonal jitter scaled by the trace.
    """
    omega = np.asarray(omega)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise ValueError("omega must be square")
    if not np.allclose(omega, omega.conj().T, atol=1e-10 * max(1.0, float(np.abs(omega).max()))):
        raise ValueError("omega must be Hermitian")
    n = omega.shape[0]
    scale = float(np.real(np.trace(omega))) / max(n, 1)
    bumped = omega + (jitter * max(scale, 1.0)) * np.eye(n)
    lower = np.linalg.cholesky(bumped)
    return lower.conj().T
