"""Statistical channel model for satellite downlinks.

Each link's narrowband channel after precompensation is a Rician scalar times
a planar-array steering vector times a unit-modulus phase-error factor:

    h = a * v(theta_x, theta_y) * exp(j * rho_err),   rho_err ~ N(0, phase_var)

with E|a|^2 = gamma and Rician factor kappa.  The module carries the slowly
varying statistics (gamma, kappa, angles, mean phase factor) and provides the
closed-form channel mean and covariance blocks they imply, plus a seeded
sampler for Monte Carlo evaluation and a free-space link budget that maps
geometry into statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import BOLTZMANN, SPEED_OF_LIGHT
from .geometry import LinkGeometry

# Deterministic phase of the line-of-sight component: (1+j)/sqrt(2), the
# same constant the channel-mean coefficient carries, so the sampler and the
# moment formulas agree exactly in the deterministic limit.
_LOS_PHASE = math.sqrt(0.5) * (1.0 + 1.0j)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array with n_v x n_h elements."""
    n_v: int
    n_h: int

    def __post_init__(self):
        if self.n_v < 1 or self.n_h < 1:
            raise ValueError("array dimensions must be >= 1")

    @property
    def n_t(self) -> int:
        return self.n_v * self.n_h


@dataclass(frozen=True)
class LinkStat:
    """Statistical CSI of one satellite-user link.

    gamma: average channel power (linear); kappa: Rician factor (linear,
    may be math.inf for a deterministic line-of-sight channel); mean_phase
    is E{exp(j rho_err)} and phase_var its underlying Gaussian variance.
    """
    gamma: float
    kappa: float
    theta_x: float
    theta_y: float
    mean_phase: complex = 1.0 + 0.0j
    phase_var: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.phase_var < 0:
            raise ValueError("phase_var must be nonnegative")
        if abs(self.mean_phase) > 1.0 + 1e-12:
            raise ValueError("|mean_phase| must not exceed 1")


@dataclass
class ScenarioScsi:
    """Complete statistical CSI of one cooperative transmission scenario."""
    stats: list[list[LinkStat]]          # K users x S satellites
    noise_power: np.ndarray              # (K,) W per subcarrier
    weights: np.ndarray                  # (K,) nonnegative rate weights
    power_budget: np.ndarray             # (S,) W per satellite
    array: ArrayGeometry

    def __post_init__(self):
        self.noise_power = np.asarray(self.noise_power, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.power_budget = np.asarray(self.power_budget, dtype=float)
        if np.any(self.noise_power <= 0):
            raise ValueError("noise powers must be positive")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(self.power_budget <= 0):
            raise ValueError("power budgets must be positive")
        k = len(self.stats)
        if k != self.noise_power.size or k != self.weights.size:
            raise ValueError("per-user array sizes disagree with stats grid")
        if any(len(row) != self.num_satellites for row in self.stats):
            raise ValueError("stats grid is ragged")

    @property
    def num_users(self) -> int:
        return len(self.stats)

    @property
    def num_satellites(self) -> int:
        return len(self.stats[0])

    def stat_grid(self, attr: str) -> np.ndarray:
        """K x S array of one LinkStat attribute."""
        return np.array([[getattr(st, attr) for st in row] for row in self.stats])

    def steering_tensor(self) -> np.ndarray:
        """(K, S, N_T) stack of steering vectors for every link."""
        out = np.empty((self.num_users, self.num_satellites, self.array.n_t),
                       dtype=complex)
        for k, row in enumerate(self.stats):
            for s, st in enumerate(row):
                out[k, s] = steering_vector(st.theta_x, st.theta_y, self.array)
        return out

    def rho_matrix(self) -> np.ndarray:
        """(K, S) channel-mean coefficients."""
        return np.array([[rho(st) for st in row] for row in self.stats])


@dataclass(frozen=True)
class ChannelRealization:
    """One sampled channel draw; h_bar[k, s] is the N_T-vector of link (s, k)."""
    h_bar: np.ndarray                    # (K, S, N_T) complex


def steering_vector(theta_x: float, theta_y: float, array: ArrayGeometry) -> np.ndarray:
    """Unit-norm UPA steering vector for departure angles (theta_x, theta_y).

    Built as the Kronecker product of the vertical factor at cos(theta_y) and
    the horizontal factor at sin(theta_y)cos(theta_x), each with element
    phases exp(-j pi n x); the composite is scaled to unit l2-norm so that
    E{||h||^2} = gamma holds for the channel model above.
    """
    xv = math.cos(theta_y)
    xh = math.sin(theta_y) * math.cos(theta_x)
    vv = np.exp(-1j * np.pi * np.arange(array.n_v) * xv)
    vh = np.exp(-1j * np.pi * np.arange(array.n_h) * xh)
    return np.kron(vv, vh) / math.sqrt(array.n_t)


def mean_phase_factor(phase_var: float) -> float:
    """E{exp(j rho_err)} for rho_err ~ N(0, phase_var): exp(-phase_var / 2)."""
    if phase_var < 0:
        raise ValueError("phase_var must be nonnegative")
    return math.exp(-phase_var / 2.0)


def _kappa_ratio(kappa: float) -> float:
    """kappa / (kappa + 1), handling kappa = inf."""
    if math.isinf(kappa):
        return 1.0
    return kappa / (kappa + 1.0)


def rho(stat: LinkStat) -> complex:
    """Channel-mean coefficient: sqrt(kappa gamma / (2(kappa+1))) (1+j) mean_phase.

    Zero for kappa = 0 (pure Rayleigh link).  Note |rho|^2 =
    gamma * kappa/(kappa+1) * |mean_phase|^2.
    """
    if stat.kappa == 0:
        return 0.0 + 0.0j
    amp = math.sqrt(stat.gamma * _kappa_ratio(stat.kappa))
    return amp * _LOS_PHASE * stat.mean_phase


def mean_channel(stat: LinkStat, array: ArrayGeometry) -> np.ndarray:
    """E{h} = rho * v(theta_x, theta_y)."""
    return rho(stat) * steering_vector(stat.theta_x, stat.theta_y, array)


def covariance_block(stat_s1: LinkStat, stat_s2: LinkStat, same_satellite: bool,
                     array: ArrayGeometry) -> np.ndarray:
    """Covariance block E{conj(h_s1) h_s2^T}.

    Same satellite: gamma * conj(v) v^T (full second moment).  Different
    satellites: links are independent, so the block is the outer product of
    the conjugated mean of s1 with the mean of s2.
    """
    v2 = steering_vector(stat_s2.theta_x, stat_s2.theta_y, array)
    if same_satellite:
        return stat_s1.gamma * np.outer(np.conj(v2), v2)
    v1 = steering_vector(stat_s1.theta_x, stat_s1.theta_y, array)
    return np.conj(rho(stat_s1)) * rho(stat_s2) * np.outer(np.conj(v1), v2)


def sample_link_coefficients(rng: np.random.Generator, gamma: np.ndarray,
                             kappa: np.ndarray, phase_var: np.ndarray,
                             n_trials: int = 1) -> np.ndarray:
    """Sample a * exp(j rho_err) for a grid of links.

    gamma/kappa/phase_var broadcast together to the link-grid shape; returns
    an (n_trials, *grid) complex array.  Draw order is fixed (LoS-independent
    complex normals first, then phases) so identical seeds reproduce bitwise.
    """
    gamma = np.asarray(gamma, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    phase_var = np.asarray(phase_var, dtype=float)
    shape = (n_trials,) + np.broadcast_shapes(gamma.shape, kappa.shape, phase_var.shape)

    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isinf(kappa), 1.0, kappa / (kappa + 1.0))
        nlos_var = np.where(np.isinf(kappa), 0.0, gamma / (kappa + 1.0))
    los = np.sqrt(gamma * ratio) * _LOS_PHASE
    scatter = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    scatter *= np.sqrt(nlos_var / 2.0)
    phase = np.exp(1j * rng.standard_normal(shape) * np.sqrt(phase_var))
    return (los + scatter) * phase


def sample_realization(scsi: ScenarioScsi, rng: np.random.Generator) -> ChannelRealization:
    """Draw one channel realization for every link, independent across links."""
    gamma = scsi.stat_grid("gamma")
    kappa = scsi.stat_grid("kappa")
    pvar = scsi.stat_grid("phase_var")
    coeff = sample_link_coefficients(rng, gamma, kappa, pvar, n_trials=1)[0]
    v = scsi.steering_tensor()
    return ChannelRealization(h_bar=coeff[..., None] * v)


@dataclass(frozen=True)
class LinkBudgetConfig:
    """Parameters mapping link geometry into statistical CSI.

    kappa_mode selects how Rician factors are assigned: "constant" uses
    kappa_db for every link; "lognormal" draws per-link K-factors in dB from
    N(kappa_db_mean, kappa_db_std^2), a rough urban line-of-sight spread.
    """
    f0_hz: float = 2e9
    subcarrier_spacing_hz: float = 30e3
    antenna_temp_k: float = 290.0
    noise_figure_db: float = 7.0
    tx_gain_dbi: float = 6.0
    rx_gain_dbi: float = 0.0
    kappa_mode: str = "lognormal"
    kappa_db: float = 25.0
    kappa_db_mean: float = 9.0
    kappa_db_std: float = 3.5
    phase_error_var: float = 0.05
    tx_power_w: float = 1.0              # per-satellite budget on the subcarrier
    user_weights: float = 1.0

    def __post_init__(self):
        if self.subcarrier_spacing_hz <= 0:
            raise ValueError("subcarrier spacing must be positive")
        if self.kappa_mode not in ("constant", "lognormal"):
            raise ValueError("kappa_mode must be 'constant' or 'lognormal'")


def free_space_path_loss_db(distance_m: float, f0_hz: float) -> float:
    """20 log10(4 pi d f / c); rejects nonpositive distance."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * f0_hz / SPEED_OF_LIGHT)


def noise_power_w(cfg: LinkBudgetConfig) -> float:
    """Per-subcarrier thermal noise power k_B * T * delta_f * NF."""
    return (BOLTZMANN * cfg.antenna_temp_k * cfg.subcarrier_spacing_hz
            * 10.0 ** (cfg.noise_figure_db / 10.0))


def link_budget_scsi(geometry: list[list[LinkGeometry]], cfg: LinkBudgetConfig,
                     array: ArrayGeometry,
                     rng: np.random.Generator | None = None) -> ScenarioScsi:
    """Build a scenario's statistical CSI from per-link geometry.

    gamma is the free-space gain at the slant range with the configured
    antenna gains; noise power is thermal per subcarrier; kappa follows
    cfg.kappa_mode (rng required for "lognormal"); the mean phase factor is
    derived from cfg.phase_error_var.

    Args:
        geometry: K x S grid of LinkGeometry.
        cfg: budget parameters.
        array: transmit array (stored on the scenario).
        rng: generator for the kappa draw; defaults to a fixed seed.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    K = len(geometry)
    S = len(geometry[0])
    phi_bar = mean_phase_factor(cfg.phase_error_var)

    stats = []
    for k in range(K):
        row = []
        for s in range(S):
            g = geometry[k][s]
            loss_db = free_space_path_loss_db(g.slant_range_km * 1e3, cfg.f0_hz)
            gamma_db = cfg.tx_gain_dbi + cfg.rx_gain_dbi - loss_db
            if cfg.kappa_mode == "constant":
                kappa_db = cfg.kappa_db
            else:
                kappa_db = rng.normal(cfg.kappa_db_mean, cfg.kappa_db_std)
            row.append(LinkStat(
                gamma=10.0 ** (gamma_db / 10.0),
                kappa=10.0 ** (kappa_db / 10.0),
                theta_x=g.theta_x,
                theta_y=g.theta_y,
                mean_phase=phi_bar,
                phase_var=cfg.phase_error_var,
            ))
        stats.append(row)

    return ScenarioScsi(
        stats=stats,
        noise_power=np.full(K, noise_power_w(cfg)),
        weights=np.full(K, cfg.user_weights),
        power_budget=np.full(S, cfg.tx_power_w),
        array=array,
    )
