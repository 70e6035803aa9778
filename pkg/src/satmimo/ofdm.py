"""OFDM precompensation kernels and a sample-level single-link simulator.

Residual delay error tau_bar rotates each subcarrier by the unit-modulus
factor phi^n; residual Doppler nu_bar leaks energy between subcarriers
through a Dirichlet-type kernel psi.  The simulator evaluates the full
transmit/channel/receive chain analytically (the baseband signal is a finite
sum of exponentials, so samples are exact) and serves as the ground truth for
the frequency-domain model.

Conventions: the transmitter synthesizes sum_n x_n exp(+j 2 pi n df t) and
the receiver applies a forward DFT with exp(-j 2 pi i j / N) / N.  Under
these conventions the leakage from transmit subcarrier n onto receive bin j
is psi(nu_bar, j - n), i.e. the kernel's integer offset is the receive bin
minus the transmit subcarrier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OfdmParams:
    """Subcarrier grid and timing of one OFDM numerology."""
    n_subcarriers: int
    n_cp: int
    delta_f_hz: float
    f0_hz: float

    def __post_init__(self):
        if self.n_subcarriers < 2:
            raise ValueError("need at least 2 subcarriers")
        if not 0 <= self.n_cp < self.n_subcarriers:
            raise ValueError("n_cp must be in [0, n_subcarriers)")
        if self.delta_f_hz <= 0:
            raise ValueError("delta_f_hz must be positive")

    @property
    def t_sample(self) -> float:
        return 1.0 / (self.n_subcarriers * self.delta_f_hz)

    @property
    def t_useful(self) -> float:
        return 1.0 / self.delta_f_hz

    @property
    def t_cp(self) -> float:
        return self.n_cp * self.t_sample

    @property
    def t_symbol(self) -> float:
        return self.t_useful + self.t_cp


@dataclass(frozen=True)
class CompensationError:
    """Residual delay/Doppler after transmitter-side precompensation.

    tau_bar = applied delay compensation minus true delay; nu_bar = true
    Doppler minus applied compensation; nu_cps is the applied Doppler
    compensation itself (it enters the phase factor).
    """
    tau_bar_s: float
    nu_bar_hz: float
    nu_cps_hz: float = 0.0


def phase_error_phi(n: int, err: CompensationError, params: OfdmParams) -> complex:
    """Per-subcarrier phase rotation exp(j 2 pi (f0 + n df - nu_cps) tau_bar)."""
    if not 0 <= n < params.n_subcarriers:
        raise ValueError("subcarrier index out of range")
    freq = params.f0_hz + n * params.delta_f_hz - err.nu_cps_hz
    return complex(np.exp(1j * 2.0 * np.pi * freq * err.tau_bar_s))


def ici_kernel(nu_bar_hz: float, offset: int, params: OfdmParams) -> complex:
    """Inter-carrier leakage coefficient.

    psi = (1/N) (1 - exp(j 2 pi x)) / (1 - exp(j 2 pi x / N)) with
    x = nu_bar/df - offset, and psi = 1 at the removable singularity
    x = 0 (mod N).  ``offset`` is the receive-bin index minus the transmit
    subcarrier index (see module docstring for the sign convention).
    """
    N = params.n_subcarriers
    if abs(offset) >= N:
        raise ValueError("offset magnitude must be below n_subcarriers")
    x = nu_bar_hz / params.delta_f_hz - offset
    rem = x - N * round(x / N)
    if abs(rem) < 1e-14:
        return 1.0 + 0.0j
    num = 1.0 - np.exp(1j * 2.0 * np.pi * x)
    den = 1.0 - np.exp(1j * 2.0 * np.pi * x / N)
    return complex(num / den / N)


def classify_delay_case(tau_bar_s: float, params: OfdmParams) -> tuple[str, int, float]:
    """Classify a delay error and decompose it into whole samples plus a rest.

    Returns (case, n_de, tau_hat) with tau_bar = n_de * t_sample + tau_hat,
    |tau_hat| < t_sample and sign(tau_hat) = sign(n_de).  Case "i": the
    receive window still starts inside the cyclic prefix (tau_bar <= 0,
    |tau_bar| < t_cp) and no inter-symbol interference arises; "ii": the
    window starts before the prefix (tau_bar < 0, |tau_bar| >= t_cp);
    "iii": positive delay error (tau_bar > 0).
    """
    n_de = int(tau_bar_s / params.t_sample)   # truncation keeps the sign
    tau_hat = tau_bar_s - n_de * params.t_sample
    if tau_bar_s > 0:
        case = "iii"
    elif abs(tau_bar_s) < params.t_cp:
        case = "i"
    else:
        case = "ii"
    return case, n_de, tau_hat


def simulate_single_link(params: OfdmParams, err: CompensationError,
                         tx_symbols: np.ndarray, n_symbols: int | None = None,
                         channel_gain: complex = 1.0 + 0.0j) -> np.ndarray:
    """Sample-level simulation of one precompensated OFDM link.

    Runs the full chain: subcarrier synthesis, cyclic prefix, upconversion,
    delay/Doppler precompensation, an ideal single-tap channel with delay and
    Doppler, downconversion, sampling, prefix removal and DFT.  All signals
    are evaluated analytically at the sample instants.

    Args:
        params: OFDM numerology.
        err: residual errors; must be a case-"i" delay and |nu_bar| < delta_f.
        tx_symbols: (n_symbols, N) or (N,) frequency-domain transmit symbols.
        n_symbols: optional override of the symbol count.
        channel_gain: flat complex channel coefficient.

    Returns:
        (n_symbols, N) received frequency-domain symbols.
    """
    tx = np.atleast_2d(np.asarray(tx_symbols, dtype=complex))
    if n_symbols is None:
        n_symbols = tx.shape[0]
    if tx.shape != (n_symbols, params.n_subcarriers):
        raise ValueError("tx_symbols must be (n_symbols, n_subcarriers)")
    case, _, _ = classify_delay_case(err.tau_bar_s, params)
    if case != "i":
        raise ValueError(f"delay error falls in case {case}; only the "
                         "ISI-free case 'i' is modeled")
    if abs(err.nu_bar_hz) >= params.delta_f_hz:
        raise ValueError("|nu_bar| must stay below the subcarrier spacing")

    N = params.n_subcarriers
    ts = params.t_sample
    t_sym = params.t_symbol
    n = np.arange(N)
    out = np.empty((n_symbols, N), dtype=complex)

    # After downconversion the received baseband sample at time t is
    #   h * x_base(t + tau_bar) * exp(j 2 pi (f0 - nu_cps) tau_bar)
    #                           * exp(j 2 pi nu_bar t),
    # where x_base is the prefixed baseband waveform.  Within the window of
    # symbol m the waveform equals sum_n x_n exp(j 2 pi n df (t - m t_sym))
    # (prefix included, by periodicity).
    static_phase = np.exp(1j * 2.0 * np.pi * (params.f0_hz - err.nu_cps_hz)
                          * err.tau_bar_s)
    dft = np.exp(-1j * 2.0 * np.pi * np.outer(n, n) / N) / N

    for m in range(n_symbols):
        t = m * t_sym + n * ts                       # sampling instants
        t_shift = t + err.tau_bar_s
        seg = np.floor((t_shift + params.t_cp) / t_sym + 1e-12).astype(int)
        if np.any(seg != m):
            raise ValueError("sampling window left the current symbol")
        local = t_shift - m * t_sym
        base = np.exp(1j * 2.0 * np.pi * np.outer(local, n) * params.delta_f_hz) @ tx[m]
        samples = channel_gain * static_phase * base \
            * np.exp(1j * 2.0 * np.pi * err.nu_bar_hz * t)
        out[m] = dft @ samples
    return out


def freq_domain_model(params: OfdmParams, err: CompensationError,
                      tx_symbols: np.ndarray,
                      channel_gain: complex = 1.0 + 0.0j) -> np.ndarray:
    """Frequency-domain model of the same link: per-subcarrier rotation phi^n
    plus inter-carrier mixing psi, with the per-symbol Doppler phase.

    output[m, j] = gain * e^{j 2 pi nu_bar m t_sym}
                   * sum_n tx[m, n] phi^n psi(nu_bar, j - n)
    """
    tx = np.atleast_2d(np.asarray(tx_symbols, dtype=complex))
    n_symbols, N = tx.shape
    phi = np.array([phase_error_phi(n, err, params) for n in range(N)])
    psi = np.empty((N, N), dtype=complex)            # psi[j, n]
    for j in range(N):
        for n in range(N):
            psi[j, n] = ici_kernel(err.nu_bar_hz, j - n, params)
    out = np.empty((n_symbols, N), dtype=complex)
    for m in range(n_symbols):
        sym_phase = np.exp(1j * 2.0 * np.pi * err.nu_bar_hz * m * params.t_symbol)
        out[m] = channel_gain * sym_phase * (psi @ (phi * tx[m]))
    return out
