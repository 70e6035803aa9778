"""OFDM precompensation kernel tests.

Covers: the per-subcarrier phase factor (unit modulus, integer-cycle wrap,
independent exponent assembly), the inter-carrier leakage kernel against a
direct geometric-series sum (plus energy and periodicity invariants), delay
case classification with the whole-sample decomposition, and the sample-level
link simulator against the frequency-domain model in both the exact zero
Doppler regime and the leaky small-Doppler regime.
"""
import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satmimo import (CompensationError, OfdmParams, classify_delay_case,
                     freq_domain_model, ici_kernel, phase_error_phi,
                     simulate_single_link)

P8 = OfdmParams(n_subcarriers=8, n_cp=2, delta_f_hz=30e3, f0_hz=2e9)


def direct_psi(nu_bar, offset, params):
    """Oracle: psi as the plain average of N rotating phasors."""
    x = nu_bar / params.delta_f_hz - offset
    n = params.n_subcarriers
    return sum(cmath.exp(1j * 2 * cmath.pi * i * x / n) for i in range(n)) / n


# -- phase factor ---------------------------------------------------------------

def test_phase_factor_zero_delay_is_one():
    err = CompensationError(0.0, 0.0, 500.0)
    for n in range(8):
        assert phase_error_phi(n, err, P8) == 1.0


def test_phase_factor_integer_cycles():
    err = CompensationError(tau_bar_s=1e-9, nu_bar_hz=0.0, nu_cps_hz=0.0)
    # f0 tau = 2 full cycles at n = 0
    assert phase_error_phi(0, err, P8) == pytest.approx(1.0, abs=1e-12)


def test_phase_factor_independent_assembly(rng):
    for _ in range(20):
        err = CompensationError(tau_bar_s=rng.uniform(-1e-6, 1e-6),
                                nu_bar_hz=0.0, nu_cps_hz=rng.uniform(-1e4, 1e4))
        n = int(rng.integers(0, 8))
        expected = cmath.exp(1j * 2 * cmath.pi
                             * (P8.f0_hz + n * P8.delta_f_hz - err.nu_cps_hz)
                             * err.tau_bar_s)
        assert phase_error_phi(n, err, P8) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e-5, 1e-5), st.floats(-1e4, 1e4), st.integers(0, 7))
def test_phase_factor_unit_modulus(tau, nu_cps, n):
    err = CompensationError(tau_bar_s=tau, nu_bar_hz=0.0, nu_cps_hz=nu_cps)
    assert abs(abs(phase_error_phi(n, err, P8)) - 1.0) < 1e-12


# -- inter-carrier kernel --------------------------------------------------------

def test_ici_kernel_orthogonal_without_doppler():
    assert ici_kernel(0.0, 0, P8) == 1.0
    for off in (-7, -3, 1, 5):
        assert ici_kernel(0.0, off, P8) == pytest.approx(0.0, abs=1e-15)


def test_ici_kernel_matches_direct_sum():
    got = ici_kernel(0.01 * P8.delta_f_hz, 0, P8)
    assert got == pytest.approx(direct_psi(0.01 * P8.delta_f_hz, 0, P8), abs=1e-12)


def test_ici_kernel_grid_against_oracle():
    for nu_frac in np.linspace(-0.45, 0.45, 10):
        for off in range(-5, 5):
            got = ici_kernel(nu_frac * P8.delta_f_hz, off, P8)
            want = direct_psi(nu_frac * P8.delta_f_hz, off, P8)
            assert abs(got - want) < 1e-12


def test_ici_kernel_energy_is_bounded():
    for nu_frac in (0.0, 0.05, 0.23, 0.49):
        energy = sum(abs(ici_kernel(nu_frac * P8.delta_f_hz, j - 3, P8)) ** 2
                     for j in range(8))
        assert energy <= 1.0 + 1e-9
        if nu_frac == 0.0:
            assert energy == pytest.approx(1.0, abs=1e-9)


def test_ici_kernel_periodic_in_doppler():
    nu = 0.37 * P8.delta_f_hz
    period = P8.n_subcarriers * P8.delta_f_hz
    for off in (-2, 0, 3):
        a = ici_kernel(nu, off, P8)
        b = ici_kernel(nu + period, off, P8)
        assert a == pytest.approx(b, abs=1e-9)


def test_ici_kernel_rejects_huge_offsets():
    with pytest.raises(ValueError):
        ici_kernel(0.0, 8, P8)


# -- delay case classification ----------------------------------------------------

def test_delay_cases():
    assert classify_delay_case(-P8.t_cp / 2, P8)[0] == "i"
    assert classify_delay_case(P8.t_sample, P8)[0] == "iii"
    assert classify_delay_case(-(P8.t_cp + P8.t_sample), P8)[0] == "ii"
    assert classify_delay_case(0.0, P8)[0] == "i"


@settings(max_examples=60, deadline=None)
@given(st.floats(-5e-5, 5e-5))
def test_delay_decomposition(tau):
    case, n_de, tau_hat = classify_delay_case(tau, P8)
    assert abs(tau_hat) < P8.t_sample
    assert tau == pytest.approx(n_de * P8.t_sample + tau_hat, abs=1e-18)
    if n_de != 0 and tau_hat != 0.0:
        assert np.sign(tau_hat) == np.sign(n_de)
    assert case in ("i", "ii", "iii")


# -- single-link simulator ----------------------------------------------------------

def test_simulator_identity_link(rng):
    tx = rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))
    out = simulate_single_link(P8, CompensationError(0.0, 0.0, 0.0), tx)
    np.testing.assert_allclose(out, tx, atol=1e-12)


def test_simulator_matches_phase_model_without_doppler(rng):
    """With zero residual Doppler and a case-i delay the frequency model
    output[n] = tx[n] phi^n is exact."""
    tx = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
    err = CompensationError(tau_bar_s=-0.6 * P8.t_cp, nu_bar_hz=0.0,
                            nu_cps_hz=240.0)
    out = simulate_single_link(P8, err, tx)
    phi = np.array([phase_error_phi(n, err, P8) for n in range(8)])
    np.testing.assert_allclose(out, tx * phi, atol=1e-9)


def test_simulator_matches_ici_model_with_doppler(rng):
    tx = rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))
    err = CompensationError(tau_bar_s=-0.3 * P8.t_cp,
                            nu_bar_hz=0.01 * P8.delta_f_hz, nu_cps_hz=55.0)
    sim = simulate_single_link(P8, err, tx)
    model = freq_domain_model(P8, err, tx)
    scale = np.abs(sim).max()
    assert np.abs(sim - model).max() < 1e-6 * scale


def test_simulator_rejects_isi_regimes(rng):
    tx = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    with pytest.raises(ValueError):
        simulate_single_link(P8, CompensationError(P8.t_sample, 0.0, 0.0), tx)
    with pytest.raises(ValueError):
        simulate_single_link(P8, CompensationError(-(P8.t_cp + P8.t_sample), 0.0, 0.0), tx)
    with pytest.raises(ValueError):
        simulate_single_link(P8, CompensationError(0.0, 1.5 * P8.delta_f_hz, 0.0), tx)


def test_simulator_channel_gain_scales_linearly(rng):
    tx = rng.standard_normal((1, 8)) + 1j * rng.standard_normal((1, 8))
    err = CompensationError(-0.2 * P8.t_cp, 0.0, 0.0)
    base = simulate_single_link(P8, err, tx)
    scaled = simulate_single_link(P8, err, tx, channel_gain=0.3 - 0.4j)
    np.testing.assert_allclose(scaled, (0.3 - 0.4j) * base, rtol=1e-12)
