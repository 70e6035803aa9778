"""Shared scenario builders for the test suite."""
import numpy as np
import pytest

from satmimo import ArrayGeometry, LinkStat, ScenarioScsi


def random_scenario(rng, num_users=3, num_satellites=3, n_v=2, n_h=2,
                    kappa=None, kappa_max=100.0, phase_var=None,
                    zero_kappa_frac=0.2, snr_db_range=(5.0, 20.0)):
    """Random but well-conditioned scenario in normalized units.

    gamma spans two decades around 1; noise power is drawn so the matched
    single-link SNR lands in ``snr_db_range``; kappa mixes Rayleigh and
    strongly Rician links unless pinned.
    """
    array = ArrayGeometry(n_v, n_h)
    stats = []
    for _ in range(num_users):
        row = []
        for _ in range(num_satellites):
            pv = rng.uniform(0.0, 0.6) if phase_var is None else phase_var
            if kappa is not None:
                kap = kappa
            elif rng.random() < zero_kappa_frac:
                kap = 0.0
            else:
                kap = rng.uniform(0.1, kappa_max)
            row.append(LinkStat(
                gamma=10.0 ** rng.uniform(-1.0, 1.0),
                kappa=kap,
                theta_x=rng.uniform(-np.pi, np.pi),
                theta_y=rng.uniform(0.2 * np.pi, 0.8 * np.pi),
                mean_phase=np.exp(-pv / 2.0),
                phase_var=pv,
            ))
        stats.append(row)
    p_sat = rng.uniform(0.5, 2.0, num_satellites)
    snr = 10.0 ** (rng.uniform(*snr_db_range) / 10.0)
    noise = np.full(num_users, float(np.sum(p_sat)) / num_users / snr)
    return ScenarioScsi(stats=stats, noise_power=noise,
                        weights=np.ones(num_users), power_budget=p_sat,
                        array=array)


def single_link_scenario(gamma=1.0, kappa=np.inf, theta_x=0.4, theta_y=1.5,
                         phase_var=0.0, noise=0.01, power=1.0, n_v=2, n_h=2):
    """One user, one satellite."""
    mean_phase = np.exp(-phase_var / 2.0)
    stat = LinkStat(gamma=gamma, kappa=kappa, theta_x=theta_x, theta_y=theta_y,
                    mean_phase=mean_phase, phase_var=phase_var)
    return ScenarioScsi(stats=[[stat]], noise_power=[noise], weights=[1.0],
                        power_budget=[power], array=ArrayGeometry(n_v, n_h))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
