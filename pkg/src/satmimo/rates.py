"""Rate evaluation: two closed-form surrogates and a Monte Carlo estimate.

* AP1 treats the full channel covariance as the signal power (exact for the
  expected-SINR surrogate the joint covariance solver optimizes).
* AP2 keeps only the channel-mean power in the numerator, with the
  covariance remainder inflating the denominator (what the mean-channel
  WMMSE surrogate implies); AP2 <= AP1 always.
* MC samples channel realizations and averages instantaneous rates, with
  interference summed incoherently across satellites, matching the
  independence approximation behind the block-diagonal interference model.

Rates are per subcarrier in bits/s/Hz; the reported sum is weighted by the
per-user rate weights.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .channel import ScenarioScsi, sample_link_coefficients
from .solvers import _ScenarioArrays


@dataclass
class RateReport:
    per_user_rate: np.ndarray      # (K,) bits/s/Hz, unweighted
    sum_rate: float                # weighted by the scenario's user weights
    kind: str                      # "AP1" | "AP2" | "MC"
    mc_stderr: float | None = None


def _as_arrays(scsi: ScenarioScsi, arrays: _ScenarioArrays | None) -> _ScenarioArrays:
    return arrays if arrays is not None else _ScenarioArrays(scsi)


def _canonical_user_order(scsi: ScenarioScsi, w: np.ndarray) -> np.ndarray:
    """Stable user ordering by a digest of everything a user's rate depends
    on (link statistics, noise, weight, precoder row), so random draws travel
    with users rather than with array positions."""
    digests = []
    for k in range(scsi.num_users):
        h = hashlib.sha256()
        for st in scsi.stats[k]:
            h.update(np.array([st.gamma, st.kappa, st.theta_x, st.theta_y,
                               st.phase_var, np.real(st.mean_phase),
                               np.imag(st.mean_phase)]).tobytes())
        h.update(np.array([scsi.noise_power[k], scsi.weights[k]]).tobytes())
        h.update(np.ascontiguousarray(w[k]).tobytes())
        digests.append(h.digest())
    return np.argsort(np.array(digests), kind="stable")


def rate_ap1(w: np.ndarray, scsi: ScenarioScsi,
             arrays: _ScenarioArrays | None = None) -> RateReport:
    """Covariance-exact per-user rates log2(1 + w^H Omega w / (interf + noise))."""
    arr = _as_arrays(scsi, arrays)
    t, m = arr.cross_products(np.asarray(w, dtype=complex))
    signal, interf, _ = arr.quad_terms(t, m)
    per_user = np.log2(1.0 + signal / (interf + arr.sigma2))
    return RateReport(per_user_rate=per_user, sum_rate=float(arr.beta @ per_user),
                      kind="AP1")


def rate_ap2(w: np.ndarray, scsi: ScenarioScsi,
             arrays: _ScenarioArrays | None = None) -> RateReport:
    """Mean-channel rates: only |E{h}^T w|^2 counts as signal, the covariance
    excess joins the denominator."""
    arr = _as_arrays(scsi, arrays)
    t, m = arr.cross_products(np.asarray(w, dtype=complex))
    signal, interf, _ = arr.quad_terms(t, m)
    k_idx = np.arange(arr.K)
    mean_sig = np.abs(m[k_idx, k_idx]) ** 2
    per_user = np.log2(1.0 + mean_sig / (interf + signal - mean_sig + arr.sigma2))
    return RateReport(per_user_rate=per_user, sum_rate=float(arr.beta @ per_user),
                      kind="AP2")


def rate_mc(w: np.ndarray, scsi: ScenarioScsi, n_trials: int, rng_seed: int,
            arrays: _ScenarioArrays | None = None,
            chunk: int = 512) -> RateReport:
    """Monte Carlo expected rates under sampled channel realizations.

    Every link's channel is its sampled scalar coefficient times the steering
    vector, so the per-trial SINR needs only the deterministic steering
    cross-products and fresh scalar draws:

        SINR_k = |sum_s g_{k,s} t_{k,k,s}|^2
                 / (sum_{i != k} sum_s |g_{k,s}|^2 |t_{k,i,s}|^2 + noise)

    with interference power added per satellite (incoherent).  Deterministic
    under the seed; trials accumulate in fixed order.  Draws are assigned to
    users in a canonical signature order, so permuting users (together with
    their precoder rows) permutes the per-user rates exactly under the same
    seed.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    w = np.asarray(w, dtype=complex)
    arr = _as_arrays(scsi, arrays)
    K = arr.K
    t, _ = arr.cross_products(w)
    t_own = t[np.arange(K), np.arange(K), :]                  # (K, S)
    t_abs2 = np.abs(t) ** 2                                   # (K, K, S)

    gamma = scsi.stat_grid("gamma")
    kappa = scsi.stat_grid("kappa")
    pvar = scsi.stat_grid("phase_var")
    order = _canonical_user_order(scsi, w)
    inverse = np.empty(K, dtype=int)
    inverse[order] = np.arange(K)
    gamma, kappa, pvar = gamma[order], kappa[order], pvar[order]
    rng = np.random.default_rng(rng_seed)

    sum_user = np.zeros(K)
    sum_weighted = 0.0
    sum_weighted_sq = 0.0
    done = 0
    while done < n_trials:
        n = min(chunk, n_trials - done)
        g = sample_link_coefficients(rng, gamma, kappa, pvar, n_trials=n)
        g = g[:, inverse, :]                                  # back to user order
        signal = np.abs(np.einsum("tks,ks->tk", g, t_own)) ** 2
        power = np.abs(g) ** 2
        cross = np.einsum("tks,kis->tki", power, t_abs2)
        interf = cross.sum(axis=2) - cross[:, np.arange(K), np.arange(K)]
        rates = np.log2(1.0 + signal / (interf + arr.sigma2))
        sum_user += rates.sum(axis=0)
        weighted = rates @ arr.beta
        sum_weighted += float(weighted.sum())
        sum_weighted_sq += float((weighted ** 2).sum())
        done += n

    per_user = sum_user / n_trials
    mean = sum_weighted / n_trials
    if n_trials > 1:
        var = (sum_weighted_sq - n_trials * mean ** 2) / (n_trials - 1)
        stderr = float(np.sqrt(max(var, 0.0) / n_trials))
    else:
        stderr = float("nan")
    return RateReport(per_user_rate=per_user, sum_rate=mean, kind="MC",
                      mc_stderr=stderr)
