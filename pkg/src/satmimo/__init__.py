"""satmimo: distributed multi-satellite MIMO precoding with statistical CSI.

Subpackages by concern: constellation/link geometry, the statistical channel
model, OFDM precompensation kernels, the thin covariance factorization, the
alternating precoder solvers, rate evaluation, the closed-form precoding map
with its equivariance/loss utilities, and the sweep-experiment harness.
"""
from .channel import (ArrayGeometry, ChannelRealization, LinkBudgetConfig,
                      LinkStat, ScenarioScsi, covariance_block,
                      free_space_path_loss_db, link_budget_scsi, mean_channel,
                      mean_phase_factor, noise_power_w, rho, sample_realization,
                      steering_vector)
from .factorization import (CovarianceFactors, build_factors,
                            cholesky_reference, quad_form)
from .geometry import (ConstellationConfig, LinkGeometry, SatelliteState,
                       ServiceRegion, build_constellation,
                       independence_probability, latlon_to_ecef, link_geometry,
                       sample_region, select_satellites)
from .mapping import (MappingInputs, MappingLabels, cfp, check_equivariance,
                      combined_label_loss, export_dataset, read_dataset,
                      si_nmse, vcossim)
from .ofdm import (CompensationError, OfdmParams, classify_delay_case,
                   freq_domain_model, ici_kernel, phase_error_phi,
                   simulate_single_link)
from .rates import RateReport, rate_ap1, rate_ap2, rate_mc
from .solvers import (AuxVars, ConvergenceTrace, PrecoderSolution, SolverConfig,
                      XiOperator, build_xi, closed_form_precoder, init_precoder,
                      mse_cdwmmse, project_per_satellite, solve_baselines,
                      solve_ms_jocdwm, solve_ms_jowm, update_receiver)

__version__ = "0.1.0"
