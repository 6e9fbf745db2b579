"""tracerflow: spectral Monte-Carlo passive tracer transport and ergodicity diagnostics."""

__version__ = "0.1.0"

from .spectrum import (ModeSpec, SpectrumModel, SpectrumError,
                       build_power_law_spectrum, spectrum_from_tables,
                       gamma_star, check_h1, check_h2, h2_tail_bound)
from .field import (FourierField, OUState, NumericalFailure, SymmetryViolation,
                    zero_field, sobolev_norm, apply_semigroup, evaluate,
                    origin_value, sample_stationary, ou_exact_step,
                    covariance_oracle, origin_drift, noiseless_flow_step,
                    observation_step, tangent_step, check_conjugate_symmetry)
from .tracer import (TracerState, TrajectoryRecord, shift_field, advect_step,
                     run_lagrangian, stokes_drift_estimate,
                     displacement_identity_gap)
from .ergodic import (ObservableSpec, ErgodicReport, time_average,
                      occupation_fraction, summarize_run, moment_scan,
                      stability_probe, e_property_probe, lln_test,
                      stationary_norm_moment)
from .chain import (contraction_map, kernel_step, climb_probability,
                    ladder_weights, ladder_survival_limit, exact_distribution,
                    kernel_power_exact, kernel_power_profile,
                    kernel_power_closed_form, poissonized_semigroup,
                    chain_probes, ChainDistribution, simulate_paths)
from .config import (ExperimentConfig, ConfigError, parse_config,
                     serialize_config, config_hash, RunManifest)
from ._ensemble import run_trajectory_ensemble, ensemble_seeds

__all__ = [name for name in dir() if not name.startswith("_")]
