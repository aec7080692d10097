"""Gain and time-headway synthesis for CACC platoons with noisy V2V acceleration."""
from .channel import (ChannelSpec, EXAMPLE_GAMMAS, effective_gain, expected_noise_factor, sample_noise_factor,
                      snr_db_to_rho)
from .core import (GainSet, PlatoonConfig, Trajectory, VehicleState, amplification_ratios, platoon_length,
                   spacing_errors)
from .simulator import (LeadProfile, build_averaged_system, communicated_signal_trace, lead_acceleration,
                        monte_carlo_mean, simulate)
from .stability import build_tf, hinf_norm, magnitude, quartic_conditions, robust_verdict
from .synthesis import (feasible_region, gamma_bounds, headway_lower_bound, internal_stability, ka_upper_bound,
                        optimal_ka_headway, suggest_gains, synthesize)

__version__ = "0.1.0"
