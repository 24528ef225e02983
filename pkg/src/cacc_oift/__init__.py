"""Optimal information flow topology for CACC platoons under V2V sender failures."""
from .contention import (DEFAULT_COEFFICIENTS, ContentionCoefficients, SenderSuccessProfile,
                         TrafficConditions, active_neighbors, saturated_success, scenario_probability,
                         success_profile, unsaturated_success)
from .energy import (EnergyEvaluator, TrajectorySpectrum, expected_energy, leader_energy,
                     scenario_energy, spectrum_from_trajectory)
from .errors import (CaccError, CollisionError, DomainError, IntegrityError, NumericalError,
                     ValidationError)
from .freq import (ControllerParams, StabilityReport, cutoff_frequency, mode_coefficients,
                   noise_attenuation, platoon_transfer, single_link_response, stability_region_check)
from .ift import (ACC, CACC1, CACC2, CACC3, DegenerationScenario, Ift, ReceiverStatusVector,
                  candidate_ifts, enumerate_degenerations, receiver_status)
from .optimizer import (EnergyTable, OptimizationResult, brute_force_optimize, build_energy_table,
                        optimize)
from .sim import RunMetrics, SimConfig, VehicleState, control_command, run, sample_link_outcomes
from .trajectory import TrajectoryRecord, load_trajectory, stop_and_go

__version__ = "0.1.0"
