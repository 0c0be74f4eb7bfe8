"""Layered networked SIWS epidemic model.

Simulation of the coupled population/infrastructure dynamics, spectral
threshold analysis, endemic-equilibrium computation via a monotone
fixed-point map, and local weak observability of the infrastructure
contamination from population measurements.
"""

from .dynamics import (SimulationControls, TaylorJet, Trajectory, simulate,
                       taylor_jet, trajectory_to_csv, vector_field)
from .equilibria import (ComparisonReport, EquilibriumKind, EquilibriumResult,
                         HealthyStateReport, HealthyVerdict, JacobianReport,
                         SisResult, StabilityVerdict, classify_healthy_state,
                         compare_endemic, endemic_equilibrium, jacobian,
                         sis_endemic, t_map)
from .model import (CouplingLayer, InfrastructureLayer, LayeredModel,
                    PopulationLayer, Regime, State, model_from_dict,
                    model_to_dict, project_to_domain, validate_model)
from .observability import (FConditionReport, MeasurementMap,
                            ObservabilityReport, SensorPlacementReport,
                            UncheckedModel, build_O, closed_form_blocks,
                            f_condition, observability_report, rank_test,
                            sensor_placement_check)
from .scenario import (Scenario, generate_random_scenario, load_scenario,
                       run_scenario, scenario_from_dict)
from .spectral import (CRITICAL_BAND, LyapunovCertificate, SpectralReport,
                       ThresholdClass, diagonal_lyapunov, is_irreducible,
                       perron_pair, reproduction_number, spectral_radius,
                       stability_margin)

__version__ = "0.1.0"
