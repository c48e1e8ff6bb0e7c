"""Co-design of LQR gains and routing redundancy over lossy, delayed paths."""

from .dynamic_solver import (BudgetExceeded, PartitionPolicy, PolicyDecision, QuadConstraint,
                             Region, backward_step, evaluate_policy, last_step_partition,
                             optimal_initial_set, solve_dynamic)
from .model import (CostWeights, NetworkSpec, PlantModel, RoutePath, SwitchedSystem,
                    build_augmented, expected_matrices, mode_distribution,
                    plant_identity_weights)
from .simulator import (EnumerationCapExceeded, SimConfig, SimReport, exhaustive_expected_cost,
                        simulate_dynamic, simulate_static)
from .static_solver import (GainSchedule, NumericalError, RoutingSchedule, expected_cost,
                            solve_static)

__version__ = "0.1.0"
