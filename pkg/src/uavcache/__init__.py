"""Cache-enabled UAV content-provision simulator and optimization library."""

from .config import (ALGORITHMS, ExperimentConfig, LyapunovParams, PaoiParams,
                     QoeParams, RadioParams, load_config_file, make_config)
from .channel import (LinkGain, achievable_rates, los_coverage_radius,
                      los_gain, los_probability, path_loss_db)
from .qoe import (edge_latency, max_spectral_efficiency, mos, power_for_rate,
                  required_rate)
from .lyapunov import (FleetState, VirtualQueues, aut_solve, cpt_place,
                       drift_penalty_upper_bound, stability_metrics,
                       update_queues)
from .solver import (ConvexProgram, InfeasibleStartError, SolveReport,
                     check_gradient, solve_assignment, solve_convex)
from .dpt2 import (ScaLocalPoint, SlotDecision, algorithm1,
                   build_power_program, build_trajectory_program,
                   delivery_costs, dpt2_objective)
from .paoi import (MassDeficitError, accumulated_intensity, exact_pmf,
                   expected_edge_arrival, expected_paoi, queue_step,
                   simulate_queue)
from .harness import (RunTrace, Users, metrics, run, run_benchmark,
                      run_experiment, run_f2e2cp, user_mobility_step)

__version__ = "0.1.0"
