"""Safe and cost-optimized valve control for storm-water detention ponds.

Simulate a pond + catchment under uncertain rain, synthesize a maximally
permissive overflow-safe mode filter, refine it with shielded Q-learning,
and evaluate strategies by seeded Monte Carlo.
"""

from .config import ExperimentConfig, build_model, default_config, load_config
from .control import (RandomAllowedPolicy, ShieldedPolicy, StaticStrategy,
                      ValveTable, decide, default_valve_table, load_strategy,
                      save_strategy)
from .env import Model, PondParams, TankParams, pond_model, tank_model
from .errors import (ConfigError, DetpondError, InfeasibleError, ModelError,
                     OutOfGrid, StrategyGap)
from .hmdp import (Configuration, ContinuousState, EnvMode, Trajectory,
                   integrate_step, run_trace, simulate)
from .kernels import USING_NUMBA
from .learning import EvalResult, LearnParams, QTable, evaluate, q_learn
from .rain import (RainInterval, RainProgram, RainTrace, interval_windows,
                   load_program, sample_trace, save_program,
                   worst_case_envelope)
from .synthesis import (DecisionGrid, FeasibilityReport, PermissiveStrategy,
                        PhaseTable, check_feasible, default_grid,
                        period_upper_bound, synthesize_safe)

__version__ = "0.1.0"
