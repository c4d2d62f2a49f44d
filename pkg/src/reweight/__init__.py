"""Dynamic loss-based sample reweighting for gradient-based optimization."""

from .core import (
    ConfigError,
    ReweightConfig,
    Strategy,
    TemperatureSchedule,
    ValidationError,
    apply_strategy,
    capped_optimal_weights,
    compute_batch_weights,
    dro_kl_weights,
    normalize_losses,
    schedule_r,
    temper_weights,
)
from .diagnostics import StepDiagnostics, delta_t, grad_gap_term, mu_t, theorem1_bound
from .optim import (
    DivergenceError,
    OptimizerState,
    StepSizeRule,
    Trajectory,
    gd_step,
    momentum_step,
    run_training,
    theory_stepsize,
)
from .problems import (
    NonconvexProblem,
    QuadraticProblem,
    QuadraticSuite,
    RegressionDataset,
    RegressionProblem,
    gen_quadratic_suite,
    gen_regression,
    nonconvex_loss_grad,
    regression_loss_grad,
)

__version__ = "0.1.0"
