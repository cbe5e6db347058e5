"""Gradient-coded distributed SGD with biased compression and error feedback.

A deterministic desk-scale simulator: redundant data allocation, per-device
gradient encoding, biased/unbiased compression, Bernoulli stragglers,
server aggregation, and the closed-form convergence constants that bound
the resulting trajectories.
"""

from .allocation import (
    AllocationMatrix,
    BalanceStats,
    allocation_from_matrix,
    load_allocation,
    pairwise_balance_stats,
    save_allocation,
    uniform_random_allocation,
    vartheta,
)
from .compression import (
    CompressorSpec,
    amplified_rand_k_spec,
    compress,
    delta_of,
    grouped_sign_spec,
    identity_spec,
    measure_qa,
    sign_spec,
    stochastic_sign_spec,
    top_k_spec,
    variance_factor,
)
from .config import ExperimentConfig, load_config, make_config, parse_config_text
from .errors import ConfigurationError, InvariantViolation
from .presets import PRESET_NAMES, preset_configs, run_figure_preset
from .protocol import (
    DeviceState,
    MethodSpec,
    StragglerDraw,
    device_step_cocoef,
    device_step_unbiased,
    device_step_unbiased_diff,
    encode_local,
    reference_gain,
    sample_stragglers,
    server_aggregate,
    server_update,
    virtual_iterate,
)
from .runner import (
    RunMetrics,
    TrialTrace,
    emit_csv,
    parse_csv,
    run_experiment,
    run_trial,
    trial_components,
)
from .tasks import (
    LinearRegressionTask,
    full_gradient,
    generate_synthetic,
    load_task,
    loss,
    save_task,
    subset_gradient,
)
from .theory import (
    BoundConstants,
    TheoryInputs,
    bound_constants,
    convergence_bound,
    epsilons,
    estimate_heterogeneity,
    estimate_smoothness,
    grad_sum_moment_bound,
    xi1,
    xi2,
)

__version__ = "0.1.0"
