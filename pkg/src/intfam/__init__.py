"""Integer exponential family models on trees, trained collaboratively.

The package covers the full pipeline: tree structure learning from data,
exact integer inference and learning, communication protocols with byte
accounting, a prequential multi-learner simulator, energy estimates, and a
command-line front-end. Everything on the integer path uses exact unbounded
arithmetic; probabilities are integer quotients and model updates are k-bit
clamped unit steps, so the whole learning loop is expressible with integer
and bit operations.
"""

from .graph import ROLE_FEATURE, ROLE_LABEL, StructureGraph, VariableSpec, chow_liu, mutual_information
from .inference import Marginals, brute_force, map_assignment, max_sum, sum_product, sum_product_float
from .learning import (
    FloatLearnerState,
    LearnerState,
    accumulate,
    fit,
    float_fit,
    float_loss,
    float_predict,
    gradient_sign,
    int_prox_step,
    predict,
)
from .intmodel import (
    DataSummary,
    IntParams,
    Rational,
    SufficientStatistic,
    density,
    model_dimension,
    neg_avg_log_likelihood,
    partition,
    phi,
    score,
)
from .simulator import (
    ExperimentConfig,
    RoundRecord,
    RunResult,
    build_discretizer,
    derive_seed,
    partition_horizontal,
    run,
    split_holdout,
    synth_tree_data,
)
from .sync import (
    CommLedger,
    CoordinatorState,
    ProtocolViolation,
    SyncConfig,
    SyncOutcome,
    account,
    floored_mean,
    local_condition,
    merge_summaries,
    pair_average_bittrick,
    periodic_sync,
    resolve_violation,
)
from .energy import EnergyParams, central_energy, parallel_energy, scaling_curves

__version__ = "0.1.0"
