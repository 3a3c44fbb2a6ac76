"""Fast secure state estimation under sparse sensor attacks.

Sensors are grouped offline into types whose observation operators are
related by nonsingular transforms. Online, each type's transformed
measurements are compared; disagreement localizes attacks and prunes the
set of candidate attacked-sensor subsets before a residual search.
"""

from .agreement import MEAN, MEDIAN, AgreementReport, classify, transform_windows
from .attack_sim import (
    BOTH,
    EXHAUSTIVE,
    FSSE,
    AttackScenario,
    LinearController,
    Pipeline,
    run_scenario,
    summarize,
)
from .categorization import Partition, SensorType, check_equivalence, de_partition, ep_solve
from .estimator import (
    BoundConstants,
    CandidateSet,
    Estimate,
    ExhaustionError,
    ObservabilityError,
    build_full_sigma,
    compute_bound_constants,
    ex_search,
    fsse,
    prune_sigma,
)
from .system_model import (
    MeasurementWindow,
    NoiseBounds,
    ObservationStack,
    SystemModel,
    build_observation_stack,
    compute_noise_bounds,
    stack_window,
)

__version__ = "0.1.0"
