"""Transition-system abstraction of feed-forward neural dynamics.

Pipeline: train or load a network, sample traces, partition the working zone
by maximum-entropy bisection, compute transitions by interval reachability,
prune unsupported self-loops, certify transitions under a model error bound,
and check CTL properties on the resulting finite system.
"""

from .network import (
    Activation,
    ElmTrainConfig,
    ElmTrainResult,
    FeedForwardNetwork,
    IllPosedRegressionError,
    Layer,
    NetworkFormatError,
    load_network,
    save_network,
    train_elm,
)
from .reach import (
    HyperRectangle,
    ReachTube,
    contains,
    inflate,
    intersects,
    interval_evaluate,
    no_input,
    reach_tube,
)
from .traces import (
    SegmentSet,
    Trace,
    TraceFormatError,
    TraceSet,
    UniformInputPolicy,
    load_traces_csv,
    max_dwell,
    save_traces_csv,
    segment,
    simulate,
)
from .partition import (
    CannotPartitionError,
    MePartitionConfig,
    PartitionSet,
    UndefinedEntropyError,
    bisection_gain,
    load_partitions,
    me_partition,
    save_partitions,
    shannon_entropy,
)
from .transition import (
    SelfLoopConfig,
    TransitionSystem,
    build_abstraction,
    compute_transitions,
    export_dot,
    guaranteed_transitions,
    load_transition_system,
    reduce_self_loops,
    save_transition_system,
)
from .ctl import (
    CheckReport,
    CheckResult,
    CtlSyntaxError,
    KripkeView,
    UnknownAtomError,
    check,
    check_suite,
    format_formula,
    load_formulas,
    parse_ctl,
)

__version__ = "0.1.0"
