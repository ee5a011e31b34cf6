"""mobinfer: plausible node mobility inferred from wireless contact traces.

A contact trace records when pairs of nodes were within transmission
range of each other; this package generates synthetic ground truth
(random waypoint on a torus), extracts contact traces from mobility,
infers mobility back from contacts with an online force-based layout,
and scores the result.
"""

from .engine import EngineState, InferenceConfig, infer, step
from .extract import (
    Mode,
    SamplingConfig,
    extract_asynchronous,
    extract_contacts,
    extract_synchronous,
    randomize_trace,
    snapshot_contacts,
)
from .forces import (
    ForceParams,
    attractive_force,
    boundary_force,
    calibrate_repulsion,
    drag_force,
    repulsive_force,
)
from .metrics import (
    AccuracySeries,
    ConstraintReport,
    ContactDiffSeries,
    IctDistribution,
    check_constraints,
    contact_diff,
    evaluate_accuracy,
    ict_distribution,
    ks_statistic,
    mean_distance_error,
    pairwise_correlation,
)
from .model import (
    ContactEvent,
    ContactTrace,
    Corridor,
    MobilityTrace,
    Plane,
    Space,
    Torus,
    TraceError,
    distance,
)
from .rwp import ConfigError, RwpConfig, rwp_generate, rwp_initial_state
from .timeline import LinkState, LinkTimeline, build_link_timeline, link_queries
from .traceio import (
    parse_contact_trace,
    parse_mobility_trace,
    read_contact_trace,
    read_mobility_trace,
    save_contact_trace,
    save_mobility_trace,
)

__version__ = "0.1.0"
