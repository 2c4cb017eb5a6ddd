"""Exact simulation and sample-path gradient control of two tandem fluid
queues gated by fixed-cycle traffic lights."""

__version__ = "0.1.0"

from .ipa import JacobianEstimate, run_window
from .regulator import (
    CENTRALIZED,
    DECENTRALIZED,
    CycleRecord,
    GuardConfig,
    make_traffic_plant,
    run_closed_loop,
)
from .scenario import (
    ConfigError,
    ExperimentConfig,
    OnOffSpec,
    default_paper_config,
    gen_onoff,
    load_config,
    parse_config,
    run_replication,
)
from .simcore import (
    PhasePlan,
    PiecewiseConstantRate,
    ServiceProfile,
    TandemTrajectory,
    constant_rate,
    queue_integral,
    simulate,
)

__all__ = [
    "CENTRALIZED",
    "DECENTRALIZED",
    "ConfigError",
    "CycleRecord",
    "ExperimentConfig",
    "GuardConfig",
    "JacobianEstimate",
    "OnOffSpec",
    "PhasePlan",
    "PiecewiseConstantRate",
    "ServiceProfile",
    "TandemTrajectory",
    "constant_rate",
    "default_paper_config",
    "gen_onoff",
    "load_config",
    "make_traffic_plant",
    "parse_config",
    "queue_integral",
    "run_closed_loop",
    "run_replication",
    "run_window",
    "simulate",
    "__version__",
]
