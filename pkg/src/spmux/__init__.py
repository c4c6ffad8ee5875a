"""Pulse-level simulation of spatially multiplexed heralded single-photon
sources: exact photon-number bookkeeping per pump pulse, a seeded Monte
Carlo engine with a compiled fast path, closed-form cross-checks, and
estimators for heralded rates, CAR, and g2 correlations."""

from ._kernels import available_backends, get_backend
from .analytic_model import (
    AnalyticParams,
    ClickProbs,
    FitResult,
    MuxProbs,
    ScalingParams,
    ScalingResult,
    analytic_car,
    analytic_click_probs,
    analytic_mux_rate,
    enhancement_factor,
    fit_switch_transmission,
    fixed_car_enhancement,
    mux_car,
    scaling_with_n,
)
from .components import (
    ChannelSpec,
    DetectorSpec,
    RoutingPolicy,
    SwitchSpec,
    click_probability,
    click_sample,
    route_select,
    switch_path_transmissions,
    uniform_switch_tree,
)
from .errors import (
    ConfigurationError,
    FitError,
    InvalidParameterError,
    NoSolutionError,
    ScenarioError,
    SpmuxError,
    UndefinedEstimateError,
)
from .estimators import (
    Estimate,
    estimate_car,
    estimate_g2,
    estimate_heralded_rate,
)
from .mux_engine import (
    BLOCK_PULSES,
    OFFSETS,
    PulseOutcome,
    SystemConfig,
    TallyCounters,
    block_generator,
    merge_tallies,
    run_experiment,
    simulate_pulse,
)
from .photon_stats import (
    PairNumberDistribution,
    Pmf,
    pmf_eval,
    sample_pair_count,
    thin_count,
    thin_distribution,
)
from .scenario import (
    CSV_COLUMNS,
    CurvePoint,
    Scenario,
    SweepSpec,
    apply_sweep_value,
    load_scenario,
)

__version__ = "0.1.0"
