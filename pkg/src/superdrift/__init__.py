"""Finite-volume solver and estimate checks for drift-diffusion problems
whose drift grows faster than linearly in the unknown.

The layout mirrors the workflow: build a problem (`model`), march it
(`solver`), grade the result against the a-priori estimates (`estimates`),
compare ordered runs (`comparison`), and probe the frozen-drift fixed point
(`fixedpoint`). `cli` ties the pieces to files on disk.
"""

from .comparison import PairedRunReport, contraction_gap, paired_run
from .estimates import (
    REGIME_ORDER,
    ConstantsConfig,
    DecayFit,
    DiagnosticsReport,
    ExponentTable,
    OdeSolution,
    RegimeCondition,
    RegimeReport,
    SmallnessResult,
    blowup_time,
    boundary_activation_time,
    classify_regime,
    default_fit_window,
    estimate_gn_constant,
    exponent_table,
    fit_decay_exponent,
    fit_norm_decay,
    gn_ratio,
    ode_bound,
    ode_integrate,
    random_band_limited,
    run_diagnostics,
    slicing_plan,
    smallness_check,
)
from .fields import (
    Field,
    Grid,
    SpaceTimeSeries,
    boundary_mask,
    integrate_power,
    linf_norm,
    lp_norm,
    make_grid,
    marcinkiewicz_norm,
    read_field_csv,
    read_field_raw,
    space_time_lp,
    superlevel_measure,
    truncation_pair,
    write_field_csv,
    write_field_raw,
)
from .fixedpoint import (
    BallParams,
    PicardReport,
    apply_F,
    ball_check,
    ball_params,
    picard_iterate,
)
from .model import (
    PRESETS,
    ClosedFormDrift,
    ClosedFormSource,
    CoefficientSet,
    Drift,
    Nonlinearity,
    ProblemSpec,
    Source,
    TabulatedDrift,
    TabulatedSource,
    build_problem,
    constant_drift,
    constant_source,
    kq_nonlinearity,
    load_problem_config,
    make_problem,
    power_nonlinearity,
    radial_drift,
)
from .solver import (
    STATUS_BLOWUP,
    STATUS_COMPLETED,
    STATUS_FAILURE,
    DiffusionOperator,
    NormSeries,
    SolverConfig,
    StepReport,
    TestFunction,
    Trajectory,
    assemble_diffusion,
    cfl_dt,
    drift_divergence,
    gradient_energy,
    run,
    step,
    weak_residual,
)

__version__ = "0.1.0"
