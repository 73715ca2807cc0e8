"""Time-consistent sublinear expectations on finite path lattices."""
__version__ = "0.1.0"

from .ambiguity import (
    CheckReport,
    ExplicitFamily,
    RectangularFamily,
    SizeLimit,
    check_conditional_closure,
    check_invariance,
    check_pasting,
    enumerate_measures,
    measurability_note,
)
from .engine import (
    PrecedenceViolation,
    epsilon_optimal_selector,
    oracle_values,
    sublinear_expectation_dpp,
    sublinear_expectation_oracle,
    verify_esssup_representation,
    verify_optional_sampling,
    verify_tower,
)
from .gexp import (
    DProcess,
    VolSpec,
    build_vol_lattice,
    check_d_adaptedness,
    example_51_scenario,
    example_52_scenario,
    g_expectation,
    g_function,
)
from .measure import (
    TreeMeasure,
    conditional_expectation,
    expectation,
    is_martingale_measure,
    paste,
    rcpd_shift,
    realized_qv,
    windowed_density,
)
from .pathspace import (
    Lattice,
    RandomVariable,
    StoppingRule,
    concat,
    is_F_tau_measurable,
    is_stopping_rule,
    shift_path,
    shift_rv,
)
from .payoff import compile_payoff, evaluate, parse, to_source
