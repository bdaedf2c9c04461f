"""Detection-efficiency thresholds of parallel-repeated routed Bell tests."""

__version__ = "0.1.0"

from .inequalities import (
    CHSH_GRAM_OFFDIAG,
    TSIRELSON_WIN,
    PenalizedScore,
    bb84_n_score,
    chsh_n_score,
    critical_efficiency_closed_form,
    penalized_score,
)
from .certifier import (
    CertificationReport,
    ClickPattern,
    beta_prime_threshold,
    build_jm_attack,
    c_operator,
    exhaustive_scan,
    gram_bound_scan,
    simulate_jm_model,
)
from .npa import (
    MomentProblem,
    OperatorSymbol,
    bisection_plan,
    build_problem,
    parse_level,
    parse_sdpa,
    write_sdpa,
)
from .operators import (
    Operator,
    PureState,
    elementwise_dominance_norm_check,
    gram_norm_bound,
    max_eigenvalue,
    operator_norm,
    partial_trace,
    pauli,
    tensor,
)
from .robustness import RobustnessInput, delta_bound, robust_eta_star, robust_gram_bound
from .strategies import (
    MeasurementAssembly,
    RoutedCorrelation,
    RoutedStrategy,
    build_strategy,
    conditional_states,
    correlation,
    ideal_chsh_measurements,
)
