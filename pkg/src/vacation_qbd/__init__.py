"""Matrix-analytic solver for the m-phase working-vacation (server fatigue) queue."""
from .errors import (
    IllConditioned,
    ModelError,
    NegativeMass,
    NoCrossover,
    NonConvergence,
    RankDeficiency,
    SingularA1,
    Unstable,
)
from .model import (
    BlockSet,
    VacationModel,
    build_blocks,
    build_truncated_generator,
    transient_states,
)
from .qbd import (
    RateMatrixSolution,
    StationarySolution,
    expected_customers_exact,
    expected_customers_paper,
    solve,
    solve_boundary,
    solve_rate_matrix,
)
from .stability import (
    StabilityProfile,
    Theorem2Report,
    stability_polynomial_5ph,
    stability_profile,
    theorem2_gap,
    theorem2_report,
)

__all__ = [
    "BlockSet", "IllConditioned", "ModelError", "NegativeMass", "NoCrossover", "NonConvergence",
    "RankDeficiency", "RateMatrixSolution", "SingularA1", "StabilityProfile", "StationarySolution",
    "Theorem2Report", "Unstable", "VacationModel", "build_blocks", "build_truncated_generator",
    "expected_customers_exact", "expected_customers_paper", "solve", "solve_boundary",
    "solve_rate_matrix", "stability_polynomial_5ph", "stability_profile", "theorem2_gap",
    "theorem2_report", "transient_states",
]
