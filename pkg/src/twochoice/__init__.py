"""Online bipartite matching with two-choice fractional algorithms and exact online rounding."""

__version__ = "0.1.0"

from .fractional import (  # noqa: E402
    DualFitConfig,
    FractionalTrace,
    alpha_g,
    check_maximal,
    check_sound,
    dampen,
    dual_fit_certificate,
    hardness_ratio,
    run_fractional,
)
from .instance import Instance, Matching, gen_adversarial_waterlevel, gen_random_instance  # noqa: E402
from .probprogram import ProbProgramInput, solve  # noqa: E402
from .rounding import exact_marginals, round_general, round_maximal  # noqa: E402

__all__ = [
    "__version__",
    "DualFitConfig",
    "FractionalTrace",
    "Instance",
    "Matching",
    "ProbProgramInput",
    "alpha_g",
    "check_maximal",
    "check_sound",
    "dampen",
    "dual_fit_certificate",
    "exact_marginals",
    "gen_adversarial_waterlevel",
    "gen_random_instance",
    "hardness_ratio",
    "round_general",
    "round_maximal",
    "run_fractional",
    "solve",
]
