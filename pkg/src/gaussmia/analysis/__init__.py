from gaussmia.analysis.bounds import (
    BoundReport,
    condition_gaussian,
    d_star,
    gaussian_kl,
    informed_tv_bound,
    known_cov_bounds,
    known_cov_kl_upper,
)
from gaussmia.analysis.evaluation import EvalReport, evaluate_attack, evaluate_attacks, wilson_interval

__all__ = [
    "BoundReport",
    "EvalReport",
    "condition_gaussian",
    "d_star",
    "evaluate_attack",
    "evaluate_attacks",
    "gaussian_kl",
    "informed_tv_bound",
    "known_cov_bounds",
    "known_cov_kl_upper",
    "wilson_interval",
]
