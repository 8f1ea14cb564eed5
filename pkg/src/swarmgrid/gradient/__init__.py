from swarmgrid.gradient.descent import (
    AlternatingVariablesDescent,
    ArmijoSteepestDescent,
    AVDObserver,
    ConjugateGradient,
    Discrete,
    Interval,
    asd_run,
    avd_run,
    cg_run,
    conjugate_gradient,
    fr_beta,
    golden_section,
    pr_beta,
    steepest_descent,
)
from swarmgrid.gradient.linesearch import LineSearchParams, armijo_step, bracket_section_search
from swarmgrid.gradient.numgrad import numerical_gradient

__all__ = [
    "AVDObserver",
    "AlternatingVariablesDescent",
    "ArmijoSteepestDescent",
    "ConjugateGradient",
    "Discrete",
    "Interval",
    "LineSearchParams",
    "armijo_step",
    "asd_run",
    "avd_run",
    "bracket_section_search",
    "cg_run",
    "conjugate_gradient",
    "fr_beta",
    "golden_section",
    "numerical_gradient",
    "pr_beta",
    "steepest_descent",
]
