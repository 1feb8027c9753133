"""Linear n-th order SDEs on [0, 1] with lateral boundary conditions.

Exact Gaussian laws through Green functions, conditional-independence
checks, Monte Carlo sampling and boundary-operator classification.
"""

from .boundary import (
    basic_form,
    classification_invariance,
    enlarged_condition_set,
    markov_split_ok,
    pivot,
    preserves,
    regularity,
    splitting_determinant,
    splitting_maps,
)
from .errors import NotWellPosed, NumericalError, ProblemError, SdeBvpError
from .green import green_matrix, influence_column, influence_table
from .law import ci_test, conditional_cross_covariance, covariance_kernel, joint_law, mean_function, support_rank
from .ode import check_wellposed, flow, fundamental_matrix, j_matrix
from .problem import (
    BoundaryOperator,
    Coefficient,
    CoefficientSet,
    Problem,
    ProblemSpec,
    companion_matrix,
    make_problem,
    validate_problem,
)
from .problemfile import dump_problem, load_problem, parse_problem
from .sampler import mc_covariance, perturbation_experiment, sample_solution, sample_wiener

__version__ = "0.1.0"
