"""Boundary-operator canonicalization and classification of interval pairs.

A boundary operator is an n x m matrix acting on ``(X(t_1), ..., X(t_m))``.
Its basic form relative to a full-rank n x n column minor B is
``(I, B^{-1} N)`` up to column order; row supports are read off that form.

For a pair ``a < b`` the rows are sorted into

* ``left``: support in ``[0, a[``
* ``inside``: support in ``]a, b[``
* ``right``: support in ``]b, 1]``
* ``mixed``: support in ``[0, a[ U ]b, 1]`` touching both sides
* ``straddling``: anything else (points on both sides of a or b, or on a or b)

The pair is preserved when no row is straddling. Intervals are taken
literally: a support point equal to ``a`` or ``b`` makes its row straddling,
and ``endpoint_in_support`` is raised so callers can tell.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EndpointInSupport, NotPreserved, SingularBasis, SingularPair
from .ode import coordinate_condition, fundamental_matrix, functional_condition, require_wellposed, subinterval_system
from .problem import NODE_TOL, RANK_RTOL, BoundaryOperator, Problem

EPS_SUPP = 1e-12
EPS_REG = 1e-8
EPS_SPLIT = 1e-8


@dataclass(frozen=True)
class BasicForm:
    """``lambda_tilde[:, basis[i]]`` is the i-th unit vector."""

    basis: tuple[int, ...]
    lambda_tilde: np.ndarray
    c_tilde: np.ndarray
    points: tuple[float, ...]

    @property
    def n(self) -> int:
        return self.lambda_tilde.shape[0]

    @property
    def support_indices(self) -> tuple[tuple[int, ...], ...]:
        out = []
        for row in self.lambda_tilde:
            scale = np.max(np.abs(row))
            out.append(tuple(int(j) for j in np.flatnonzero(np.abs(row) > EPS_SUPP * scale)))
        return tuple(out)

    @property
    def supports(self) -> tuple[tuple[float, ...], ...]:
        return tuple(tuple(self.points[j] for j in idx) for idx in self.support_indices)

    @property
    def support(self) -> tuple[float, ...]:
        """Union of the row supports."""
        return tuple(sorted({t for s in self.supports for t in s}))

    def as_operator(self) -> BoundaryOperator:
        return BoundaryOperator.from_arrays(self.points, self.lambda_tilde, self.c_tilde)


def _boundary_of(obj) -> BoundaryOperator:
    return obj.boundary if isinstance(obj, Problem) else obj


def _pivot_inplace(mat: np.ndarray, row: int, col: int) -> None:
    mat[row] /= mat[row, col]
    for i in range(mat.shape[0]):
        if i != row:
            mat[i] -= mat[i, col] * mat[row]
            mat[i, col] = 0.0
    mat[row, col] = 1.0


def basic_form(boundary, preferred_basis: Sequence[int] | None = None) -> BasicForm:
    """Basic expression ``(I, B^{-1} N)`` of the boundary operator.

    Without ``preferred_basis`` columns are scanned left to right and each is
    pivoted in on the free row with the largest entry (partial pivoting).
    """
    b = _boundary_of(boundary)
    alpha = b.matrix
    n, m = alpha.shape
    if preferred_basis is not None:
        basis = tuple(int(j) for j in preferred_basis)
        if len(basis) != n or len(set(basis)) != n or not all(0 <= j < m for j in basis):
            raise SingularBasis(f"basis must list {n} distinct column indices in 0..{m - 1}")
        minor = alpha[:, basis]
        sv = np.linalg.svd(minor, compute_uv=False)
        if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
            raise SingularBasis(f"columns {basis} do not form a full-rank minor")
        lt = np.linalg.solve(minor, alpha)
        lt[:, basis] = np.eye(n)
        ct = np.linalg.solve(minor, b.rhs)
        return BasicForm(basis, lt, ct, b.points)

    aug = np.column_stack([alpha, b.rhs])
    tol = 1e-12 * np.max(np.abs(alpha))
    free = list(range(n))
    basis = [-1] * n
    for col in range(m):
        if not free:
            break
        r = max(free, key=lambda i: abs(aug[i, col]))
        if abs(aug[r, col]) <= tol:
            continue
        _pivot_inplace(aug, r, col)
        basis[r] = col
        free.remove(r)
    if free:
        raise SingularBasis("boundary matrix is rank deficient")
    return BasicForm(tuple(basis), aug[:, :m], aug[:, m], b.points)


def pivot(basic: BasicForm, row: int, col: int) -> BasicForm:
    """One Gaussian pivot on entry ``(row, col)``: column ``col`` replaces ``basis[row]``."""
    if col in basic.basis:
        raise SingularBasis(f"column {col} is already basic")
    if abs(basic.lambda_tilde[row, col]) <= EPS_SUPP * np.max(np.abs(basic.lambda_tilde[row])):
        raise SingularBasis(f"zero pivot at ({row}, {col})")
    aug = np.column_stack([basic.lambda_tilde, basic.c_tilde])
    _pivot_inplace(aug, row, col)
    basis = list(basic.basis)
    basis[row] = col
    return BasicForm(tuple(basis), aug[:, :-1], aug[:, -1], basic.points)


@dataclass(frozen=True)
class RowClass:
    row: int
    preserving: bool
    side: str  # "inside", "outside" or "straddling"


@dataclass(frozen=True)
class PairClassification:
    a: float
    b: float
    per_row: tuple[RowClass, ...]
    left: tuple[int, ...]
    inside: tuple[int, ...]
    right: tuple[int, ...]
    mixed: tuple[int, ...]
    straddling: tuple[int, ...]
    endpoint_in_support: bool

    @property
    def preserves(self) -> bool:
        return not self.straddling

    @property
    def ell(self) -> int:
        return len(self.left)

    @property
    def q(self) -> int:
        return len(self.inside)

    @property
    def p(self) -> int:
        return len(self.right)

    @property
    def ordering(self) -> tuple[int, ...]:
        """Rows as left, inside, right, mixed (then straddling, if any)."""
        return self.left + self.inside + self.right + self.mixed + self.straddling


def preserves(basic: BasicForm, a: float, b: float) -> PairClassification:
    if not 0.0 <= a < b <= 1.0:
        raise ValueError(f"need 0 <= a < b <= 1, got a={a}, b={b}")
    groups = {"left": [], "inside": [], "right": [], "mixed": [], "straddling": []}
    per_row = []
    touched = False
    for i, supp in enumerate(basic.supports):
        s = np.array(supp)
        at_end = np.any(np.abs(s - a) <= NODE_TOL) or np.any(np.abs(s - b) <= NODE_TOL)
        touched |= bool(at_end)
        lo = s < a - NODE_TOL
        mid = (s > a + NODE_TOL) & (s < b - NODE_TOL)
        hi = s > b + NODE_TOL
        if at_end:
            key = "straddling"
        elif mid.all():
            key = "inside"
        elif lo.all():
            key = "left"
        elif hi.all():
            key = "right"
        elif (lo | hi).all():
            key = "mixed"
        else:
            key = "straddling"
        groups[key].append(i)
        side = {"inside": "inside", "straddling": "straddling"}.get(key, "outside")
        per_row.append(RowClass(i, key != "straddling", side))
    return PairClassification(
        float(a), float(b), tuple(per_row), *(tuple(groups[k]) for k in ("left", "inside", "right", "mixed", "straddling")), touched
    )


def random_bases(boundary, count: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Up to ``count`` distinct full-rank column subsets, in random order."""
    alpha = _boundary_of(boundary).matrix
    n, m = alpha.shape
    valid = []
    for cols in itertools.combinations(range(m), n):
        sv = np.linalg.svd(alpha[:, cols], compute_uv=False)
        if sv[0] > 0 and sv[-1] > RANK_RTOL * sv[0]:
            valid.append(cols)
    order = rng.permutation(len(valid))
    picked = [valid[i] for i in order[:count]]
    # random row order within each basis too
    return [tuple(rng.permutation(cols)) for cols in picked]


def classification_verdicts(boundary, a: float, b: float, trials: int, seed: int = 0) -> list[bool]:
    rng = np.random.default_rng(seed)
    return [preserves(basic_form(boundary, cols), a, b).preserves for cols in random_bases(boundary, trials, rng)]


def classification_invariance(boundary, a: float, b: float, trials: int, seed: int = 0) -> bool:
    """Whether every tested basic form gives the same preserving verdict."""
    return len(set(classification_verdicts(boundary, a, b, trials, seed))) <= 1


def hadamard_ratio(mat: np.ndarray) -> float:
    """``|det M| / prod ||row_i||``: a scale-free singularity measure in [0, 1]."""
    norms = np.linalg.norm(mat, axis=1)
    if mat.size == 0:
        return 1.0
    if np.any(norms == 0.0):
        return 0.0
    return float(abs(np.linalg.det(mat)) / np.prod(norms))


def _row_condition(basic: BasicForm, i: int, n: int, keep=None):
    idx = [j for j in basic.support_indices[i] if keep is None or keep(basic.points[j])]
    return functional_condition([basic.points[j] for j in idx], basic.lambda_tilde[i, idx], n)


def _systems(problem: Problem, basic: BasicForm, cls: PairClassification):
    """Condition lists for the homogeneous problems on [0,a], [a,b], [b,1]."""
    n, a, b = problem.n, cls.a, cls.b
    ell, q = cls.ell, cls.q
    first = [coordinate_condition(a, j, n) for j in range(1, n - ell + 1)]
    first += [_row_condition(basic, i, n) for i in cls.left]
    middle = [coordinate_condition(b, j, n) for j in range(1, n - ell - q + 1)]
    middle += [coordinate_condition(a, j, n) for j in range(n - ell + 1, n + 1)]
    middle += [_row_condition(basic, i, n) for i in cls.inside]
    last = [coordinate_condition(b, j, n) for j in range(n - ell - q + 1, n + 1)]
    last += [_row_condition(basic, i, n) for i in cls.right]
    # mixed rows lose their [0, a] terms: Y_n vanishes there in the homogeneous problem
    last += [_row_condition(basic, i, n, keep=lambda t: t > b) for i in cls.mixed]
    return first, middle, last


@dataclass(frozen=True)
class RegularityReport:
    dets: tuple[float, float, float]  # on [0,a], [a,b], [b,1]
    ratios: tuple[float, float, float]  # Hadamard-normalized
    verdicts: tuple[bool, bool, bool]

    @property
    def regular(self) -> bool:
        return all(self.verdicts)


def regularity(problem: Problem, basic: BasicForm, a: float, b: float, eps: float = EPS_REG) -> RegularityReport:
    """Unique solvability of the three homogeneous subinterval problems of a preserved pair."""
    problem = problem.with_nodes([a, b])
    require_wellposed(problem)
    cls = preserves(basic, a, b)
    if not cls.preserves:
        raise NotPreserved(f"pair ({a}, {b}) is not preserved; the subinterval systems are undefined")
    mats = [
        subinterval_system(problem, iv, conds)
        for iv, conds in zip([(0.0, a), (a, b), (b, 1.0)], _systems(problem, basic, cls))
    ]
    dets = tuple(float(np.linalg.det(mm)) for mm in mats)
    ratios = tuple(hadamard_ratio(mm) for mm in mats)
    return RegularityReport(dets, ratios, tuple(r > eps for r in ratios))


@dataclass(frozen=True)
class SplittingMaps:
    grad_g1: np.ndarray  # (n+q) x (n-q): Z2 -> Z1 through [a, b]
    grad_g2: np.ndarray  # (n-q) x (n+q): Z1 -> Z2 through [0, a] and [b, 1]
    det: float
    ratio: float  # Hadamard-normalized det of I - g1 g2


def splitting_maps(problem: Problem, basic: BasicForm, a: float, b: float) -> SplittingMaps:
    """Linear parts of the maps that recover each half of ``(Y(a), Y(b))`` from the other.

    ``Z1 = (Y_1..Y_{n-l}(a), Y_{n-l-q+1}..Y_n(b))`` and
    ``Z2 = (Y_1..Y_{n-l-q}(b), Y_{n-l+1}..Y_n(a))``. The first map solves the
    problem on [a, b] with Z2 prescribed; the second solves [0, a] with part
    of Z1 prescribed, feeds the resulting Y_n values into the mixed rows, and
    then solves [b, 1].
    """
    problem = problem.with_nodes([a, b])
    cls = preserves(basic, a, b)
    if not cls.preserves:
        raise NotPreserved(f"pair ({a}, {b}) is not preserved")
    reg = regularity(problem, basic, a, b)
    if not reg.regular:
        raise SingularPair(f"pair ({a}, {b}) is singular (ratios {reg.ratios})")
    n, ell, q = problem.n, cls.ell, cls.q
    first, middle, last = _systems(problem, basic, cls)
    m1 = subinterval_system(problem, (0.0, a), first)
    m2 = subinterval_system(problem, (a, b), middle)
    m3 = subinterval_system(problem, (b, 1.0), last)
    phi0 = fundamental_matrix(problem, 0.0).values
    ia, ib = problem.node_index(a), problem.node_index(b)
    # flow from each interval's left end: Phi^u(t) = Phi^0(t) Phi^0(u)^{-1}
    flow_ab = phi0[ib] @ np.linalg.inv(phi0[ia])

    # g1: rhs rows are (Y_j(b), j <= n-l-q), (Y_j(a), j > n-l), then q zeros
    e2 = np.vstack([np.eye(n - q), np.zeros((q, n - q))])
    y_a = np.linalg.solve(m2, e2)
    read_a = np.eye(n)[: n - ell]
    read_b = flow_ab[n - ell - q:]
    g1 = np.vstack([read_a @ y_a, read_b @ y_a])

    # g2: [0, a] from Z1[:n-l]; then [b, 1] from Z1[n-l:] and the mixed rows
    e1 = np.vstack([np.eye(n - ell, n + q), np.zeros((ell, n + q))])
    y_0 = np.linalg.solve(m1, e1)
    carry = np.zeros((n, n + q))
    carry[: ell + q, n - ell:] = np.eye(ell + q)
    for r, i in enumerate(cls.mixed):
        for j in basic.support_indices[i]:
            t = basic.points[j]
            if t < a:
                y_n_t = phi0[problem.node_index(t)][-1] @ y_0
                carry[ell + q + cls.p + r] -= basic.lambda_tilde[i, j] * y_n_t
    y_b = np.linalg.solve(m3, carry)
    z2_b = y_b[: n - ell - q]
    z2_a = (phi0[ia] @ y_0)[n - ell:]
    g2 = np.vstack([z2_b, z2_a])

    coupled = np.eye(n + q) - g1 @ g2
    return SplittingMaps(g1, g2, float(np.linalg.det(coupled)), hadamard_ratio(coupled))


def splitting_determinant(problem: Problem, basic: BasicForm, a: float, b: float) -> float:
    """``det[I - grad g1 grad g2]``; nonzero whenever the whole problem is well posed."""
    return splitting_maps(problem, basic, a, b).det


def _check_not_in_support(basic: BasicForm, *times: float) -> None:
    for t in times:
        if any(abs(t - s) <= NODE_TOL for s in basic.support):
            raise EndpointInSupport(f"{t} is a support point of the boundary operator")


def enlarged_condition_set(basic: BasicForm, a: float, b: float, variant: str = "inside") -> list[tuple[float, int]]:
    """``Y(a)``, ``Y(b)`` plus ``Y_n`` at the support points of straddling rows.

    ``variant="inside"`` takes the points in ``]a, b[``; ``"outside"`` takes
    those in ``[a, b]^c``.
    """
    if variant not in ("inside", "outside"):
        raise ValueError(f"variant must be 'inside' or 'outside', not {variant!r}")
    _check_not_in_support(basic, a, b)
    n = basic.n
    labels = [(float(a), k) for k in range(1, n + 1)] + [(float(b), k) for k in range(1, n + 1)]
    cls = preserves(basic, a, b)
    extra = set()
    for i in cls.straddling:
        for t in basic.supports[i]:
            inside = a < t < b
            if inside == (variant == "inside"):
                extra.add(t)
    labels += [(t, n) for t in sorted(extra)]
    return labels


def markov_split_ok(basic: BasicForm, a: float) -> bool:
    """True iff every row support lies in ``[0, a[`` or in ``]a, 1]``."""
    _check_not_in_support(basic, a)
    return all(all(t < a for t in s) or all(t > a for t in s) for s in basic.supports)
