"""Randomized checks of the Markov-field characterizations.

Each check samples finite time sets on both sides of a pair (or split point),
runs :func:`ci_test` with the conditioning set the corresponding statement
prescribes, and compares with the predicted verdict:

* ``pair``: given ``Y(a), Y(b)``, inside and outside of ``[a, b]`` are
  independent iff the pair is preserved.
* ``enlarged-inside`` / ``enlarged-outside``: after adding ``Y_n`` at the
  support points of the non-preserving rows, independence always holds.
* ``split``: past and future of ``a`` are independent given ``Y(a)`` iff
  every row support is one-sided.

A predicted dependence passes only when the normalized partial covariance
reaches ``eps_dep``; values between ``eps_ci`` and ``eps_dep`` count as
failures either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import (
    BasicForm,
    basic_form,
    classification_invariance,
    enlarged_condition_set,
    markov_split_ok,
    preserves,
    regularity,
    splitting_maps,
)
from .errors import EndpointInSupport, SingularPair
from .law import EPS_CI, EPS_VAR, CIVerdict, ci_test, joint_law
from .ode import check_wellposed
from .problem import DEFAULT_H, NODE_TOL, Coefficient, CoefficientSet, Problem, make_problem
from .sampler import mc_covariance

EPS_DEP = 1e-3
MIN_SPACING = 0.05


@dataclass(frozen=True)
class SuiteConfig:
    n_problems: int = 20
    pairs_per_problem: int = 10
    seed: int = 0
    max_n: int = 3
    max_m: int = 5
    n_inside: int = 8
    n_outside: int = 8
    h: float = DEFAULT_H
    eps_ci: float = EPS_CI
    eps_var: float = EPS_VAR
    eps_dep: float = EPS_DEP


def random_problem(rng: np.random.Generator, h: float = DEFAULT_H, max_n: int = 3, max_m: int = 5, max_tries: int = 200) -> Problem:
    """A well-posed problem with constant or linear coefficients and a sparse boundary operator.

    The operator is built in basic form with random sparsity and then mixed
    by a random invertible matrix, so supports are nontrivial but the input
    is not already canonical.
    """
    for _ in range(max_tries):
        n = int(rng.integers(1, max_n + 1))
        m = int(rng.integers(n, max_m + 1))
        slots = np.arange(0, 1.0 + 1e-12, MIN_SPACING)
        points = np.sort(rng.choice(slots, size=m, replace=False))
        coeffs = []
        for _ in range(n):
            if rng.random() < 0.5:
                coeffs.append(Coefficient.constant(float(rng.uniform(-2, 2))))
            else:
                coeffs.append(Coefficient.polynomial(*rng.uniform(-2, 2, size=2)))
        basis = rng.choice(m, size=n, replace=False)
        tilde = np.where(rng.random((n, m)) < 0.5, rng.uniform(-2, 2, size=(n, m)), 0.0)
        tilde[:, basis] = np.eye(n)
        mix = rng.uniform(-1, 1, size=(n, n)) + 2 * np.eye(n)
        alpha = mix @ tilde
        c = rng.uniform(-1, 1, size=n)
        problem = make_problem(CoefficientSet(tuple(coeffs)), points, alpha, c, h=h)
        report = check_wellposed(problem)
        if report.wellposed and abs(report.det) > 1e-3 * max(1.0, np.linalg.norm(alpha)):
            return problem
    raise RuntimeError("could not draw a well-posed problem")


def _free_nodes(problem: Problem, lo: float, hi: float, closed: bool = False) -> np.ndarray:
    g = problem.grid
    if closed:
        sel = (g >= lo - NODE_TOL) & (g <= hi + NODE_TOL)
    else:
        sel = (g > lo + NODE_TOL) & (g < hi - NODE_TOL)
    pts = np.array(problem.boundary.points)
    if pts.size:
        sel &= np.min(np.abs(g[:, None] - pts[None, :]), axis=1) > NODE_TOL
    return g[sel]


def random_pairs(rng: np.random.Generator, problem: Problem, count: int) -> list[tuple[float, float]]:
    """Pairs of grid nodes ``a < b`` avoiding the boundary points."""
    nodes = _free_nodes(problem, 0.0, 1.0, closed=True)
    nodes = nodes[np.isclose(nodes * 100, np.round(nodes * 100), atol=1e-8)]  # hundredths only
    out = []
    while len(out) < count:
        a, b = np.sort(rng.choice(nodes, size=2, replace=False))
        out.append((float(a), float(b)))
    return out


def random_splits(rng: np.random.Generator, problem: Problem, count: int) -> list[float]:
    nodes = _free_nodes(problem, 0.0, 1.0, closed=True)
    nodes = nodes[np.isclose(nodes * 100, np.round(nodes * 100), atol=1e-8)]
    return [float(x) for x in rng.choice(nodes, size=min(count, len(nodes)), replace=False)]


def _sample(rng, candidates: np.ndarray, k: int) -> list[float]:
    if len(candidates) == 0:
        return []
    return [float(x) for x in rng.choice(candidates, size=min(k, len(candidates)), replace=False)]


def sample_times(rng, problem: Problem, a: float, b: float, n_inside: int = 8, n_outside: int = 8):
    """Random nodes inside ``]a, b[`` and outside ``[a, b]``, plus the support points on each side."""
    pts = problem.boundary.points
    inside = _sample(rng, _free_nodes(problem, a, b), n_inside) + [t for t in pts if a < t < b]
    outer = np.concatenate([_free_nodes(problem, 0.0, a, closed=True), _free_nodes(problem, b, 1.0, closed=True)])
    outer = outer[(outer < a - NODE_TOL) | (outer > b + NODE_TOL)]
    outside = _sample(rng, outer, n_outside) + [t for t in pts if t < a or t > b]
    return sorted(set(inside)), sorted(set(outside))


@dataclass(frozen=True)
class TheoremCheck:
    kind: str
    problem_id: int
    a: float
    b: float | None
    predicted_independent: bool
    verdict: CIVerdict | None
    eps_ci: float = EPS_CI
    eps_dep: float = EPS_DEP
    note: str = ""

    @property
    def passed(self) -> bool:
        if self.verdict is None:
            return False
        if self.predicted_independent:
            return self.verdict.normalized <= self.eps_ci
        return self.verdict.normalized >= self.eps_dep


def check_pair(problem, basic: BasicForm, a, b, inside, outside, cfg: SuiteConfig, pid: int = 0) -> TheoremCheck:
    n = problem.n
    cond = [(a, k) for k in range(1, n + 1)] + [(b, k) for k in range(1, n + 1)]
    v = ci_test(problem, inside, outside, cond, cfg.eps_ci, cfg.eps_var)
    pred = preserves(basic, a, b).preserves
    return TheoremCheck("pair", pid, a, b, pred, v, cfg.eps_ci, cfg.eps_dep)


def check_enlarged(problem, basic: BasicForm, a, b, inside, outside, variant: str, cfg: SuiteConfig, pid: int = 0) -> TheoremCheck:
    kind = f"enlarged-{variant}"
    try:
        cond = enlarged_condition_set(basic, a, b, variant)
    except EndpointInSupport as exc:
        return TheoremCheck(kind, pid, a, b, True, None, cfg.eps_ci, cfg.eps_dep, note=str(exc))
    v = ci_test(problem, inside, outside, cond, cfg.eps_ci, cfg.eps_var)
    return TheoremCheck(kind, pid, a, b, True, v, cfg.eps_ci, cfg.eps_dep)


def check_split(problem, basic: BasicForm, a, past, future, cfg: SuiteConfig, pid: int = 0) -> TheoremCheck:
    try:
        pred = markov_split_ok(basic, a)
    except EndpointInSupport as exc:
        return TheoremCheck("split", pid, a, None, False, None, cfg.eps_ci, cfg.eps_dep, note=str(exc))
    cond = [(a, k) for k in range(1, problem.n + 1)]
    v = ci_test(problem, past, future, cond, cfg.eps_ci, cfg.eps_var)
    return TheoremCheck("split", pid, a, None, pred, v, cfg.eps_ci, cfg.eps_dep)


@dataclass(frozen=True)
class SplittingCheck:
    problem_id: int
    a: float
    b: float
    regular: bool
    det: float | None
    ratio: float | None

    @property
    def passed(self) -> bool:
        # only regular preserved pairs carry a prediction
        return not self.regular or (self.ratio is not None and self.ratio >= 1e-8)


@dataclass
class SuiteResult:
    config: SuiteConfig
    problems: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    splitting: list = field(default_factory=list)

    def of_kind(self, *kinds: str) -> list[TheoremCheck]:
        return [c for c in self.checks if c.kind in kinds]

    @property
    def failures(self) -> list:
        return [c for c in self.checks + self.splitting if not c.passed]


def verify_problem(problem: Problem, pairs, splits, cfg: SuiteConfig, rng, pid: int = 0, result: SuiteResult | None = None) -> SuiteResult:
    """All checks for one problem on the given pairs and split points."""
    result = result if result is not None else SuiteResult(cfg)
    basic = basic_form(problem)
    result.problems.append(problem)
    for a, b in pairs:
        inside, outside = sample_times(rng, problem, a, b, cfg.n_inside, cfg.n_outside)
        result.checks.append(check_pair(problem, basic, a, b, inside, outside, cfg, pid))
        cls = preserves(basic, a, b)
        if cls.preserves:
            rep = regularity(problem, basic, a, b)
            if rep.regular:
                try:
                    maps = splitting_maps(problem, basic, a, b)
                    result.splitting.append(SplittingCheck(pid, a, b, True, maps.det, maps.ratio))
                except SingularPair:
                    result.splitting.append(SplittingCheck(pid, a, b, True, None, None))
            else:
                result.splitting.append(SplittingCheck(pid, a, b, False, None, None))
        else:
            for variant in ("inside", "outside"):
                result.checks.append(check_enlarged(problem, basic, a, b, inside, outside, variant, cfg, pid))
    for a in splits:
        past = _sample(rng, _free_nodes(problem, 0.0, a, closed=True), cfg.n_inside)
        past = sorted(set(past + [t for t in problem.boundary.points if t < a]) - {a})
        future = _sample(rng, _free_nodes(problem, a, 1.0, closed=True), cfg.n_outside)
        future = sorted(set(future + [t for t in problem.boundary.points if t > a]) - {a})
        if not past or not future:
            continue
        result.checks.append(check_split(problem, basic, a, past, future, cfg, pid))
    return result


def run_suite(cfg: SuiteConfig = SuiteConfig()) -> SuiteResult:
    rng = np.random.default_rng(cfg.seed)
    result = SuiteResult(cfg)
    for pid in range(cfg.n_problems):
        problem = random_problem(rng, cfg.h, cfg.max_n, cfg.max_m)
        pairs = random_pairs(rng, problem, cfg.pairs_per_problem)
        splits = random_splits(rng, problem, 3)
        verify_problem(problem, pairs, splits, cfg, rng, pid, result)
    return result


def invariance_trials(trials: int = 50, bases: int = 10, seed: int = 0, h: float = 0.01) -> list[bool]:
    """Basis-invariance of the preserving verdict on random (problem, pair) draws."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(trials):
        problem = random_problem(rng, h)
        (a, b), = random_pairs(rng, problem, 1)
        out.append(classification_invariance(problem.boundary, a, b, bases, seed=seed + i))
    return out


@dataclass(frozen=True)
class MCTrial:
    labels: tuple
    max_z: float  # largest |estimate - exact| / stderr over covariance entries
    passed: bool


def mc_trial(rng: np.random.Generator, n_paths: int, h: float = DEFAULT_H, n_labels: int = 4, k_sigma: float = 4.0, floor: float = 1e-12) -> MCTrial:
    """Monte Carlo covariance of random labels against the exact kernel.

    ``floor`` absorbs entries whose exact value and standard error are both
    rounding noise (deterministic labels such as ``X(0)`` under ``X(0) = 0``).
    """
    problem = random_problem(rng, h)
    times = rng.choice(np.round(np.arange(0, 101) / 100, 2), size=n_labels, replace=False)
    labels = tuple((float(t), int(rng.integers(1, problem.n + 1))) for t in times)
    est = mc_covariance(problem, labels, n_paths, int(rng.integers(0, 2**63)))
    exact = joint_law(problem, labels).cov
    err = np.abs(est.cov - exact)
    ok = bool(np.all(err <= k_sigma * est.stderr_cov + floor))
    z = err / np.maximum(est.stderr_cov, floor)
    return MCTrial(labels, float(np.max(z)), ok)
