"""Problem data: coefficients, the lateral boundary operator and the time grid.

The equation is ``D^n X + a_{n-1} D^{n-1} X + ... + a_0 X = dW/dt`` on [0, 1]
with ``n`` conditions ``sum_j alpha_ij X(t_j) = c_i``. It is handled as the
first order system ``DY + A(t) Y = (dW/dt, 0, ..., 0)`` with
``Y_i = D^{n-i} X``, so that ``X = Y_n``.

Everything here is immutable once validated. A :class:`Problem` carries a
private memo dict used by the numerical layers to avoid recomputing the
fundamental matrix; the memo never changes observable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    NotAGridNode,
    PointOutOfRange,
    ProblemError,
    RankDeficient,
    TooFewPoints,
    UnsortedDuplicatePoints,
)

DEFAULT_H = 1e-3
RANK_RTOL = 1e-10
# an inserted time this close to a uniform node replaces that node
SNAP_TOL = 1e-9
NODE_TOL = 1e-12

_FORMS = ("constant", "polynomial", "sinusoid", "samples")


@dataclass(frozen=True)
class Coefficient:
    """One scalar coefficient function on [0, 1].

    ``values`` depends on ``form``:

    * ``constant``: ``(value,)``
    * ``polynomial``: coefficients in ascending powers of t
    * ``sinusoid``: ``(amplitude, frequency, phase, offset)`` for
      ``offset + amplitude * sin(frequency * t + phase)``
    * ``samples``: values at equispaced nodes of [0, 1], linearly interpolated
    """

    form: str = "constant"
    values: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if self.form not in _FORMS:
            raise ProblemError(f"unknown coefficient form {self.form!r}")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not all(math.isfinite(v) for v in vals):
            raise ProblemError(f"non-finite value in {self.form} coefficient")
        expected = {"constant": 1, "sinusoid": 4}.get(self.form)
        if expected is not None and len(vals) != expected:
            raise ProblemError(f"{self.form} coefficient takes {expected} values, got {len(vals)}")
        if self.form == "polynomial" and not vals:
            raise ProblemError("polynomial coefficient needs at least one term")
        if self.form == "samples" and len(vals) < 2:
            raise ProblemError("sampled coefficient needs at least two samples")

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def polynomial(cls, *coeffs):
        return cls("polynomial", coeffs)

    @classmethod
    def sinusoid(cls, amplitude, frequency, phase=0.0, offset=0.0):
        return cls("sinusoid", (amplitude, frequency, phase, offset))

    @classmethod
    def sampled(cls, samples):
        return cls("samples", tuple(samples))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        v = self.values
        if self.form == "constant":
            return np.full_like(t, v[0])
        if self.form == "polynomial":
            return np.polynomial.polynomial.polyval(t, v)
        if self.form == "sinusoid":
            amp, freq, phase, offset = v
            return offset + amp * np.sin(freq * t + phase)
        nodes = np.linspace(0.0, 1.0, len(v))
        return np.interp(t, nodes, v)

    def __add__(self, other: "Coefficient") -> "Coefficient":
        # only the closed cases are needed for perturbations
        if other.is_zero():
            return self
        if self.form == other.form == "constant":
            return Coefficient.constant(self.values[0] + other.values[0])
        if self.form in ("constant", "polynomial") and other.form in ("constant", "polynomial"):
            k = max(len(self.values), len(other.values))
            a = np.pad(self.values, (0, k - len(self.values)))
            b = np.pad(other.values, (0, k - len(other.values)))
            return Coefficient.polynomial(*(a + b))
        grid = np.linspace(0.0, 1.0, 4097)
        return Coefficient.sampled(self(grid) + other(grid))

    def is_zero(self) -> bool:
        if self.form == "sinusoid":
            amp, _, _, offset = self.values
            return amp == 0.0 and offset == 0.0
        return all(v == 0.0 for v in self.values)

    def scaled(self, factor: float) -> "Coefficient":
        if self.form == "sinusoid":
            amp, freq, phase, offset = self.values
            return Coefficient.sinusoid(amp * factor, freq, phase, offset * factor)
        return Coefficient(self.form, tuple(factor * v for v in self.values))

    def to_dict(self) -> dict:
        v = list(self.values)
        if self.form == "constant":
            return {"form": "constant", "params": {"value": v[0]}}
        if self.form == "polynomial":
            return {"form": "polynomial", "params": {"coeffs": v}}
        if self.form == "sinusoid":
            keys = ("amplitude", "frequency", "phase", "offset")
            return {"form": "sinusoid", "params": dict(zip(keys, v))}
        return {"samples": v}

    @classmethod
    def from_dict(cls, d) -> "Coefficient":
        if not isinstance(d, dict):
            raise ProblemError("coefficient entry must be a mapping")
        if "samples" in d:
            return cls.sampled(d["samples"])
        form = d.get("form")
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise ProblemError("coefficient params must be a mapping")
        if form == "constant":
            return cls.constant(params["value"])
        if form == "polynomial":
            return cls.polynomial(*params["coeffs"])
        if form == "sinusoid":
            return cls.sinusoid(
                params["amplitude"],
                params["frequency"],
                params.get("phase", 0.0),
                params.get("offset", 0.0),
            )
        raise ProblemError(f"unknown coefficient form {form!r}")


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients ``a_0, ..., a_{n-1}`` of the differential operator."""

    a: tuple[Coefficient, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(self.a))
        if len(self.a) < 1:
            raise ProblemError("order must be at least 1")

    @property
    def n(self) -> int:
        return len(self.a)

    @classmethod
    def constants(cls, *values):
        return cls(tuple(Coefficient.constant(v) for v in values))

    def __call__(self, t) -> np.ndarray:
        """Values ``a_0(t), ..., a_{n-1}(t)`` stacked on the last axis."""
        return np.stack([ai(t) for ai in self.a], axis=-1)

    def perturbed(self, delta: Sequence[Coefficient], scale: float) -> "CoefficientSet":
        if len(delta) != self.n:
            raise ProblemError(f"perturbation needs {self.n} coefficients, got {len(delta)}")
        return CoefficientSet(tuple(ai + di.scaled(scale) for ai, di in zip(self.a, delta)))


def companion_matrix(coeffs: CoefficientSet, t: float) -> np.ndarray:
    """``A(t)``: first row ``(a_{n-1}(t), ..., a_0(t))``, ``-1`` on the subdiagonal."""
    return companion_matrices(coeffs, np.array([t]))[0]


def companion_matrices(coeffs: CoefficientSet, ts) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    n = coeffs.n
    out = np.zeros((len(ts), n, n))
    out[:, 0, :] = coeffs(ts)[:, ::-1]
    idx = np.arange(n - 1)
    out[:, idx + 1, idx] = -1.0
    return out


@dataclass(frozen=True)
class BoundaryOperator:
    """Lateral conditions ``sum_j alpha[i][j] * X(points[j]) = c[i]``."""

    points: tuple[float, ...]
    alpha: tuple[tuple[float, ...], ...]
    c: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))
        object.__setattr__(self, "alpha", tuple(tuple(float(x) for x in row) for row in self.alpha))
        object.__setattr__(self, "c", tuple(float(x) for x in self.c))
        m = len(self.points)
        if any(len(row) != m for row in self.alpha):
            raise ProblemError(f"every alpha row must have {m} entries (one per point)")
        if len(self.c) != len(self.alpha):
            raise ProblemError("c must have one entry per alpha row")

    @classmethod
    def from_arrays(cls, points, alpha, c=None):
        alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
        if c is None:
            c = np.zeros(alpha.shape[0])
        return cls(tuple(points), tuple(map(tuple, alpha)), tuple(np.atleast_1d(c)))

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.alpha, dtype=float).reshape(len(self.alpha), self.m)

    @property
    def rhs(self) -> np.ndarray:
        return np.array(self.c, dtype=float)

    def with_rhs(self, c) -> "BoundaryOperator":
        return replace(self, c=tuple(np.asarray(c, dtype=float)))


@dataclass(frozen=True)
class ProblemSpec:
    """Raw problem as read from a file or built in code (not yet validated)."""

    coeffs: CoefficientSet
    boundary: BoundaryOperator
    h: float = DEFAULT_H
    extra_nodes: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return self.coeffs.n


@dataclass(frozen=True)
class Problem(ProblemSpec):
    """A validated problem together with its master grid.

    The grid is uniform with step ``h`` and contains every boundary point and
    every time in ``extra_nodes`` as an exact node.
    """

    grid: np.ndarray = field(default=None, compare=False, repr=False)
    _memo: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.grid is None:
            grid = build_grid(self.h, self.boundary.points + tuple(self.extra_nodes))
            grid.setflags(write=False)
            object.__setattr__(self, "grid", grid)

    @property
    def m(self) -> int:
        return self.boundary.m

    @property
    def points(self) -> np.ndarray:
        return np.array(self.boundary.points)

    def node_index(self, t: float) -> int:
        i = int(np.searchsorted(self.grid, t))
        for k in (i - 1, i):
            if 0 <= k < len(self.grid) and abs(self.grid[k] - t) <= NODE_TOL:
                return k
        raise NotAGridNode(f"t={t!r} is not a grid node")

    def node_indices(self, ts: Iterable[float]) -> np.ndarray:
        return np.array([self.node_index(t) for t in ts], dtype=int)

    def has_node(self, t: float) -> bool:
        try:
            self.node_index(t)
        except NotAGridNode:
            return False
        return True

    def with_nodes(self, times: Iterable[float]) -> "Problem":
        """Same problem on a grid that also contains ``times``."""
        times = [float(t) for t in times]
        for t in times:
            if not 0.0 <= t <= 1.0:
                raise PointOutOfRange(f"time {t!r} outside [0, 1]")
        missing = [t for t in times if not self.has_node(t)]
        if not missing:
            return self
        extra = tuple(sorted(set(self.extra_nodes) | set(missing)))
        return Problem(self.coeffs, self.boundary, self.h, extra)

    def with_coeffs(self, coeffs: CoefficientSet) -> "Problem":
        return Problem(coeffs, self.boundary, self.h, self.extra_nodes)

    def with_rhs(self, c) -> "Problem":
        return Problem(self.coeffs, self.boundary.with_rhs(c), self.h, self.extra_nodes)


def build_grid(h: float, required: Iterable[float]) -> np.ndarray:
    n_steps = max(1, int(round(1.0 / h)))
    nodes = np.linspace(0.0, 1.0, n_steps + 1)
    inserted = []
    snapped = set()
    for t in sorted(set(float(x) for x in required)):
        i = int(np.clip(np.rint(t * n_steps), 0, n_steps))
        if nodes[i] == t:
            continue
        if 0 < i < n_steps and i not in snapped and abs(nodes[i] - t) <= SNAP_TOL:
            nodes[i] = t
            snapped.add(i)
        else:
            inserted.append(t)
    if inserted:
        nodes = np.union1d(nodes, inserted)
    return nodes


def validate_problem(raw: ProblemSpec) -> Problem:
    """Check a raw problem and return it with sorted points and its grid.

    Unsorted points are sorted (with the matching alpha columns); repeated
    points are rejected.
    """
    n = raw.coeffs.n
    b = raw.boundary
    if len(b.alpha) != n:
        raise ProblemError(f"alpha must have n={n} rows, got {len(b.alpha)}")
    if b.m < n:
        raise TooFewPoints(f"need at least n={n} boundary points, got {b.m}")
    pts = np.array(b.points, dtype=float)
    if not np.all(np.isfinite(pts)) or np.any(pts < 0.0) or np.any(pts > 1.0):
        raise PointOutOfRange(f"boundary points must lie in [0, 1]: {b.points}")
    order = np.argsort(pts, kind="stable")
    pts = pts[order]
    if np.any(np.diff(pts) <= 0.0):
        raise UnsortedDuplicatePoints(f"boundary points must be distinct: {b.points}")
    alpha = b.matrix[:, order]
    if not np.all(np.isfinite(alpha)) or not np.all(np.isfinite(b.rhs)):
        raise ProblemError("alpha and c must be finite")
    sv = np.linalg.svd(alpha, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficient(f"alpha has row rank < {n} (singular values {sv})")
    if not (0.0 < raw.h <= 0.5):
        raise ProblemError(f"grid step h must lie in (0, 0.5], got {raw.h}")
    for t in raw.extra_nodes:
        if not 0.0 <= t <= 1.0:
            raise PointOutOfRange(f"grid node {t!r} outside [0, 1]")
    boundary = BoundaryOperator(tuple(pts), tuple(map(tuple, alpha)), b.c)
    return Problem(raw.coeffs, boundary, float(raw.h), tuple(sorted(set(raw.extra_nodes))))


def make_problem(coeffs, points, alpha, c=None, h: float = DEFAULT_H) -> Problem:
    """Shorthand: plain numbers in ``coeffs`` are constant coefficients a_0..a_{n-1}."""
    if not isinstance(coeffs, CoefficientSet):
        coeffs = CoefficientSet(
            tuple(a if isinstance(a, Coefficient) else Coefficient.constant(a) for a in coeffs)
        )
    return validate_problem(ProblemSpec(coeffs, BoundaryOperator.from_arrays(points, alpha, c), h))
