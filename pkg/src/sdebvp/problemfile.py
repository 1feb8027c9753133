"""Reading and writing problem files.

A problem file is YAML (JSON also parses, being a subset)::

    order: 2
    coefficients:            # a_0, ..., a_{n-1}
      - {form: constant, params: {value: 4.0}}
      - {form: polynomial, params: {coeffs: [0.0, 1.0]}}   # t
    boundary:
      points: [0.0, 1.0]
      alpha: [[1.0, 0.0], [0.0, 1.0]]
      c: [0.0, 0.0]          # optional, zeros by default
    grid:
      h: 0.001               # optional

Other coefficient forms: ``{form: sinusoid, params: {amplitude, frequency,
phase, offset}}`` and ``{samples: [...]}`` (equispaced on [0, 1]).

Errors carry the line of the offending entry when it can be located.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .errors import ProblemError
from .problem import DEFAULT_H, BoundaryOperator, Coefficient, CoefficientSet, Problem, ProblemSpec, validate_problem


class ProblemFileError(ProblemError):
    def __init__(self, message: str, source: str = "<string>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


def _line_of(root, path) -> int | None:
    """1-based line of the node reached by following ``path`` through the composed tree."""
    node, line = root, None
    if node is None:
        return None
    line = node.start_mark.line + 1
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def _floats(value, what: str):
    if not isinstance(value, list) or any(isinstance(v, (bool, list, dict)) or v is None for v in value):
        raise TypeError(f"{what} must be a list of numbers")
    return [float(v) for v in value]


def parse_problem(text: str, source: str = "<string>") -> Problem:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ProblemFileError(f"parse error: {exc.problem}", source, mark.line + 1 if mark else None) from exc
    except yaml.YAMLError as exc:
        raise ProblemFileError(f"parse error: {exc}", source) from exc

    path: list = []

    def fail(msg, exc=None):
        err = ProblemFileError(msg, source, _line_of(root, path))
        if exc is not None:
            raise err from exc
        raise err

    if not isinstance(data, dict):
        fail("top level must be a mapping")
    for key in ("order", "coefficients", "boundary"):
        if key not in data:
            fail(f"missing required key {key!r}")
    unknown = set(data) - {"order", "coefficients", "boundary", "grid"}
    if unknown:
        path[:] = [sorted(unknown)[0]]
        fail(f"unknown key {sorted(unknown)[0]!r}")

    path[:] = ["order"]
    order = data["order"]
    if not isinstance(order, int) or isinstance(order, bool) or order < 1:
        fail("order must be a positive integer")

    path[:] = ["coefficients"]
    raw_coeffs = data["coefficients"]
    if not isinstance(raw_coeffs, list) or len(raw_coeffs) != order:
        fail(f"coefficients must list {order} entries (a_0 .. a_{order - 1})")
    coeffs = []
    for i, entry in enumerate(raw_coeffs):
        path[:] = ["coefficients", i]
        try:
            coeffs.append(Coefficient.from_dict(entry))
        except KeyError as exc:
            fail(f"coefficient a_{i}: missing parameter {exc.args[0]!r}", exc)
        except (TypeError, ValueError) as exc:
            fail(f"coefficient a_{i}: {exc}", exc)

    path[:] = ["boundary"]
    bnd = data["boundary"]
    if not isinstance(bnd, dict):
        fail("boundary must be a mapping with points, alpha and c")
    for key in ("points", "alpha"):
        if key not in bnd:
            fail(f"boundary is missing {key!r}")
    try:
        path[:] = ["boundary", "points"]
        points = _floats(bnd["points"], "points")
        path[:] = ["boundary", "alpha"]
        if not isinstance(bnd["alpha"], list):
            raise TypeError("alpha must be a list of rows")
        alpha = []
        for r, row in enumerate(bnd["alpha"]):
            path[:] = ["boundary", "alpha", r]
            alpha.append(_floats(row, f"alpha row {r}"))
            if len(alpha[-1]) != len(points):
                raise ValueError(f"alpha row {r} has {len(alpha[-1])} entries for {len(points)} points")
        path[:] = ["boundary", "c"]
        c = _floats(bnd["c"], "c") if "c" in bnd else [0.0] * len(alpha)
        path[:] = ["grid", "h"]
        grid = data.get("grid") or {}
        if not isinstance(grid, dict):
            raise TypeError("grid must be a mapping")
        h = float(grid.get("h", DEFAULT_H))
    except (TypeError, ValueError) as exc:
        fail(str(exc), exc)

    path[:] = ["boundary"]
    try:
        boundary = BoundaryOperator(tuple(points), tuple(tuple(r) for r in alpha), tuple(c))
        spec = ProblemSpec(CoefficientSet(tuple(coeffs)), boundary, h)
        return validate_problem(spec)
    except ProblemError as exc:
        fail(str(exc), exc)


def load_problem(path) -> Problem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read file: {exc.strerror}", str(path)) from exc
    return parse_problem(text, str(path))


def problem_to_dict(problem: ProblemSpec) -> dict:
    b = problem.boundary
    return {
        "order": problem.n,
        "coefficients": [a.to_dict() for a in problem.coeffs.a],
        "boundary": {
            "points": list(b.points),
            "alpha": [list(r) for r in b.alpha],
            "c": list(b.c),
        },
        "grid": {"h": problem.h},
    }


def dump_problem(problem: ProblemSpec) -> str:
    """Normalized YAML; floats are written with ``repr`` so reloading is bit exact."""
    return yaml.safe_dump(problem_to_dict(problem), sort_keys=False, default_flow_style=None)
