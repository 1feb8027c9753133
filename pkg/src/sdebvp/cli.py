"""Command line front end.

Exit codes: 0 success (or the checked verdict holds), 1 verdict fails,
2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import boundary as bd
from . import law, ode, suite
from .csvio import write_csv
from .errors import NotWellPosed, NumericalError, ProblemError, SdeBvpError
from .green import influence_table
from .problem import ProblemSpec, validate_problem
from .problemfile import dump_problem, load_problem
from .sampler import mc_covariance, perturbation_experiment, sample_solution, sample_wiener

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
OUT_ENV = "SDEBVP_OUT"


class ConfigError(ProblemError):
    pass


@dataclass(frozen=True)
class Tolerances:
    eps_det: float = ode.EPS_DET
    eps_ci: float = law.EPS_CI
    eps_var: float = law.EPS_VAR
    eps_rank: float = law.EPS_RANK
    eps_reg: float = bd.EPS_REG
    eps_dep: float = suite.EPS_DEP

    def __post_init__(self):
        for name, v in vars(self).items():
            if not v > 0:
                raise ConfigError(f"tolerance {name} must be positive, got {v}")


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: Path | None = None
    out: Path = Path(".")
    pairs: tuple[tuple[float, float], ...] | None = None
    times: tuple[float, ...] | None = None
    splits: tuple[float, ...] | None = None
    n_paths: int = 1
    seed: int = 0
    h: float | None = None
    delta: tuple[float, ...] | None = None
    n_values: tuple[int, ...] = (2, 4, 8, 16, 32, 64)
    n_problems: int = 20
    n_pairs: int = 10
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        for a, b in self.pairs or ():
            if not (0.0 <= a < b <= 1.0):
                raise ConfigError(f"pair {a}:{b} must satisfy 0 <= a < b <= 1")
        for t in (self.times or ()) + (self.splits or ()):
            if not 0.0 <= t <= 1.0:
                raise ConfigError(f"time {t} outside [0, 1]")
        if self.n_paths < 1:
            raise ConfigError("--paths must be at least 1")
        if self.h is not None and not 0.0 < self.h <= 0.5:
            raise ConfigError("--h must lie in (0, 0.5]")
        if any(k < 1 for k in self.n_values):
            raise ConfigError("perturbation orders must be positive")


def _number(s: str) -> float:
    s = s.strip()
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {s!r}") from None


def parse_pairs(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in filter(None, (p.strip() for p in text.split(","))):
        if item.count(":") != 1:
            raise ConfigError(f"pair {item!r} must look like a:b")
        a, b = item.split(":")
        out.append((_number(a), _number(b)))
    return tuple(out)


def parse_list(text: str) -> tuple[float, ...]:
    return tuple(_number(x) for x in text.split(",") if x.strip())


def _load(cfg: RunConfig):
    if cfg.problem is None:
        raise ConfigError(f"{cfg.command} needs --problem")
    problem = load_problem(cfg.problem)
    if cfg.h is not None:
        problem = validate_problem(ProblemSpec(problem.coeffs, problem.boundary, cfg.h))
    return problem


def _out(cfg: RunConfig, name: str) -> Path:
    return cfg.out / name


def cmd_check(cfg: RunConfig) -> int:
    problem = _load(cfg)
    rep = ode.check_wellposed(problem, cfg.tol.eps_det)
    J = ode.j_matrix(problem)
    cond = float(np.max(np.linalg.cond(J.values)))
    defect = ode.liouville_defect(problem)
    print(f"det J({rep.s_ref:g}) = {rep.det:.12g}")
    for s, det, ok in rep.spot_checks:
        print(f"  spot check s={s:g}: det = {det:.6g} ({'ok' if ok else 'singular'})")
    print(f"max cond J(t) = {cond:.3e}; Liouville defect = {defect:.3e}; tol_int = {ode.integration_tolerance(problem.h):.1e}")
    print("well posed" if rep.wellposed else "NOT well posed: the homogeneous problem has nontrivial solutions")
    report = {
        "det": rep.det,
        "s_ref": rep.s_ref,
        "wellposed": rep.wellposed,
        "spot_checks": [{"s": s, "det": d, "wellposed": ok} for s, d, ok in rep.spot_checks],
        "max_cond_J": cond,
        "liouville_defect": defect,
        "grid_nodes": len(problem.grid),
    }
    cfg.out.mkdir(parents=True, exist_ok=True)
    _out(cfg, "check.json").write_text(json.dumps(report, indent=2) + "\n")
    _out(cfg, "problem.normalized.yaml").write_text(dump_problem(problem))
    return EXIT_OK if rep.wellposed else EXIT_FAIL


CLASSIFY_HEADER = [
    "a", "b", "preserves", "ell", "q", "p", "mixed", "regular",
    "det_left", "det_middle", "det_right", "splitting_det", "endpoint_in_support",
]


def classify_rows(problem, pairs, eps_reg=bd.EPS_REG):
    ode.require_wellposed(problem)
    basic = bd.basic_form(problem)
    for a, b in pairs:
        cls = bd.preserves(basic, a, b)
        row = [a, b, cls.preserves, cls.ell, cls.q, cls.p, len(cls.mixed)]
        if cls.preserves:
            reg = bd.regularity(problem, basic, a, b, eps_reg)
            split = bd.splitting_determinant(problem, basic, a, b) if reg.regular else None
            row += [reg.regular, *reg.dets, split]
        else:
            row += [None, None, None, None, None]
        yield row + [cls.endpoint_in_support]


def cmd_classify(cfg: RunConfig) -> int:
    problem = _load(cfg)
    rows = list(classify_rows(problem, cfg.pairs or (), cfg.tol.eps_reg))
    path = write_csv(_out(cfg, "classify.csv"), CLASSIFY_HEADER, rows)
    for r in rows:
        tag = "preserved" if r[2] else "not preserved"
        extra = f", regular={r[7]}, splitting det={r[11]}" if r[2] else ""
        print(f"({r[0]:g}, {r[1]:g}): {tag} (l={r[3]}, q={r[4]}, p={r[5]}){extra}")
    print(f"wrote {path}")
    return EXIT_OK


VERIFY_HEADER = [
    "problem", "kind", "a", "b", "predicted_independent", "normalized", "max_abs_partial_cov",
    "conditioning_rank", "passed", "note",
]


def _verify_rows(result):
    for c in result.checks:
        v = c.verdict
        yield [
            c.problem_id, c.kind, c.a, c.b, c.predicted_independent,
            v.normalized if v else None, v.max_abs_partial_cov if v else None,
            v.conditioning_rank if v else None, c.passed, c.note,
        ]


def cmd_verify(cfg: RunConfig) -> int:
    tol = cfg.tol
    scfg = suite.SuiteConfig(
        n_problems=cfg.n_problems, pairs_per_problem=cfg.n_pairs, seed=cfg.seed,
        h=cfg.h or suite.DEFAULT_H, eps_ci=tol.eps_ci, eps_var=tol.eps_var, eps_dep=tol.eps_dep,
    )
    rng = np.random.default_rng(cfg.seed)
    if cfg.problem is None:
        result = suite.run_suite(scfg)
    else:
        problem = _load(cfg)
        ode.require_wellposed(problem)
        pairs = list(cfg.pairs) if cfg.pairs is not None else suite.random_pairs(rng, problem, cfg.n_pairs)
        splits = list(cfg.splits) if cfg.splits is not None else suite.random_splits(rng, problem, 3)
        problem = problem.with_nodes([t for ab in pairs for t in ab] + splits + list(cfg.times or ()))
        if cfg.times is not None:
            result = _verify_fixed_times(problem, pairs, splits, cfg.times, scfg)
        else:
            result = suite.verify_problem(problem, pairs, splits, scfg, rng)
    path = write_csv(_out(cfg, "verify.csv"), VERIFY_HEADER, _verify_rows(result))
    kinds = sorted({c.kind for c in result.checks})
    for k in kinds:
        cs = result.of_kind(k)
        print(f"{k:18s} {sum(c.passed for c in cs):4d}/{len(cs)} match the predicted verdict")
    if result.splitting:
        ok = sum(s.passed for s in result.splitting)
        print(f"{'splitting det':18s} {ok:4d}/{len(result.splitting)} nonzero on regular preserved pairs")
    print(f"wrote {path}")
    return EXIT_OK if not result.failures else EXIT_FAIL


def _verify_fixed_times(problem, pairs, splits, times, scfg):
    result = suite.SuiteResult(scfg)
    basic = bd.basic_form(problem)
    result.problems.append(problem)
    for a, b in pairs:
        inside = [t for t in times if a < t < b]
        outside = [t for t in times if t < a or t > b]
        result.checks.append(suite.check_pair(problem, basic, a, b, inside, outside, scfg))
        if not bd.preserves(basic, a, b).preserves:
            for variant in ("inside", "outside"):
                result.checks.append(suite.check_enlarged(problem, basic, a, b, inside, outside, variant, scfg))
    for a in splits:
        past = [t for t in times if t < a]
        future = [t for t in times if t > a]
        if past and future:
            result.checks.append(suite.check_split(problem, basic, a, past, future, scfg))
    return result


def cmd_kernel(cfg: RunConfig) -> int:
    problem = _load(cfg)
    times = cfg.times or (0.5,)
    problem = problem.with_nodes(times)
    ode.require_wellposed(problem)
    n = problem.n
    grid = problem.grid
    cov = law.covariance_rows(problem, times)
    g = influence_table(problem, times, "right")
    mean = law.mean_function(problem)
    names = [f"C_{i}{j}" for i in range(1, n + 1) for j in range(1, n + 1)]
    krows = ([t, s, *cov[r, k].ravel()] for r, t in enumerate(times) for k, s in enumerate(grid))
    p1 = write_csv(_out(cfg, "kernel.csv"), ["t", "s", *names], krows)
    grows = ([t, s, *g[r, k]] for r, t in enumerate(times) for k, s in enumerate(grid))
    p2 = write_csv(_out(cfg, "influence.csv"), ["t", "s", *[f"g_{i}" for i in range(1, n + 1)]], grows)
    p3 = write_csv(_out(cfg, "mean.csv"), ["t", *[f"m_{i}" for i in range(1, n + 1)]], ([s, *m] for s, m in zip(grid, mean)))
    for r, t in enumerate(times):
        k = problem.node_index(t)
        print(f"Var X({t:g}) = {cov[r, k, n - 1, n - 1]:.12g}, E X({t:g}) = {mean[k, n - 1]:.12g}")
    print(f"wrote {p1}, {p2}, {p3}")
    return EXIT_OK


def cmd_sample(cfg: RunConfig) -> int:
    problem = _load(cfg)
    ode.require_wellposed(problem)
    n = problem.n
    if cfg.times:
        labels = [(t, k) for t in cfg.times for k in range(1, n + 1)]
        est = mc_covariance(problem, labels, cfg.n_paths, cfg.seed)
        exact = law.joint_law(problem, labels)
        rows = []
        for i, li in enumerate(labels):
            for j, lj in enumerate(labels):
                rows.append([li[0], li[1], lj[0], lj[1], est.cov[i, j], est.stderr_cov[i, j], exact.cov[i, j]])
        path = write_csv(_out(cfg, "mc_covariance.csv"), ["t", "i", "s", "j", "estimate", "stderr", "exact"], rows)
        if est.stderr_defined:
            z = np.abs(est.cov - exact.cov) / np.maximum(est.stderr_cov, 1e-300)
            print(f"{cfg.n_paths} paths: max |estimate - exact| / stderr = {np.max(z):.3f}")
        else:
            print("single path: standard errors undefined")
        print(f"wrote {path}")
        return EXIT_OK
    header = ["t", *[f"Y_{i}" for i in range(1, n + 1)]]
    width = max(4, len(str(cfg.n_paths - 1)))
    for p in range(cfg.n_paths):
        path = sample_solution(problem, sample_wiener(problem.grid, cfg.seed, p))
        out = write_csv(_out(cfg, f"path_{p:0{width}d}.csv"), header, ([t, *y] for t, y in zip(path.grid, path.values)))
    print(f"wrote {cfg.n_paths} path file(s) to {cfg.out}, last {out.name}")
    return EXIT_OK


def cmd_perturb(cfg: RunConfig) -> int:
    problem = _load(cfg)
    delta = cfg.delta if cfg.delta is not None else (1.0,) * problem.n
    if len(delta) != problem.n:
        raise ConfigError(f"--delta needs {problem.n} values (a_0 .. a_{problem.n - 1})")
    rows = perturbation_experiment(problem, delta, cfg.n_values)
    path = write_csv(
        _out(cfg, "perturb.csv"),
        ["N", "sup_l2", "kernel_sup", "t_at_sup"],
        ([r.n_value, r.sup_l2, r.kernel_sup, r.t_at_sup] for r in rows),
    )
    for r in rows:
        print(f"N={r.n_value:5d}  sup_t L2 = {r.sup_l2:.6e}  sup |g_N - g| = {r.kernel_sup:.6e}")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "classify": cmd_classify,
    "verify": cmd_verify,
    "kernel": cmd_kernel,
    "sample": cmd_sample,
    "perturb": cmd_perturb,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdebvp", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", type=Path, help="problem file (YAML or JSON)")
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--h", type=float, help="override the grid step")
    common.add_argument("--seed", type=int, default=0)
    tol = common.add_argument_group("tolerances")
    for name, default in vars(Tolerances()).items():
        tol.add_argument("--" + name.replace("_", "-"), type=float, default=default)

    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="well-posedness check")
    p = sub.add_parser("classify", parents=[common], help="classify pairs (a, b)")
    p.add_argument("--pairs", default="", help="a1:b1,a2:b2,... (fractions allowed)")
    p = sub.add_parser("verify", parents=[common], help="conditional-independence checks")
    p.add_argument("--pairs", help="a1:b1,... (random if omitted)")
    p.add_argument("--times", help="sample times used on both sides (random if omitted)")
    p.add_argument("--splits", help="split points for the past/future check")
    p.add_argument("--problems", type=int, default=20, help="random problems when --problem is omitted")
    p.add_argument("--n-pairs", type=int, default=10)
    p = sub.add_parser("kernel", parents=[common], help="covariance and influence rows")
    p.add_argument("--times", help="row times (default 0.5)")
    p = sub.add_parser("sample", parents=[common], help="sample paths or Monte Carlo covariances")
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--times", help="if given, estimate the covariance at these times instead of dumping paths")
    p = sub.add_parser("perturb", parents=[common], help="coefficient perturbation experiment")
    p.add_argument("--delta", help="constant perturbations of a_0,...,a_{n-1} (default all 1)")
    p.add_argument("--orders", default="2,4,8,16,32,64", help="values of N")
    return ap


def config_from_args(args) -> RunConfig:
    tol = Tolerances(**{k: getattr(args, k) for k in vars(Tolerances())})
    out = args.out or Path(os.environ.get(OUT_ENV, "."))
    get = lambda name: getattr(args, name, None)  # noqa: E731
    pairs = get("pairs")
    return RunConfig(
        command=args.command,
        problem=args.problem,
        out=out,
        pairs=parse_pairs(pairs) if pairs is not None else None,
        times=parse_list(get("times")) if get("times") else None,
        splits=parse_list(get("splits")) if get("splits") else None,
        n_paths=get("paths") or 1,
        seed=args.seed,
        h=args.h,
        delta=parse_list(get("delta")) if get("delta") else None,
        n_values=tuple(int(x) for x in parse_list(get("orders"))) if get("orders") else (2, 4, 8, 16, 32, 64),
        n_problems=get("problems") or 20,
        n_pairs=get("n_pairs") or 10,
        tol=tol,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except NotWellPosed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SdeBvpError as exc:  # pragma: no cover - every subclass is handled above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
