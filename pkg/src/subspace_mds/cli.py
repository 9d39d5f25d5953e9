"""Command-line interface: embed, canonical-form, bench, retarget and basis."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .laplace import EigenSolverError, cache_key, cotan_matrices, eigenbasis, mesh_basis, write_basis
from .mesh_io import (ImageFormatError, MeshFormatError, TriangleMesh, load_image, load_mesh, save_image,
                      save_mesh)
from .metric import MeshGeodesics
from .retarget import QPInfeasibleError, RetargetConfig, build_retarget_problem, solve_constrained, warp_image
from .smacof import ConvergenceLog, SolverOptions, smacof_rre_solve, smacof_solve
from .spectral import (MultiresSchedule, geodesic_problem_builder, multires_solve, spectral_smacof)
from .stress import StressProblem, relative_weights, stress_value, unit_weights

logger = logging.getLogger("subspace_mds")

CACHE_ENV = "SUBSPACE_MDS_CACHE"
EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
DEFAULT_SCHEDULE_Q = "200,600,N"
DEFAULT_SCHEDULE_P = "100,300,N"


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def parse_schedule(value) -> list:
    """``"200,600,N"`` or ``[200, 600, "N"]`` -> ``[200, 600, "N"]``; ``N`` may only come last."""
    items = value.split(",") if isinstance(value, str) else list(value)
    out = []
    for item in items:
        text = str(item).strip()
        if text.upper() == "N":
            out.append("N")
            continue
        try:
            v = int(text)
        except ValueError:
            raise ConfigError(f"schedule entry {text!r} is neither an integer nor N") from None
        if v < 1:
            raise ConfigError(f"schedule entry {v} must be positive")
        out.append(v)
    if not out:
        raise ConfigError("empty schedule")
    if "N" in out[:-1]:
        raise ConfigError("N may only appear as the last schedule entry")
    nums = [v for v in out if v != "N"]
    if any(b <= a for a, b in zip(nums, nums[1:])):
        raise ConfigError(f"schedule {value!r} is not ascending")
    return out


@dataclass
class RunConfig:
    """Merged parameters of one command: JSON config values overridden by flags."""

    command: str
    options: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["options"][name]
        except KeyError:
            raise AttributeError(name) from None

    def schedule(self) -> MultiresSchedule:
        qs = parse_schedule(self.schedule_q)
        ps = parse_schedule(self.schedule_p)
        if len(qs) != len(ps):
            raise ConfigError(f"--schedule-q has {len(qs)} levels but --schedule-p has {len(ps)}")
        for q, p in zip(qs, ps):
            if q != "N" and p != "N" and q < self.c * p:
                raise ConfigError(f"level (q={q}, p={p}) violates the sampling criterion q >= {self.c:g} p")
        return MultiresSchedule(qs, ps, c=self.c)


def _add_common(p):
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--seed", type=int, help="FPS seed vertex / random-init seed (default 0)")
    p.add_argument("--threads", type=int, help="cap on BLAS worker threads")
    p.add_argument("--cache-dir", help=f"eigenbasis cache directory (default ${CACHE_ENV})")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_solver(p, solvers=None):
    if solvers:
        p.add_argument("--solver", choices=solvers)
    p.add_argument("--weights", choices=["unit", "relative"])
    p.add_argument("--dim", type=int)
    p.add_argument("--a-tol", type=float)
    p.add_argument("--r-tol", type=float)
    p.add_argument("--maxiter", type=int)
    p.add_argument("-p", "--p", type=int, dest="p", help="basis size (spectral)")
    p.add_argument("-q", "--q", type=int, dest="q", help="sample count (spectral)")
    p.add_argument("--schedule-q", help="comma-separated q levels, N allowed last")
    p.add_argument("--schedule-p", help="comma-separated p levels, N allowed last")
    p.add_argument("--c", type=float, help="sampling ratio in q >= c p")


DEFAULTS = {
    "embed": dict(solver="smacof", weights="unit", dim=3, a_tol=0.0, r_tol=None, maxiter=None, p=100, q=None,
                  schedule_q=DEFAULT_SCHEDULE_Q, schedule_p=DEFAULT_SCHEDULE_P, c=2.0, rre_window=5, init=None,
                  input=None, output_dir=None),
    "canonical-form": dict(weights="unit", dim=3, a_tol=0.0, r_tol=None, maxiter=None, p=None, q=None,
                           schedule_q=DEFAULT_SCHEDULE_Q, schedule_p=DEFAULT_SCHEDULE_P, c=2.0, input=None,
                           output=None, log=None),
    "bench": dict(solver="multires", weights="unit", dim=3, a_tol=0.0, r_tol=None, maxiter=5000, p=100, q=None,
                  schedule_q=DEFAULT_SCHEDULE_Q, schedule_p=DEFAULT_SCHEDULE_P, c=2.0, rre=False, rre_window=5,
                  time_cap=None, cap_factor=100.0, input=None, output_dir=None),
    "retarget": dict(source=None, saliency=None, grid_rows=None, grid_cols=None, ratio=0.5, mu=None,
                     epsilon=None, p=300, q=None, stress_edges="all", maxiter=200, r_tol=1e-6, output_dir=None),
    "basis": dict(input=None, p=None, output=None),
}
COMMON_DEFAULTS = dict(seed=0, threads=None, cache_dir=None, verbose=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subspace-mds", description="Least-squares MDS with spectral SMACOF.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("embed", help="embed a mesh or a distance table")
    _add_common(p)
    _add_solver(p, ["smacof", "smacof-rre", "spectral", "multires"])
    p.add_argument("--input", help="mesh (.off/.obj) or square distance table (.csv)")
    p.add_argument("--init", help="initial embedding CSV (default: mesh coordinates or seeded random)")
    p.add_argument("--rre-window", type=int)
    p.add_argument("--output-dir")

    p = sub.add_parser("canonical-form", help="multiresolution canonical form of a mesh")
    _add_common(p)
    _add_solver(p)
    p.add_argument("--input")
    p.add_argument("--output", help="canonical form mesh path (.off/.obj)")
    p.add_argument("--log", help="optional convergence log CSV path")

    p = sub.add_parser("bench", help="spectral vs full SMACOF time-to-stress benchmark")
    _add_common(p)
    _add_solver(p, ["spectral", "multires"])
    p.add_argument("--input")
    p.add_argument("--rre", action="store_true", default=None, help="also run SMACOF with RRE")
    p.add_argument("--rre-window", type=int)
    p.add_argument("--time-cap", type=float, help="seconds allowed to each full solver")
    p.add_argument("--cap-factor", type=float, help="time cap as a multiple of the spectral time")
    p.add_argument("--output-dir")

    p = sub.add_parser("retarget", help="saliency-aware horizontal image retargeting")
    _add_common(p)
    p.add_argument("--source", help="source image (plain PPM/PGM)")
    p.add_argument("--saliency", help="saliency map (plain PGM, same size)")
    p.add_argument("--grid-rows", type=int)
    p.add_argument("--grid-cols", type=int)
    p.add_argument("--ratio", type=float, help="target width / source width")
    p.add_argument("--mu", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("-p", "--p", type=int, dest="p")
    p.add_argument("-q", "--q", type=int, dest="q")
    p.add_argument("--stress-edges", choices=["all", "sampled"])
    p.add_argument("--maxiter", type=int)
    p.add_argument("--r-tol", type=float)
    p.add_argument("--output-dir")

    p = sub.add_parser("basis", help="compute and cache a mesh eigenbasis")
    _add_common(p)
    p.add_argument("--input")
    p.add_argument("-p", "--p", type=int, dest="p")
    p.add_argument("--output", help="also write the basis file here")
    return parser


def load_config(argv) -> RunConfig:
    """Parse flags, fold in the JSON config, and fill defaults (flags > JSON > defaults)."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise ConfigError("a command is required: embed, canonical-form, bench, retarget or basis")
    flags = {k: v for k, v in vars(ns).items() if v is not None and k not in ("command", "config")}
    if flags.get("verbose") == 0:
        flags.pop("verbose")
    options = dict(COMMON_DEFAULTS)
    options.update(DEFAULTS[ns.command])
    if ns.config:
        try:
            with open(ns.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {ns.config} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        unknown = sorted(set(loaded) - set(options))
        if unknown:
            raise ConfigError(f"unknown config keys for {ns.command}: {', '.join(unknown)}")
        options.update(loaded)
    options.update(flags)
    if options.get("cache_dir") is None:
        options["cache_dir"] = os.environ.get(CACHE_ENV) or None
    if options.get("threads") is not None and options["threads"] < 1:
        raise ConfigError("--threads must be at least 1")
    return RunConfig(ns.command, options)


@contextlib.contextmanager
def staged_outputs(targets):
    """Yield temp paths for ``targets``; move them into place only if the block succeeds."""
    targets = [Path(t) for t in targets]
    for t in targets:
        t.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=targets[0].parent))
    try:
        staged = [stage / f"{k}-{t.name}" for k, t in enumerate(targets)]
        yield staged
        for s, t in zip(staged, targets):
            if s.exists():
                os.replace(s, t)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def _require_file(path, what):
    if path is None:
        raise ConfigError(f"missing --{what}")
    if not Path(path).is_file():
        raise ConfigError(f"{what} file not found: {path}")
    return Path(path)


def _require(value, flag):
    if value is None:
        raise ConfigError(f"missing --{flag}")
    return value


def _write_log(log: ConvergenceLog, path, timings_path=None):
    """Iteration, stress and level (reproducible bytes); wall-clock times go to a separate file."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "stress", "level"])
        for r in log.records:
            w.writerow([r.iteration, repr(r.stress), r.level])
    if timings_path is not None:
        with open(timings_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "seconds", "level"])
            for r in log.records:
                w.writerow([r.iteration, f"{r.seconds:.6f}", r.level])


def _write_embedding_csv(X, path):
    np.savetxt(path, X, delimiter=",", fmt="%.17g")


def _solver_options(cfg: RunConfig, r_tol_default, maxiter_default) -> SolverOptions:
    return SolverOptions(a_tol=cfg.a_tol,
                         r_tol=r_tol_default if cfg.r_tol is None else cfg.r_tol,
                         maxiter=maxiter_default if cfg.maxiter is None else cfg.maxiter)


def _level_options(cfg: RunConfig, n_levels):
    if cfg.r_tol is None and cfg.maxiter is None and cfg.a_tol == 0:
        return None
    base = _solver_options(cfg, 1e-4, 100)
    final = _solver_options(cfg, 1e-5, 100)
    return [base] * (n_levels - 1) + [final]


def _full_problem(D, weights, dim) -> StressProblem:
    w = unit_weights(len(D)) if weights == "unit" else relative_weights(D)
    return StressProblem(D, w, dim)


def _load_table(path) -> np.ndarray:
    try:
        D = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: not a numeric CSV table ({exc})") from None
    if D.shape[0] != D.shape[1]:
        raise ConfigError(f"{path}: distance table must be square, got {D.shape}")
    return D


def _initial_embedding(cfg: RunConfig, n, D, mesh):
    if cfg.init is not None:
        X0 = np.loadtxt(_require_file(cfg.init, "init"), delimiter=",", ndmin=2)
        if X0.shape != (n, cfg.dim):
            raise ConfigError(f"initial embedding has shape {X0.shape}, expected {(n, cfg.dim)}")
        return X0
    if mesh is not None:
        X0 = np.zeros((n, cfg.dim))
        k = min(cfg.dim, 3)
        X0[:, :k] = mesh.vertices[:, :k]
        return X0
    rng = np.random.default_rng(cfg.seed)
    return rng.standard_normal((n, cfg.dim)) * (D.max() / 2.0 if D.size else 1.0)


def cmd_embed(cfg: RunConfig) -> int:
    path = _require_file(cfg.input, "input")
    out_dir = Path(_require(cfg.output_dir, "output-dir"))
    is_table = path.suffix.lower() == ".csv"
    mesh = None if is_table else load_mesh(path)
    solver = cfg.solver
    if is_table and solver in ("spectral", "multires"):
        raise ConfigError(f"solver {solver} needs a mesh input to build its eigenbasis")
    if solver == "multires":
        schedule = cfg.schedule()
    n = len(_load_table(path)) if is_table else mesh.n_vertices

    if solver in ("smacof", "smacof-rre"):
        D = _load_table(path) if is_table else MeshGeodesics(mesh).all_pairs()
        X0 = _initial_embedding(cfg, n, D, mesh)
        prob = _full_problem(D, cfg.weights, cfg.dim)
        opts = _solver_options(cfg, 1e-5, 5000)
        if solver == "smacof":
            X, log = smacof_solve(X0, prob, opts)
        else:
            X, log = smacof_rre_solve(X0, prob, opts, k=cfg.rre_window)
    elif solver == "spectral":
        X0 = _initial_embedding(cfg, n, None, mesh)
        q = cfg.q if cfg.q is not None else min(n, int(np.ceil(cfg.c * cfg.p)))
        X, log = spectral_smacof(mesh, X0, geodesic_problem_builder(cfg.weights, cfg.dim), cfg.p, q,
                                 _solver_options(cfg, 1e-4, 100), seed=cfg.seed, c=cfg.c,
                                 cache_dir=cfg.cache_dir)
    else:
        X0 = _initial_embedding(cfg, n, None, mesh)
        levels = schedule.resolve(n)
        X, log = multires_solve(mesh, X0, geodesic_problem_builder(cfg.weights, cfg.dim), schedule,
                                _level_options(cfg, len(levels)), seed=cfg.seed, cache_dir=cfg.cache_dir)

    names = ["embedding.csv", "log.csv", "timings.csv"]
    if mesh is not None and cfg.dim == 3:
        names.append("embedding.off")
    with staged_outputs([out_dir / nm for nm in names]) as staged:
        _write_embedding_csv(X, staged[0])
        _write_log(log, staged[1], staged[2])
        if len(staged) > 3:
            save_mesh(mesh.with_vertices(X), staged[3], format="off")
    logger.info("%s: %d points, %d iterations, final logged stress %.6g",
                solver, n, log.n_steps, log.records[-1].stress)
    return EXIT_OK


def cmd_canonical_form(cfg: RunConfig) -> int:
    mesh = load_mesh(_require_file(cfg.input, "input"))
    output = Path(_require(cfg.output, "output"))
    schedule = cfg.schedule()
    levels = schedule.resolve(mesh.n_vertices)
    X0 = mesh.vertices.copy()
    X, log = multires_solve(mesh, X0, geodesic_problem_builder(cfg.weights, 3), schedule,
                            _level_options(cfg, len(levels)), seed=cfg.seed, cache_dir=cfg.cache_dir)
    targets = [output] + ([Path(cfg.log)] if cfg.log else [])
    with staged_outputs(targets) as staged:
        save_mesh(mesh.with_vertices(X), staged[0], format=output.suffix.lstrip(".").lower() or "off")
        if cfg.log:
            _write_log(log, staged[1])
    logger.info("canonical form: %d levels, %d iterations", len(levels), log.n_steps)
    return EXIT_OK


BENCH_COLUMNS = ["solver", "iteration", "seconds", "stress", "level"]


def _time_to_reach(log: ConvergenceLog, target):
    for r in log.records:
        if r.stress <= target:
            return r.seconds
    return None


def cmd_bench(cfg: RunConfig) -> int:
    """Spectral first (records s*), then full solvers until their stress reaches s* or a cap."""
    mesh = load_mesh(_require_file(cfg.input, "input"))
    out_dir = Path(_require(cfg.output_dir, "output-dir"))
    n = mesh.n_vertices
    builder = geodesic_problem_builder(cfg.weights, 3)
    if cfg.solver == "multires":
        schedule = cfg.schedule()
        levels = schedule.resolve(n)

    # the dense geodesic table is an input shared by both solvers and is timed separately
    t = time.perf_counter()
    D = MeshGeodesics(mesh).all_pairs()
    apsp_seconds = time.perf_counter() - t
    full = _full_problem(D, cfg.weights, 3)
    X0 = mesh.vertices.copy()

    t = time.perf_counter()
    if cfg.solver == "multires":
        X, slog = multires_solve(mesh, X0, builder, schedule, _level_options(cfg, len(levels)),
                                 seed=cfg.seed, full_problem=full, cache_dir=cfg.cache_dir)
    else:
        q = cfg.q if cfg.q is not None else min(n, int(np.ceil(cfg.c * cfg.p)))
        X, slog = spectral_smacof(mesh, X0, builder, cfg.p, q, _solver_options(cfg, 1e-4, 100), seed=cfg.seed,
                                  c=cfg.c, full_problem=full, cache_dir=cfg.cache_dir)
    spectral_seconds = time.perf_counter() - t
    s_star = stress_value(X, full)

    cap = cfg.time_cap if cfg.time_cap is not None else cfg.cap_factor * spectral_seconds
    full_opts = SolverOptions(a_tol=0.0, r_tol=0.0, maxiter=cfg.maxiter)
    _, flog = smacof_solve(X0, full, full_opts, stop_stress=s_star, time_limit=cap)
    runs = {"smacof": flog}
    if cfg.rre:
        _, rlog = smacof_rre_solve(X0, full, full_opts, k=cfg.rre_window, stop_stress=s_star, time_limit=cap)
        runs["smacof-rre"] = rlog

    summary = {
        "n_points": n, "solver": cfg.solver, "weights": cfg.weights, "s_star": s_star,
        "initial_stress": stress_value(X0, full), "geodesic_table_seconds": apsp_seconds,
        "spectral_seconds": spectral_seconds, "spectral_setup_seconds": slog.setup_seconds,
        "time_cap_seconds": cap,
        "level_ends": [{"level": lv, "full_stress": s, "seconds": sec} for lv, s, sec in slog.boundaries],
    }
    for name, lg in runs.items():
        reach = _time_to_reach(lg, s_star)
        summary[name] = {
            "matched": reach is not None, "seconds_to_match": reach, "iterations": lg.n_steps,
            "final_stress": lg.records[-1].stress,
            "speedup": None if reach is None else reach / spectral_seconds,
            "speedup_lower_bound": (lg.records[-1].seconds / spectral_seconds) if reach is None else None,
        }
    summary["speedup"] = summary["smacof"]["speedup"]

    with staged_outputs([out_dir / "bench.csv", out_dir / "summary.json"]) as staged:
        with open(staged[0], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(BENCH_COLUMNS)
            for r in slog.records:
                w.writerow([cfg.solver, r.iteration, f"{r.seconds:.6f}", repr(r.stress), r.level])
            for lv, s, sec in slog.boundaries:
                w.writerow([f"{cfg.solver}-full", "", f"{sec:.6f}", repr(s), lv])
            for name, lg in runs.items():
                for r in lg.records:
                    w.writerow([name, r.iteration, f"{r.seconds:.6f}", repr(r.stress), r.level])
        with open(staged[1], "w") as fh:
            json.dump(summary, fh, indent=2)
    sp = summary["speedup"]
    print(f"s*={s_star:.6g}  spectral {spectral_seconds:.2f}s (setup {slog.setup_seconds:.2f}s)  "
          + (f"speedup {sp:.2f}x" if sp is not None else "full SMACOF did not reach s* within the cap"))
    return EXIT_OK


def cmd_retarget(cfg: RunConfig) -> int:
    source = load_image(_require_file(cfg.source, "source"))
    saliency = load_image(_require_file(cfg.saliency, "saliency"))
    out_dir = Path(_require(cfg.output_dir, "output-dir"))
    rows = cfg.grid_rows or max(2, source.height // 4)
    cols = cfg.grid_cols or max(3, source.width // 4)
    kwargs = dict(target_width_ratio=cfg.ratio, epsilon=cfg.epsilon, p=cfg.p, q=cfg.q, seed=cfg.seed,
                  stress_edges=cfg.stress_edges)
    if cfg.mu is not None:
        kwargs["mu"] = cfg.mu
    rc = RetargetConfig(source, saliency, rows, cols, **kwargs)
    problem = build_retarget_problem(rc)
    result = solve_constrained(problem, opts=SolverOptions(a_tol=0.0, r_tol=cfg.r_tol, maxiter=cfg.maxiter))
    image = warp_image(source, problem.mesh, result.X, width=rc.target_width)
    grid = np.column_stack([result.X, np.zeros(len(result.X))])
    report = {
        "source_size": [source.height, source.width], "output_size": [image.height, image.width],
        "grid": [rows, cols], "p": rc.p, "q": rc.q, "mu": rc.mu, "epsilon": rc.epsilon,
        "outer_iterations": result.log.n_steps, "full_grid_violations": result.full_violations,
        "min_sampled_difference": result.min_sampled_difference,
    }
    names = ["retargeted.ppm", "grid.off", "objective.csv", "report.json"]
    with staged_outputs([out_dir / nm for nm in names]) as staged:
        save_image(image, staged[0])
        save_mesh(TriangleMesh(grid, problem.mesh.faces), staged[1], format="off")
        with open(staged[2], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective"])
            for r in result.log.records:
                w.writerow([r.iteration, repr(r.stress)])
        with open(staged[3], "w") as fh:
            json.dump(report, fh, indent=2)
    if result.full_violations:
        logger.warning("%d grid spacings fall below epsilon between samples", result.full_violations)
    return EXIT_OK


def cmd_basis(cfg: RunConfig) -> int:
    mesh = load_mesh(_require_file(cfg.input, "input"))
    p = _require(cfg.p, "p")
    if not 1 <= p < mesh.n_vertices:
        raise ConfigError(f"p={p} must lie in [1, {mesh.n_vertices - 1}] for a {mesh.n_vertices}-vertex mesh")
    cache_dir = cfg.cache_dir
    t = time.perf_counter()
    hit = cache_dir is not None and (Path(cache_dir) / cache_key(mesh, p)).exists()
    if cache_dir is None:
        logger.warning("no cache directory (--cache-dir or $%s); the basis is not cached", CACHE_ENV)
        basis = eigenbasis(*cotan_matrices(mesh), p)
    else:
        basis = mesh_basis(mesh, p, cache_dir=cache_dir)
    seconds = time.perf_counter() - t
    logger.info("basis p=%d for %d vertices: cache %s, %.3fs", p, mesh.n_vertices, "hit" if hit else "miss",
                seconds)
    if cfg.output:
        with staged_outputs([cfg.output]) as staged:
            write_basis(basis, staged[0])
    lam = basis.values
    shown = ", ".join(f"{v:.6g}" for v in lam[:min(10, p)])
    print(f"p={p} N={mesh.n_vertices} cache={'hit' if hit else 'miss'} seconds={seconds:.3f}")
    print(f"lambda[0..{min(10, p) - 1}] = {shown}")
    print(f"lambda range [{lam.min():.6g}, {lam.max():.6g}]")
    return EXIT_OK


COMMANDS = {
    "embed": cmd_embed,
    "canonical-form": cmd_canonical_form,
    "bench": cmd_bench,
    "retarget": cmd_retarget,
    "basis": cmd_basis,
}

VALIDATION_ERRORS = (ConfigError, ValueError, FileNotFoundError, MeshFormatError, ImageFormatError)
# numerical failures that subclass ValueError but are not input problems
RUNTIME_ERRORS = (EigenSolverError, QPInfeasibleError, np.linalg.LinAlgError)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, RUNTIME_ERRORS):
        return EXIT_RUNTIME
    if isinstance(exc, VALIDATION_ERRORS):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def _run(cfg: RunConfig) -> int:
    if cfg.threads is None:
        return COMMANDS[cfg.command](cfg)
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=cfg.threads):
        return COMMANDS[cfg.command](cfg)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] in ("-h", "--help") or not argv:
        build_parser().print_help()
        return EXIT_OK if argv else EXIT_VALIDATION
    try:
        cfg = load_config(argv)
    except SystemExit as exc:
        # --help inside a subcommand
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.WARNING - 10 * min(cfg.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(cfg)
    except Exception as exc:
        code = exit_code(exc)
        if cfg.verbose >= 2:
            logger.exception("command failed")
        print(f"{'error' if code == EXIT_VALIDATION else 'runtime error'}: {exc}", file=sys.stderr)
        return code

if __name__ == "__main__":
    sys.exit(main())
