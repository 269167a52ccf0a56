"""Command-line front end.

    momentrecon moments SPEC [--trajectory CSV | --horizon H] [--degree 8] [--out FILE]
    momentrecon reconstruct MOMENTS SPEC [--grid-t 101] [--grid-coord 101] [--joint-grid]
    momentrecon refine SPEC ASSEMBLED_CSV [--segments 40] [--relaxation-cost C] [--tol-cert 1e-2]
    momentrecon pipeline SPEC [all of the above]

SPEC is a problem file or the name of a bundled one (``double_integrator``,
``nonconvex_integrator``, ``van_der_pol``). Exit codes: 0 success, 2 usage,
3 unreadable or inconsistent input, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from . import csvio
from .momentfile import MomentFileError, load_moments, save_moments
from .oracle import OcpProblem, TrajectoryEscapeError, invariant_moments, occupation_moments
from .pipeline import (
    ReconstructionConfig,
    certify,
    check_dims,
    oracle_residual,
    reconstruct_joint,
    reconstruct_process,
)
from .problemfile import ProblemSpecError, load_problem
from .reconstruct import FitError, SupportError
from .refine import SimulationError, local_optimize

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


class ParseError(Exception):
    pass


class NumericalError(Exception):
    pass


def bundled_specs() -> dict[str, Path]:
    root = resources.files("momentrecon") / "specs"
    return {p.name[: -len(".spec")]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".spec")}


def resolve_spec(name: str):
    path = Path(name)
    if not path.exists():
        known = bundled_specs()
        if name not in known:
            raise UsageError(f"no problem file '{name}' (bundled: {', '.join(sorted(known))})")
        path = known[name]
    try:
        return load_problem(path)
    except ProblemSpecError as exc:
        raise ParseError(str(exc)) from None


def _out_dir(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _say(line: str) -> None:
    print(line, flush=True)


# -- stages -------------------------------------------------------------------


def stage_moments(spec, args):
    prob = spec.problem
    if isinstance(prob, OcpProblem):
        traj = Path(args.trajectory) if args.trajectory else spec.trajectory
        if traj is None:
            raise UsageError("an OCP needs --trajectory (or a 'trajectory' line in the problem file)")
        if not traj.exists():
            raise UsageError(f"trajectory file {traj} not found")
        try:
            proc = csvio.read_process_csv(traj)
            proc.validate(prob)
        except ValueError as exc:
            raise ParseError(f"{traj}: {exc}") from None
        y = occupation_moments(proc, args.degree, box=prob.box, meta={"problem": prob.name})
    else:
        try:
            y = invariant_moments(prob.f, prob.x_init, args.horizon, args.degree, prob.x_box, dt=args.dt)
        except TrajectoryEscapeError as exc:
            raise NumericalError(str(exc)) from None
        y.meta["problem"] = prob.name
    return y


def stage_reconstruct(spec, y, args, out: Path):
    prob = spec.problem
    if args.joint_grid or not isinstance(prob, OcpProblem):
        if isinstance(prob, OcpProblem):
            check_dims(y, prob)
        atoms = reconstruct_joint(y, args.grid_coord, args.threshold)
        csvio.write_atoms_csv(out / "support.csv", atoms)
        _say(f"joint fit: lambda*={atoms.fit_error:.6e} atoms={len(atoms)} retained_mass={1 - atoms.discarded_mass:.6f}")
        return None
    config = ReconstructionConfig(args.grid_t, args.grid_coord, args.threshold)
    rec = reconstruct_process(y, prob, config)
    for s in rec.series:
        csvio.write_series_csv(out / f"series_{s.coord}.csv", [s])
        csvio.write_atoms_csv(out / f"atoms_{s.coord}.csv", s.atoms)
        flags = ",".join(f"{t:.6g}" for t in s.multimodal_times) or "-"
        _say(
            f"{s.coord}: lambda*={s.fit_error:.6e} waypoints={len(s)} "
            f"retained_mass={1 - s.discarded_mass:.6f} multimodal_times={flags}"
        )
    csvio.write_process_csv(out / "assembled.csv", rec.assembled.process)
    _say(f"assembled: t=[{rec.t_span[0]:.6g}, {rec.t_span[1]:.6g}] samples={len(rec.assembled.process.times)}")
    return rec.assembled.process


def stage_refine(spec, init, args, out: Path) -> int:
    prob = spec.problem
    if not isinstance(prob, OcpProblem):
        raise UsageError("refinement applies to optimal control problems only")
    try:
        res = local_optimize(prob, init, N=args.segments)
    except SimulationError as exc:
        raise NumericalError(str(exc)) from None
    csvio.write_process_csv(out / "refined.csv", res.trajectory.process())
    _say(
        f"refined: cost={res.cost:.9g} duration={res.parameterization.duration:.9g} "
        f"terminal_violation={res.terminal_violation:.3e} path_violation={res.path_violation:.3e} "
        f"converged={'yes' if res.converged else 'no'}"
    )
    if args.relaxation_cost is not None:
        _say(certify(res.cost, args.relaxation_cost, args.tol_cert).line())
    if not res.converged:
        _say("error: refinement did not reach the feasibility tolerance (best iterate written)")
        return EXIT_NUMERIC
    return EXIT_OK


# -- commands -----------------------------------------------------------------


def cmd_moments(args) -> int:
    spec = resolve_spec(args.spec)
    y = stage_moments(spec, args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_moments(y, out)
    _say(f"moments: {len(y.values)} degree={y.degree} y0={y.mass:.12g}")
    _say(f"adjoint residual: {oracle_residual(y, spec.problem):.3e}")
    return EXIT_OK


def _load_moment_file(path):
    if not Path(path).exists():
        raise UsageError(f"moment file {path} not found")
    try:
        return load_moments(path)
    except MomentFileError as exc:
        raise ParseError(str(exc)) from None


def cmd_reconstruct(args) -> int:
    y = _load_moment_file(args.moments)
    spec = resolve_spec(args.spec)
    try:
        if isinstance(spec.problem, OcpProblem):
            check_dims(y, spec.problem)
        elif y.q != spec.problem.n:
            raise ValueError(f"moment file has {y.q} coordinates, problem has {spec.problem.n} states")
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    stage_reconstruct(spec, y, args, _out_dir(args))
    return EXIT_OK


def cmd_refine(args) -> int:
    spec = resolve_spec(args.spec)
    path = Path(args.assembled)
    if not path.exists():
        raise UsageError(f"assembled process file {path} not found")
    try:
        init = csvio.read_process_csv(path)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return stage_refine(spec, init, args, _out_dir(args))


def cmd_pipeline(args) -> int:
    spec = resolve_spec(args.spec)
    out = _out_dir(args)
    stage = "moments"
    try:
        y = stage_moments(spec, args)
        save_moments(y, out / "moments.txt")
        _say(f"moments: {len(y.values)} degree={y.degree} y0={y.mass:.12g}")
        _say(f"adjoint residual: {oracle_residual(y, spec.problem):.3e}")
        stage = "reconstruct"
        init = stage_reconstruct(spec, y, args, out)
        if init is None:
            return EXIT_OK
        stage = "refine"
        return stage_refine(spec, init, args, out)
    except (UsageError, ParseError, NumericalError) as exc:
        raise type(exc)(f"stage {stage}: {exc}") from None
    except (FitError, SupportError) as exc:
        raise NumericalError(f"stage {stage}: {exc}") from None


# -- parser -------------------------------------------------------------------


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def _even_degree(text):
    v = int(text)
    if v < 2 or v % 2:
        raise argparse.ArgumentTypeError(f"degree must be even and >= 2, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="momentrecon", description="Trajectory recovery from occupation-measure moments.")
    sub = p.add_subparsers(dest="command", required=True)

    def moment_opts(q):
        q.add_argument("--degree", type=_even_degree, default=8, help="moment degree 2r (default 8)")
        q.add_argument("--trajectory", help="process CSV (coord,time,value,weight) for OCP moments")
        q.add_argument("--horizon", type=_positive(float), default=200.0, help="simulation length for invariant measures")
        q.add_argument("--dt", type=_positive(float), default=0.005, help="RK4 step for invariant measures")

    def recon_opts(q):
        q.add_argument("--grid-t", type=int, default=101, help="time nodes of each marginal grid")
        q.add_argument("--grid-coord", type=int, default=101, help="coordinate nodes per axis")
        q.add_argument("--threshold", type=_positive(float), default=1e-3, help="relative weight threshold")
        q.add_argument("--joint-grid", action="store_true", help="fit on the full product grid instead of marginals")

    def refine_opts(q):
        q.add_argument("--segments", type=_positive(int), default=40, help="piecewise-constant control segments")
        q.add_argument("--relaxation-cost", type=float, help="lower bound to certify against")
        q.add_argument("--tol-cert", type=_positive(float), default=1e-2, help="relative certification tolerance")

    q = sub.add_parser("moments", help="generate a moment file")
    q.add_argument("spec")
    q.add_argument("--out", default="moments.txt")
    moment_opts(q)
    q.set_defaults(func=cmd_moments)

    q = sub.add_parser("reconstruct", help="recover time series from a moment file")
    q.add_argument("moments")
    q.add_argument("spec")
    q.add_argument("--out-dir", default="out")
    recon_opts(q)
    q.set_defaults(func=cmd_reconstruct)

    q = sub.add_parser("refine", help="refine an assembled process and certify it")
    q.add_argument("spec")
    q.add_argument("assembled")
    q.add_argument("--out-dir", default="out")
    refine_opts(q)
    q.set_defaults(func=cmd_refine)

    q = sub.add_parser("pipeline", help="moments, reconstruction and refinement in one go")
    q.add_argument("spec")
    q.add_argument("--out-dir", default="out")
    moment_opts(q)
    recon_opts(q)
    refine_opts(q)
    q.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NumericalError, FitError, SupportError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
