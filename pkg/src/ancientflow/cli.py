"""Command-line front end: ``ancientflow <command> [options]``.

Commands write CSV or JSON files into the output directory (``--outdir``,
else ``$ANCIENTFLOW_OUTDIR``, else the working directory).  Every file
embeds the configuration hash and the seed.  ``--config FILE`` reads flat
``key = value`` lines (an optional ``[section]`` header is ignored); keys are
option names with dashes or underscores, and flags given on the command line
take precedence.

Exit status is 0 on success, 1 when a check or a numerical solve fails and 2
for usage, configuration and I/O errors.

The numerical modules are imported after the arguments are parsed so that
``--threads`` can cap the BLAS thread pools before numpy loads.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

OUTDIR_ENV = "ANCIENTFLOW_OUTDIR"
THREAD_ENV = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

# options that locate files or control printing; they do not enter the hash
_UNHASHED = {"out", "outdir", "config", "no_timing", "input", "handler", "quiet"}

DEFAULT_SEEDS = {"mz": 42, "verify": 7}


class UsageError(Exception):
    """Bad configuration or input files; maps to exit status 2."""


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------


def emit_report(checks: Sequence, metadata: Optional[dict] = None, timing: bool = True) -> dict:
    """JSON-ready report for a list of :class:`~ancientflow.acceptance.Check`.

    Criterion results are flattened into their checks.  The document is
    ``{"checks": []}`` for no results; otherwise a ``summary`` with pass and
    fail counts is added, and ``metadata`` when given.  With
    ``timing=False`` runtimes are written as ``null`` so that repeated runs
    are byte-identical.
    """
    flat = []
    for c in checks:
        flat.extend(getattr(c, "checks", [c]))
    doc: Dict[str, object] = {"checks": [c.to_dict(timing) for c in flat]}
    if flat:
        passed = sum(1 for c in flat if c.passed)
        doc["summary"] = {"total": len(flat), "passed": passed, "failed": len(flat) - passed, "all_passed": passed == len(flat)}
    if metadata:
        doc["metadata"] = dict(metadata)
    return doc


def report_passed(doc: dict) -> bool:
    return all(c["pass"] for c in doc["checks"])


def config_hash(args: argparse.Namespace) -> str:
    """First 16 hex digits of the SHA-256 of the effective configuration."""
    items = {k: v for k, v in sorted(vars(args).items()) if k not in _UNHASHED}
    text = json.dumps(items, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _meta(args) -> dict:
    return {"command": args.command, "config_hash": config_hash(args), "seed": args.seed}


# ---------------------------------------------------------------------------
# file helpers
# ---------------------------------------------------------------------------


def _outdir(args) -> Path:
    return Path(args.outdir or os.environ.get(OUTDIR_ENV) or ".")


def _out_path(args, default: str) -> Path:
    p = Path(args.out) if args.out else Path(default)
    if not p.is_absolute():
        p = _outdir(args) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _read_surface(path: str):
    from .errors import ParameterError
    from .io import read_csv

    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    try:
        return read_csv(p)[0]
    except (ParameterError, ValueError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc


def _write_json(path: Path, doc: dict):
    from .io import dumps

    path.write_text(dumps(doc))


def _say(args, text: str):
    if not args.quiet:
        print(text)


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------


def cmd_bowl(args) -> int:
    from .io import write_csv
    from .soliton_solvers import solve_bowl

    b = solve_bowl(args.speed, args.rmax, args.h)
    out = _out_path(args, "bowl.csv")
    meta = _meta(args) | {"residual": f"{b.residual:.3e}", "richardson": f"{b.richardson:.3e}"}
    write_csv(out, b.profile, meta)
    _say(args, f"bowl c={args.speed:g}: {b.profile.grid.n} nodes, residual {b.residual:.2e} -> {out}")
    return EXIT_OK


def cmd_shrinker(args) -> int:
    from .io import write_csv
    from .soliton_solvers import shrinker_residual, solve_shrinker

    p = solve_shrinker(args.a, args.h)
    res = shrinker_residual(p)
    out = _out_path(args, "shrinker.csv")
    u0 = float(p.u[0])
    write_csv(out, p.as_radial(), _meta(args) | {"u0": repr(u0), "residual": f"{res:.3e}"})
    _say(args, f"shrinker a={args.a:g}: u(0)={u0:.6f}, residual {res:.2e} -> {out}")
    return EXIT_OK


def _step_params(args):
    from .mcf_solver import StepParams

    return StepParams(args.dt, scheme=args.scheme, boundary=args.boundary)


def _write_trajectory(args, tr, default: str) -> Path:
    from .io import write_csv

    out = _out_path(args, default)
    side = out.with_name(out.stem + "_states")
    side.mkdir(exist_ok=True)
    meta = _meta(args)
    states = []
    for k, s in enumerate(tr.states):
        name = f"state_{k:05d}.csv"
        write_csv(side / name, s.payload, meta | {"t": repr(s.t)})
        states.append({"t": s.t, "payload": f"{side.name}/{name}"})
    p = tr.params
    doc = {
        "params": {"dt": p.dt, "scheme": p.scheme, "boundary": p.boundary} if p else {},
        "states": states,
        "diagnostics": {k: v for k, v in tr.diagnostics.items()},
        "status": tr.status,
        "events": [list(e) for e in tr.events],
        "metadata": meta,
    }
    _write_json(out, doc)
    return out


def _evolve(args, s0, default: str) -> int:
    from .mcf_solver import evolve

    tr = evolve(s0, _step_params(args), args.tend, probes=args.probe or (), keep_every=args.keep_every)
    out = _write_trajectory(args, tr, default)
    _say(args, f"{len(tr)} states to t={tr.times[-1]:g} ({tr.status}) -> {out}")
    return EXIT_OK


def cmd_evolve(args) -> int:
    from .mcf_solver import FlowState

    surface = _read_surface(args.input)
    return _evolve(args, FlowState(args.t0, surface), "trajectory.json")


def _parse_mode(text: str):
    parts = text.split(",")
    if len(parts) != 3 or parts[2] not in ("c", "s"):
        raise UsageError(f"mode must look like n,m,c or n,m,s, got {text!r}")
    return int(parts[0]), int(parts[1]), parts[2]


def cmd_rescaled(args) -> int:
    from .geometry_core import CylinderGraph, Grid1D
    from .mcf_solver import FlowState
    from .spectral import HermiteFourierBasis

    if args.input:
        g = _read_surface(args.input)
        if not isinstance(g, CylinderGraph):
            raise UsageError("rescaled flow needs a theta,z,u cylinder graph")
    elif args.mode:
        md = _parse_mode(args.mode)
        basis = HermiteFourierBasis(max(4, md[0]), max(3, md[1]))
        g = basis.sample(md, args.ntheta, Grid1D(-args.zmax, args.zmax, args.nz), args.amplitude)
    else:
        raise UsageError("rescaled needs --input or --mode")
    return _evolve(args, FlowState(args.t0, g), "rescaled.json")


def cmd_spectrum(args) -> int:
    from .geometry_core import CylinderGraph
    from .spectral import HermiteFourierBasis, project, split

    g = _read_surface(args.input)
    if not isinstance(g, CylinderGraph):
        raise UsageError("spectrum needs a theta,z,u cylinder graph")
    basis = HermiteFourierBasis(args.nmax, args.mmax)
    sp = split(g)
    co = project(g, basis)
    doc = {
        "U_plus": sp.U_plus,
        "U_zero": sp.U_zero,
        "U_minus": sp.U_minus,
        "modes": [{"n": n, "m": m, "parity": par, "coeff": co[(n, m, par)]} for (n, m, par) in basis.modes],
        "metadata": _meta(args),
    }
    out = _out_path(args, "split.json")
    _write_json(out, doc)
    _say(args, f"U+={sp.U_plus:.3e} U0={sp.U_zero:.3e} U-={sp.U_minus:.3e} -> {out}")
    return EXIT_OK


def cmd_mz(args) -> int:
    from .dynamics_checks import mz_classify, mz_ensemble

    runs = mz_ensemble(args.coupling, args.runs, args.span, args.seed, dt=args.dt)
    rows = []
    for k, r in enumerate(runs):
        c = mz_classify(r)
        rows.append(
            {"run": k, "seed": r.seed, "status": r.status, "label": c.label, "plus_ratio": c.plus_ratio, "zero_ratio": c.zero_ratio}
        )
    counts: Dict[str, int] = {}
    for row in rows:
        counts[row["label"]] = counts.get(row["label"], 0) + 1
    undecided = [row for row in rows if row["label"] == "undecided"]
    worst = max(undecided, key=lambda r: min(r["plus_ratio"], r["zero_ratio"]), default=None)
    doc = {
        "counts": counts,
        "checks": [
            {
                "check": "all_runs_decided",
                "measured": len(undecided),
                "tolerance": 0,
                "pass": not undecided,
                "worst": None if worst is None else {"run": worst["run"], "plus_ratio": worst["plus_ratio"], "zero_ratio": worst["zero_ratio"]},
            }
        ],
        "runs": rows,
        "metadata": _meta(args),
    }
    out = _out_path(args, "mz.json")
    _write_json(out, doc)
    _say(args, " ".join(f"{k}={v}" for k, v in sorted(counts.items())) + f" -> {out}")
    return EXIT_OK


def cmd_psi(args) -> int:
    import numpy as np

    from .dynamics_checks import psi_closed_form, psi_zz

    spacing = np.geomspace if args.log else np.linspace
    z = spacing(args.zmin, args.zmax, args.nz)
    t = spacing(args.tmin, args.tmax, args.nt)
    Z, T = np.meshgrid(z, t, indexing="ij")
    vals, curv = psi_closed_form(Z, T), psi_zz(Z, T)
    out = _out_path(args, "psi.csv")
    lines = [f"# {k}: {v}" for k, v in sorted(_meta(args).items())]
    lines.append("z,t,psi,psi_zz")
    lines += [f"{a:.17g},{b:.17g},{c:.17g},{d:.17g}" for a, b, c, d in zip(Z.ravel(), T.ravel(), vals.ravel(), curv.ravel())]
    out.write_text("\n".join(lines) + "\n")
    _say(args, f"psi on {args.nz}x{args.nt} grid -> {out}")
    return EXIT_OK


def cmd_neck_improve(args) -> int:
    from .neck_analysis import neck_improvement_experiment, worst_over_dictionary

    if args.modes == "worst":
        factor, label, results = worst_over_dictionary(args.L, args.eps)
        doc = {
            "factor": factor,
            "worst_term": label,
            "terms": {k: {"factor": r.factor, "decay": r.decay, "predicted_decay": r.predicted_decay} for k, r in sorted(results.items())},
            "vhat_residual": max(r.vhat_residual for r in results.values()),
        }
    else:
        r = neck_improvement_experiment(args.L, args.eps, args.modes)
        factor = r.factor
        doc = {
            "factor": r.factor,
            "center_eps": r.center_eps,
            "decay": r.decay,
            "predicted_decay": r.predicted_decay,
            "vhat_residual": r.vhat_residual,
            "rotation_axis": None if r.rotation is None else r.rotation.axis,
        }
    doc |= {"L": args.L, "eps": args.eps, "modes": args.modes, "metadata": _meta(args)}
    out = _out_path(args, "neck_improve.json")
    _write_json(out, doc)
    _say(args, f"improvement factor {factor:.4f} (L={args.L:g}, eps={args.eps:g}) -> {out}")
    return EXIT_OK


def cmd_neck_fit(args) -> int:
    from .neck_analysis import NeckPatch, fit_neck

    patch = _read_surface(args.input)
    if not isinstance(patch, NeckPatch):
        raise UsageError("neck fit needs a theta,z,t,u patch")
    f = fit_neck(patch)
    doc = {
        "axis": f.axis,
        "center": f.center,
        "radius": f.radius,
        "eps_measured": f.eps_measured,
        "status": f.status,
        "fit_residual": f.fit_residual,
        "metadata": _meta(args),
    }
    out = _out_path(args, "neck_fit.json")
    _write_json(out, doc)
    _say(args, f"{f.status}: eps={f.eps_measured:.4g}, radius={f.radius:.6f} -> {out}")
    return EXIT_OK


def cmd_neck_patch(args) -> int:
    from .io import write_csv
    from .neck_analysis import bowl_neck_patch
    from .soliton_solvers import solve_bowl

    h = min(0.005, 2.0 / args.rmax)
    bowl = solve_bowl(1.0, args.rmax, h, richardson=False)
    patch = bowl_neck_patch(bowl, args.rcenter, args.L, ntheta=args.ntheta, nz=args.nz, nt=args.nt)
    out = _out_path(args, "patch.csv")
    write_csv(out, patch, _meta(args))
    _say(args, f"bowl patch at r={args.rcenter:g}, L={args.L:g} -> {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_suite

    only = None
    if args.only:
        try:
            only = [int(x) for x in args.only.split(",") if x.strip()]
        except ValueError as exc:
            raise UsageError(f"--only takes comma-separated criterion numbers: {exc}") from exc
    echo = None if args.quiet else print
    results = run_suite(args.suite, only=only, seed=args.seed, echo=echo)
    doc = emit_report(results, metadata=_meta(args) | {"suite": args.suite}, timing=not args.no_timing)
    out = _out_path(args, "report.json")
    _write_json(out, doc)
    ok = report_passed(doc)
    s = doc.get("summary", {"passed": 0, "total": 0})
    _say(args, f"{s['passed']}/{s['total']} checks passed -> {out}")
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    conv.__name__ = kind.__name__
    return conv


pos_float, pos_int = _positive(float), _positive(int)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--out", help="output file (relative paths resolve against the output directory)")
    g.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or .)")
    g.add_argument("--seed", type=int, default=None, help="random seed, recorded in every output")
    g.add_argument("--threads", type=pos_int, default=None, help="cap on BLAS threads")
    g.add_argument("--quiet", action="store_true", help="print nothing on success")
    return p


def _flow_options(p: argparse.ArgumentParser, t0: float, tend: Optional[float]):
    p.add_argument("--scheme", choices=("semi-implicit", "explicit"), default="semi-implicit")
    p.add_argument("--boundary", choices=("extrapolated", "fixed-value", "reflection"), default="extrapolated")
    p.add_argument("--dt", type=pos_float, default=1e-3)
    p.add_argument("--t0", type=float, default=t0, help="initial time")
    p.add_argument("--tend", type=float, default=tend, required=tend is None, help="final time")
    p.add_argument("--probe", action="append", choices=("H_max", "gaussian_area", "U_plus", "U_zero", "U_minus", "min_radius", "tip_height", "max_abs_u"))
    p.add_argument("--keep-every", type=pos_int, default=1, help="keep every k-th state")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ancientflow", description="Numerical experiments on ancient mean curvature flows.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("bowl", parents=[common], help="solve the bowl soliton")
    p.add_argument("--speed", type=pos_float, default=1.0)
    p.add_argument("--rmax", type=pos_float, default=20.0)
    p.add_argument("--h", type=pos_float, default=1e-3)
    p.set_defaults(handler=cmd_bowl)

    p = sub.add_parser("shrinker", parents=[common], help="solve the compact shrinker leaf Sigma_a")
    p.add_argument("--a", type=pos_float, default=10.0)
    p.add_argument("--h", type=pos_float, default=1e-2)
    p.set_defaults(handler=cmd_shrinker)

    p = sub.add_parser("evolve", parents=[common], help="evolve a profile CSV by mean curvature flow")
    p.add_argument("--input", required=True)
    _flow_options(p, 0.0, None)
    p.set_defaults(handler=cmd_evolve)

    p = sub.add_parser("rescaled", parents=[common], help="rescaled flow of a graph over the cylinder")
    p.add_argument("--input", help="theta,z,u CSV")
    p.add_argument("--mode", help="single initial mode n,m,c|s")
    p.add_argument("--amplitude", type=pos_float, default=1e-4)
    p.add_argument("--zmax", type=pos_float, default=12.0)
    p.add_argument("--nz", type=pos_int, default=481)
    p.add_argument("--ntheta", type=pos_int, default=16)
    _flow_options(p, 0.0, None)
    p.set_defaults(handler=cmd_rescaled)

    p = sub.add_parser("spectrum", parents=[common], help="split a cylinder graph into L-eigenspaces")
    p.add_argument("--input", required=True)
    p.add_argument("--nmax", type=int, default=4)
    p.add_argument("--mmax", type=int, default=3)
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("mz", parents=[common], help="seeded ensemble of the three-block mode system")
    p.add_argument("--runs", type=pos_int, default=100)
    p.add_argument("--span", type=pos_float, default=100.0)
    p.add_argument("--coupling", type=pos_float, default=0.1)
    p.add_argument("--dt", type=pos_float, default=0.01)
    p.set_defaults(handler=cmd_mz)

    p = sub.add_parser("psi", parents=[common], help="tabulate the heat-equation barrier psi")
    p.add_argument("--zmin", type=pos_float, default=1e-2)
    p.add_argument("--zmax", type=pos_float, default=50.0)
    p.add_argument("--tmin", type=pos_float, default=1e-2)
    p.add_argument("--tmax", type=pos_float, default=100.0)
    p.add_argument("--nz", type=pos_int, default=20)
    p.add_argument("--nt", type=pos_int, default=20)
    p.add_argument("--log", action="store_true", help="geometric instead of uniform spacing")
    p.set_defaults(handler=cmd_psi)

    neck = sub.add_parser("neck", help="neck fitting and the improvement experiment")
    nsub = neck.add_subparsers(dest="action", required=True, metavar="action")
    p = nsub.add_parser("improve", parents=[common], help="improvement factor of the model neck")
    p.add_argument("--L", type=pos_float, default=20.0)
    p.add_argument("--eps", type=pos_float, default=1e-3)
    p.add_argument("--modes", default="m2", help="mode mix such as m2, m1a+m3, or 'worst' for the dictionary")
    p.set_defaults(handler=cmd_neck_improve)
    p = nsub.add_parser("fit", parents=[common], help="fit a cylinder to a theta,z,t,u patch")
    p.add_argument("--input", required=True)
    p.set_defaults(handler=cmd_neck_fit)
    p = nsub.add_parser("patch", parents=[common], help="write a bowl neck patch as theta,z,t,u CSV")
    p.add_argument("--rcenter", type=pos_float, default=40.0)
    p.add_argument("--rmax", type=pos_float, default=400.0)
    p.add_argument("--L", type=pos_float, default=10.0)
    p.add_argument("--ntheta", type=pos_int, default=16)
    p.add_argument("--nz", type=pos_int, default=81)
    p.add_argument("--nt", type=pos_int, default=21)
    p.set_defaults(handler=cmd_neck_patch)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--suite", default="primary")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--no-timing", action="store_true", help="omit runtimes for byte-identical reports")
    p.set_defaults(handler=cmd_verify)
    return parser


def _leaf_parser(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> argparse.ArgumentParser:
    def choices(p):
        for a in p._actions:
            if isinstance(a, argparse._SubParsersAction):
                return a.choices
        return None

    leaf = choices(parser)[ns.command]
    if getattr(ns, "action", None):
        leaf = choices(leaf)[ns.action]
    return leaf


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_config(path: str) -> Dict[str, str]:
    """Flat ``key = value`` pairs; section headers are allowed and ignored."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"))
    text = p.read_text()
    if not text.lstrip().startswith("["):
        text = "[config]\n" + text
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    out: Dict[str, str] = {}
    for section in cp.sections():
        for k, v in cp.items(section):
            out[k.replace("-", "_")] = v
    return out


def _config_defaults(leaf: argparse.ArgumentParser, cfg: Dict[str, str]) -> dict:
    actions = {a.dest: a for a in leaf._actions if a.option_strings}
    defaults = {}
    for key, raw in cfg.items():
        a = actions.get(key)
        if a is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        try:
            if isinstance(a, argparse._StoreTrueAction):
                low = raw.strip().lower()
                if low not in _TRUE | _FALSE:
                    raise ValueError(f"expected a boolean, got {raw!r}")
                val = low in _TRUE
            elif isinstance(a, argparse._AppendAction):
                items = [x.strip() for x in raw.split(",") if x.strip()]
                val = [a.type(x) if a.type else x for x in items]
                bad = [x for x in val if a.choices and x not in a.choices]
                if bad:
                    raise ValueError(f"invalid choice {bad[0]!r}")
            else:
                val = a.type(raw) if a.type else raw
                if a.choices and val not in a.choices:
                    raise ValueError(f"invalid choice {val!r}")
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
        defaults[key] = val
    return defaults


def _relax_required(parser: argparse.ArgumentParser) -> List[tuple]:
    """Make every required option optional; returns ``(parser, action)`` pairs."""
    relaxed = []
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            for sub in a.choices.values():
                relaxed.extend(_relax_required(sub))
        elif a.option_strings and a.required:
            a.required = False
            relaxed.append((parser, a))
    return relaxed


def _parse(argv: List[str]) -> argparse.Namespace:
    parser = build_parser()
    # required options may come from the config file, so they are enforced
    # only after the file has been merged
    relaxed = _relax_required(parser)
    ns = parser.parse_args(argv)
    if ns.config:
        leaf = _leaf_parser(parser, ns)
        leaf.set_defaults(**_config_defaults(leaf, read_config(ns.config)))
        ns = parser.parse_args(argv)
    leaf = _leaf_parser(parser, ns)
    missing = [a.option_strings[0] for p, a in relaxed if p is leaf and getattr(ns, a.dest) is None]
    if missing:
        leaf.error("the following arguments are required: " + ", ".join(missing))
    if ns.seed is None:
        ns.seed = DEFAULT_SEEDS.get(ns.command, 0)
    return ns


def _cap_threads(n: Optional[int]):
    if n is None:
        return
    for var in THREAD_ENV:
        os.environ[var] = str(n)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` (default ``sys.argv[1:]``), dispatch and return the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"ancientflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _cap_threads(args.threads)

    from .errors import AncientFlowError, ParameterError

    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"ancientflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"ancientflow: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ancientflow: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AncientFlowError as exc:
        print(f"ancientflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
