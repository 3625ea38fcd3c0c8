"""``mengerlab`` command line.

Subcommands: ``saw``, ``energy {mp,ip,up,ep}``, ``beta``,
``diverge {curve,manifold}`` and ``cone-check``.  A JSON ``--config`` file
may supply any flag (by its long name, dashes or underscores); flags given on
the command line win.  Exit status: 0 success, 1 input error, 2 failed
precondition.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import curves as cv
from . import manifolds as mf
from . import saw as sawmod
from .divergence import LowerBoundConfig, curve_lowerbound, manifold_lowerbound, manifold_tuple_stats
from .errors import InputError, PreconditionError
from .report import SCHEMA_VERSION, fmt


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def parse_levels(text: str) -> List[int]:
    """``"1..6"`` or ``"2,3,5"`` (or a JSON list) to a list of ints."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    s = str(text).strip()
    try:
        if ".." in s:
            a, b = s.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"bad level range {text!r}; use e.g. 1..6 or 1,2,4") from None


def _add_common(p: argparse.ArgumentParser, S):
    p.add_argument("--config", default=S(None), help="JSON file with default values for any flag")
    p.add_argument("--seed", type=int, default=S(0))
    p.add_argument("--threads", type=int, default=S(None), help="worker cap (default $MENGERLAB_THREADS or 1)")
    p.add_argument("--out", default=S(None), help="output file (default stdout)")


def _add_saw(p: argparse.ArgumentParser, S, N: int = 100):
    p.add_argument("--N", type=int, default=S(N))
    p.add_argument("--alpha", type=float, default=S(0.5))
    p.add_argument("--K", type=int, default=S(None), help="truncation level (default from --tolerance)")
    p.add_argument("--tolerance", type=float, default=S(sawmod.DEFAULT_TOLERANCE))


def build_parser(suppress: bool = False) -> argparse.ArgumentParser:
    S = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    root = _Parser(prog="mengerlab", description="Menger curvature energies and saw counterexamples")
    root.add_argument("--version", action="version", version=__version__)
    sub = root.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("saw", help="tabulate the saw f and its antiderivative F")
    _add_common(p, S)
    _add_saw(p, S)
    p.add_argument("--grid", type=int, default=S(1024), help="rows on [0, 1], endpoints included")

    pe = sub.add_parser("energy", help="curve energies M_p, I_p, U_p or manifold energy E_p")
    esub = pe.add_subparsers(dest="energy", parser_class=_Parser)
    esub.required = True
    for name in ("mp", "ip", "up", "ep"):
        q = esub.add_parser(name)
        _add_common(q, S)
        _add_saw(q, S)
        q.add_argument("--p", type=float, default=S(2.0))
        q.add_argument("--m", type=int, default=S(2 if name == "ep" else 1))
        if name == "ep":
            q.add_argument("--gen", default=S("flat-patch"), choices=["flat-patch", "sphere-patch", "saw-graph"])
            q.add_argument("--samples", type=int, default=S(200_000))
            q.add_argument("--streams", type=int, default=S(8))
            q.add_argument("--r", type=float, default=S(1.0), help="sphere radius")
            q.add_argument("--half-width", type=float, default=S(0.5))
            q.add_argument("--lam", type=float, default=S(1.0), help="scale the manifold by this factor")
            q.add_argument("--shells", action="store_true", default=S(False))
            q.add_argument("--k-max", type=int, default=S(8))
            q.add_argument("--samples-per-shell", type=int, default=S(20_000))
        else:
            q.add_argument("--gen", default=S("circle"), choices=["circle", "segment", "ellipse", "saw-graph"])
            q.add_argument("--csv", default=S(None), help="curve CSV with rows t,x1..xn")
            q.add_argument("--closed", action="store_true", default=S(False))
            q.add_argument("--n", type=int, default=S(200))
            q.add_argument("--r", type=float, default=S(1.0), help="circle radius")
            q.add_argument("--a", type=float, default=S(1.0), help="ellipse semi-axis")
            q.add_argument("--b", type=float, default=S(0.5), help="ellipse semi-axis")
            q.add_argument("--scheme", default=S("auto"), choices=["auto", "riemann", "mc"])
            q.add_argument("--samples", type=int, default=S(200_000))
            q.add_argument("--exclusion", type=int, default=S(0))
            q.add_argument("--shells", action="store_true", default=S(False))
            q.add_argument("--arclength-weights", action="store_true", default=S(False))

    pb = sub.add_parser("beta", help="beta-number decay fit and the K <= C beta / d check")
    _add_common(pb, S)
    _add_saw(pb, S, N=10)
    pb.add_argument("--gen", default=S("saw-graph"), choices=["flat-patch", "sphere-patch", "saw-graph"])
    pb.add_argument("--m", type=int, default=S(1))
    pb.add_argument("--r", type=float, default=S(1.0), help="sphere radius")
    pb.add_argument("--half-width", type=float, default=S(0.5))
    pb.add_argument("--centers", type=int, default=S(64))
    pb.add_argument("--radii", default=S("3..12"), help="dyadic exponents j for r = 2^-j")
    pb.add_argument("--tuples", type=int, default=S(10_000))

    pd = sub.add_parser("diverge", help="per-level lower bounds on the saw graphs")
    dsub = pd.add_subparsers(dest="target", parser_class=_Parser)
    dsub.required = True
    for name, N, lv in (("curve", 100, "1..6"), ("manifold", 10, "1..4")):
        q = dsub.add_parser(name)
        _add_common(q, S)
        _add_saw(q, S, N=N)
        q.add_argument("--p", type=float, default=S(4.0 if name == "curve" else 12.0))
        if name == "curve":
            q.add_argument("--k", default=S(lv), help="levels, e.g. 1..6")
        else:
            q.add_argument("--n", default=S(lv), help="levels, e.g. 1..4")
            q.add_argument("--m", type=int, default=S(2))
            q.add_argument("--delta", type=float, default=S(1.0 / 32.0))
            q.add_argument("--eps-slope", type=float, default=S(0.1))
            q.add_argument("--A", type=float, default=S(None))
            q.add_argument("--stats-samples", type=int, default=S(10_000))
        q.add_argument("--cells", type=int, default=S(64))
        q.add_argument("--samples", type=int, default=S(64 if name == "curve" else 1024))
        q.add_argument("--gap-triples", type=int, default=S(1000))
        q.add_argument("--csv-out", default=S(None), help="per-level CSV path")

    pc = sub.add_parser("cone-check", help="secant cone inclusion test")
    _add_common(pc, S)
    _add_saw(pc, S, N=2)
    pc.add_argument("--gen", default=S("saw-graph"), choices=["circle", "segment", "saw-graph"])
    pc.add_argument("--n", type=int, default=S(400))
    pc.add_argument("--r", type=float, default=S(1.0))
    pc.add_argument("--x0", type=float, default=S(0.3), help="left end of the saw window")
    pc.add_argument("--width", type=float, default=S(4e-4), help="saw window width")
    pc.add_argument("--C", type=float, default=S(None), help="Hoelder constant (default: saw formula / 1 / 1)")
    pc.add_argument("--holder-alpha", type=float, default=S(None), help="exponent (default: saw alpha, 1 for circle)")
    pc.add_argument("--epsilon", type=float, default=S(None), help="pair scale (default 3e-4 saw, 0.3 r circle, 0.3 segment)")
    return root


def _command_key(ns) -> tuple:
    return tuple(getattr(ns, k) for k in ("command", "energy", "target") if getattr(ns, k, None))


def parse(argv: Sequence[str]) -> argparse.Namespace:
    """Defaults, then the ``--config`` file, then explicit flags."""
    argv = list(argv)
    ns = build_parser().parse_args(argv)
    explicit = vars(build_parser(suppress=True).parse_args(argv))
    if ns.config:
        try:
            with open(ns.config) as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(conf, dict):
            raise InputError("config file must hold a JSON object")
        known = set(vars(ns))
        for key, val in conf.items():
            dest = key.replace("-", "_").lstrip("_")
            if dest in ("command", "energy", "target", "config"):
                continue
            if dest not in known:
                raise InputError(f"config key {key!r} is not an option of this command")
            if dest not in explicit:
                setattr(ns, dest, val)
    return ns


def _saw_params(ns) -> sawmod.SawParams:
    if ns.K is not None:
        return sawmod.SawParams(int(ns.N), float(ns.alpha), int(ns.K))
    return sawmod.SawParams.from_tolerance(int(ns.N), float(ns.alpha), float(ns.tolerance))


def _run_config(ns) -> dict:
    d = {k: v for k, v in sorted(vars(ns).items()) if k not in ("config", "out", "csv_out", "threads")}
    d["schema_version"] = SCHEMA_VERSION
    return d


def _emit(ns, payload: dict, stdout) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------------------


def cmd_saw(ns, stdout, stderr) -> int:
    params = _saw_params(ns)
    if ns.grid < 2:
        raise InputError("--grid must be at least 2")
    x = np.linspace(0.0, 1.0, int(ns.grid))
    f, _ = sawmod.saw_sum(x, params)
    F, bound = sawmod.saw_antiderivative(x, params)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "f", "F", "error_bound"])
    for row in zip(x, f, F, bound):
        w.writerow([fmt(v) for v in row])
    H = sawmod.hoelder_constant(params)
    if ns.out:
        with open(ns.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
        stdout.write(f"hoelder_constant {fmt(H)}\n")
    else:
        stdout.write(buf.getvalue())
        stderr.write(f"hoelder_constant {fmt(H)}\n")
    return 0


def _curve_from(ns) -> cv.SampledCurve:
    if ns.csv:
        return cv.from_csv(ns.csv, closed=bool(ns.closed))
    if ns.gen == "circle":
        return cv.circle(ns.r, ns.n)
    if ns.gen == "segment":
        return cv.segment(n=ns.n)
    if ns.gen == "ellipse":
        return cv.ellipse(ns.a, ns.b, ns.n)
    return cv.saw_graph(_saw_params(ns), ns.n, arclength_weights=bool(ns.arclength_weights))


def _manifold_from(ns) -> mf.SampledManifold:
    if ns.gen == "flat-patch":
        return mf.flat_patch(ns.m)
    if ns.gen == "sphere-patch":
        return mf.sphere_patch(ns.m, ns.r, ns.half_width)
    return mf.saw_graph(ns.m, _saw_params(ns))


def cmd_energy(ns, stdout, stderr) -> int:
    out = {"config": _run_config(ns), "schema_version": SCHEMA_VERSION, "kind": ns.energy}
    if ns.energy == "ep":
        M = _manifold_from(ns)
        if ns.lam != 1.0:
            M = M.scaled(ns.lam)
        est = mf.energy_ep_mc(M, ns.p, ns.samples, ns.seed, ns.streams, threads=ns.threads)
        out.update(energy=est.estimate, std_error=est.std_error, scheme="mc", samples=est.samples)
        if ns.shells:
            rep = mf.energy_ep_shells(M, ns.p, mf.ShellSpec.for_manifold(M, ns.k_max), ns.samples_per_shell, ns.seed, threads=ns.threads)
            out["shells"] = [{"level": r.level, "sum": r.value, "std_error": r.std_error} for r in rep.levels]
            out["shell_remainder"] = rep.meta["remainder"]
    else:
        curve = _curve_from(ns)
        q = cv.QuadratureSpec(ns.scheme, ns.samples, ns.seed, ns.exclusion)
        kind = {"mp": "M", "ip": "I", "up": "U"}[ns.energy]
        res = cv.energy_report(curve, ns.p, q, (kind,), ns.threads)[kind]
        out.update(energy=res.energy, scheme=res.scheme, samples=res.samples)
        if res.std_error is not None:
            out["std_error"] = res.std_error
        if ns.shells and res.shells is not None:
            out["shells"] = [{"level": r.level, "sum": r.value, "pairs": r.cells} for r in res.shells.levels]
    _emit(ns, out, stdout)
    return 0


def cmd_beta(ns, stdout, stderr) -> int:
    M = _manifold_from(ns)
    radii = [2.0 ** -j for j in parse_levels(ns.radii)]
    fit = mf.beta_scaling_fit(M, ns.centers, radii, threads=ns.threads)
    dc = mf.dc_beta_bound_check(M, ns.tuples, ns.seed, threads=ns.threads)
    out = {
        "config": _run_config(ns), "schema_version": SCHEMA_VERSION,
        "slope": fit.slope, "C_fit": fit.C_fit, "violations": fit.violations,
        "degenerate_flat": fit.degenerate_flat, "lemma43_max_ratio": dc.max_ratio_normalized,
        "dc_violations": dc.violations, "C_paper": dc.C_paper,
    }
    _emit(ns, out, stdout)
    return 0


def cmd_diverge(ns, stdout, stderr) -> int:
    params = _saw_params(ns)
    if ns.target == "curve":
        cfg = LowerBoundConfig(
            params, ns.p, tuple(parse_levels(ns.k)), m=1, cells_per_level=ns.cells,
            samples_per_cell=ns.samples, gap_triples=ns.gap_triples, seed=ns.seed, threads=ns.threads,
        )
        rep = curve_lowerbound(cfg)
    else:
        cfg = LowerBoundConfig(
            params, ns.p, tuple(parse_levels(ns.n)), m=ns.m, delta=ns.delta, eps_slope=ns.eps_slope, A=ns.A,
            cells_per_level=ns.cells, samples_per_cell=ns.samples, gap_triples=ns.gap_triples,
            seed=ns.seed, threads=ns.threads,
        )
        rep = manifold_lowerbound(cfg)
        rep.meta["tuple_stats"] = [manifold_tuple_stats(cfg, n, ns.stats_samples).to_dict() for n in cfg.levels]
    rep.meta["run_config"] = _run_config(ns)
    if ns.csv_out:
        with open(ns.csv_out, "w", newline="") as fh:
            fh.write(rep.to_csv())
    text = rep.to_json() + "\n"
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    (stderr if not ns.out else stdout).write(
        f"{rep.verdict} fitted={rep.fitted_exponent:.4f} predicted={rep.predicted_exponent:.4f}\n"
    )
    return 0


def cmd_cone(ns, stdout, stderr) -> int:
    if ns.gen == "saw-graph":
        params = _saw_params(ns)
        curve = cv.saw_graph(params, ns.n, (ns.x0, ns.x0 + ns.width))
        C = ns.C if ns.C is not None else sawmod.hoelder_constant(params)
        alpha = ns.holder_alpha if ns.holder_alpha is not None else params.alpha
    elif ns.gen == "circle":
        curve = cv.circle(ns.r, ns.n)
        C = ns.C if ns.C is not None else 1.0 / ns.r
        alpha = ns.holder_alpha if ns.holder_alpha is not None else 1.0
    else:
        curve = cv.segment(n=ns.n)
        C = ns.C if ns.C is not None else 1.0
        alpha = ns.holder_alpha if ns.holder_alpha is not None else 1.0
    eps = ns.epsilon if ns.epsilon is not None else {"saw-graph": 3e-4, "circle": 0.3 * ns.r, "segment": 0.3}[ns.gen]
    rep = cv.secant_cone_check(curve, alpha, C, eps)
    _emit(ns, {"config": _run_config(ns), "schema_version": SCHEMA_VERSION, **rep.to_dict()}, stdout)
    return 0


COMMANDS = {"saw": cmd_saw, "energy": cmd_energy, "beta": cmd_beta, "diverge": cmd_diverge, "cone-check": cmd_cone}


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = parse(argv)
        if ns.seed < 0:
            raise InputError("--seed must be nonnegative")
        return COMMANDS[ns.command](ns, stdout, stderr)
    except PreconditionError as exc:
        stderr.write(f"precondition failed: {exc}\n")
        return 2
    except InputError as exc:
        stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
