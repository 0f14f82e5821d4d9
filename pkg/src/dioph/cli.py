"""Command-line entry point: ``dioph <command> [options]``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .constructions import SpectrumTarget, construct, parse_exponent
from .errors import (
    DegeneratePair,
    DiophError,
    FormatError,
    InsufficientData,
    PrecisionBudgetExceeded,
    QTooLarge,
)
from .exponents import (
    DEFAULT_GRID,
    format_profile,
    lambda_est,
    lambda_hat_est,
    lambda_under_est,
)
from .minimal_points import Gauge, PairTarget, enumerate_points, load_points, save_points
from .numbers import format_exact, parse_exact
from .parametric import (
    Q_MAX_DESK,
    kappa_of_profile,
    profile,
    profile_csv,
    q_grid,
)
from .render import render_svg
from .three_system import kappa, kappa_alpha, load_system, save_system

EXIT_INVALID = 2
EXIT_PRECISION = 3
EXIT_DEGENERATE = 4
EXIT_INSUFFICIENT = 5
EXIT_Q_TOO_LARGE = 6


def write_manifest(out: Path, command: str, inputs: dict, seed: int) -> None:
    """Sidecar ``<out>.manifest.json``; the timestamp is its only non-deterministic field."""
    doc = {
        "command": command,
        "inputs": {k: inputs[k] for k in sorted(inputs)},
        "tool_version": __version__,
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(doc, indent=1) + "\n")


def _inputs(args) -> dict:
    skip = {"func", "config"}
    return {k: (str(v) if v is not None else None) for k, v in vars(args).items() if k not in skip}


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return format_exact(v)


# ---------------------------------------------------------------------------
# commands


def cmd_minpoints(args) -> int:
    pair = PairTarget.parse(args.xi, args.eta)
    if args.max_x0 < 0:
        raise ValueError("--max-x0 must be non-negative")
    seq = enumerate_points(pair, args.max_x0, Gauge(args.gauge.upper()), Fraction(args.precision))
    save_points(seq, args.out)
    write_manifest(Path(args.out), "minpoints", _inputs(args), args.seed)
    print(f"{len(seq)} minimal points written to {args.out}")
    return 0


def cmd_exponents(args) -> int:
    seq = load_points(args.points)
    lam = lambda_est(seq)
    hat = lambda_hat_est(seq)
    under, prof = lambda_under_est(seq, args.eps_grid)
    text = format_profile(lam, hat, under, prof)
    sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(text)
        write_manifest(Path(args.report), "exponents", _inputs(args), args.seed)
    return 0


def cmd_construct(args) -> int:
    target = SpectrumTarget(parse_exponent(args.lam), parse_exponent(args.lam_under))
    system = construct(target, args.peaks, args.case)
    save_system(system, args.out)
    write_manifest(Path(args.out), "construct", _inputs(args), args.seed)
    m = system.manifest
    print("case " + str(m["case"]))
    for k in sorted(m):
        if k != "case":
            print(f"{k} = {_fmt(m[k]) if not isinstance(m[k], (str, int)) else m[k]}")
    return 0


def cmd_kappa(args) -> int:
    system = load_system(args.system)
    f = system.components[args.component - 1]
    if args.alpha is not None:
        rep = kappa_alpha(f, parse_exponent(args.alpha))
        print("i\tq_i\tr_i\tratio")
        for i, (q, r, t) in enumerate(zip(rep.peaks, rep.r, rep.ratios)):
            print(f"{i}\t{format_exact(q)}\t{format_exact(r)}\t{format_exact(t)}")
        print(f"psi_sup = {format_exact(rep.psi_sup)}")
        print(f"psi_inf = {format_exact(rep.psi_inf)}")
        print(f"kappa_alpha({format_exact(rep.alpha)}) = {format_exact(rep.kappa_alpha)}")
        return 0
    res = kappa(f)
    print("depth\tkappa_alpha")
    for m, v in enumerate(res.grid, start=1):
        print(f"{m}\t{format_exact(v)}")
    flag = "exact" if res.exact else "tail minimum"
    print(f"kappa = {format_exact(res.value)} ({flag}, converged={str(res.converged).lower()})")
    return 0


def cmd_render(args) -> int:
    if args.width <= 0 or args.height <= 0:
        raise ValueError("--width and --height must be positive")
    system = load_system(args.system)
    lo = hi = None
    if args.q_range:
        try:
            a, b = args.q_range.split(":")
            lo, hi = parse_exact(a), parse_exact(b)
        except ValueError as e:
            raise ValueError(f"--q-range must look like lo:hi, got {args.q_range!r}") from e
    Path(args.svg).write_text(render_svg(system, args.width, args.height, lo, hi))
    write_manifest(Path(args.svg), "render", _inputs(args), args.seed)
    return 0


def cmd_parametric(args) -> int:
    if args.q_max > Q_MAX_DESK:
        raise QTooLarge(f"--q-max {args.q_max} exceeds {Q_MAX_DESK}")
    pair = PairTarget.parse(args.xi, args.eta)
    if args.points:
        pts = load_points(args.points)
        if pts.gauge is not Gauge.NORM:
            raise ValueError("--points must hold NORM-gauge minimal points")
    else:
        pts = enumerate_points(pair, args.max_x0, Gauge.NORM)
    prof = profile(pair, q_grid(args.q_min, args.q_max, args.step), pts)
    Path(args.out).write_text(profile_csv(prof))
    write_manifest(Path(args.out), "parametric", _inputs(args), args.seed)
    print(f"samples = {len(prof.samples)}")
    print(f"minkowski_gap_sup = {prof.minkowski_gap_sup:.6f} slope = {prof.minkowski_slope:.6f}")
    print(f"duality_gap_sup = {prof.duality_gap_sup:.6f} slope = {prof.duality_slope:.6f}")
    trend = "non-trending" if abs(prof.duality_slope) <= 0.01 else "trending"
    print(f"duality gap {trend}")
    print("psi_bar = " + ", ".join(f"{v:.6f}" for v in prof.psi_bars))
    print("psi_under = " + ", ".join(f"{v:.6f}" for v in prof.psi_unders))
    try:
        lam = lambda_est(pts).value
        lu = lambda_under_est(pts)[0].value
        print(f"dictionary psi_bar_3 = {prof.psi_bars[2]:.6f} vs lambda/(1+lambda) = {lam / (1 + lam):.6f}")
        k = float(kappa_of_profile(prof).value)
        print(f"dictionary kappa(L3) = {k:.6f} vs lambda_under/(1+lambda_under) = {lu / (1 + lu):.6f}")
    except InsufficientData as e:
        print(f"dictionary comparison unavailable: {e}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option defaults; flags override it")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dioph", description="Rational approximation exponents and 3-systems.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("minpoints", help="enumerate minimal points")
    p.add_argument("--xi", required=True)
    p.add_argument("--eta", required=True)
    p.add_argument("--max-x0", type=int, required=True)
    p.add_argument("--gauge", choices=["height", "norm", "HEIGHT", "NORM"], default="height")
    p.add_argument("--precision", default="1/1000000000000000")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_minpoints)

    p = sub.add_parser("exponents", help="estimate exponents from a points file")
    p.add_argument("--points", required=True)
    p.add_argument("--eps-grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--report")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("construct", help="build a 3-system for a target pair")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--lambda-under", dest="lam_under", required=True)
    p.add_argument("--peaks", type=int, default=20)
    p.add_argument("--case", choices=["auto", "1", "2"], default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("kappa", help="kappa report of one component")
    p.add_argument("--system", required=True)
    p.add_argument("--alpha")
    p.add_argument("--component", type=int, choices=[1, 2, 3], default=3)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("render", help="draw the combined graph as SVG")
    p.add_argument("--system", required=True)
    p.add_argument("--svg", required=True)
    p.add_argument("--width", type=int, default=800)
    p.add_argument("--height", type=int, default=500)
    p.add_argument("--q-range", help="draw only lo:hi, e.g. 4/1:16/1")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("parametric", help="profile successive minima on a q grid")
    p.add_argument("--xi", required=True)
    p.add_argument("--eta", required=True)
    p.add_argument("--q-min", type=float, default=2.0)
    p.add_argument("--q-max", type=float, required=True)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--points")
    p.add_argument("--max-x0", type=int, default=10**6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_parametric)

    for sp in sub.choices.values():
        _common(sp)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = json.loads(Path(known.config).read_text())
        except (OSError, ValueError) as e:
            raise FormatError(f"cannot read config: {e}") from e
        if not isinstance(cfg, dict):
            raise FormatError("config must be a JSON object")
        cmd = next((a for a in argv if not a.startswith("-")), None)
        sub = ap._subparsers._group_actions[0].choices.get(cmd) if cmd else None
        if sub is not None:
            sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
            for action in sub._actions:
                if action.dest in {k.replace("-", "_") for k in cfg}:
                    action.required = False
    return ap.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
        return args.func(args)
    except SystemExit as e:
        return int(e.code or 0)
    except QTooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_Q_TOO_LARGE
    except PrecisionBudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECISION
    except DegeneratePair as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InsufficientData as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (DiophError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
