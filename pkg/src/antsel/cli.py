"""Configuration-driven command line: run experiments, evaluate the closed
forms, and verify the statistical contracts.

Curves land in CSV (one row per grid point, '.' decimal separator, LF
endings); scalar reports and run manifests land in JSON.  A manifest plus
this tool reproduces every output bit for bit.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, analytic
from .montecarlo import ExperimentConfig, FitError, SlopeFit, estimate_ber, estimate_outage, fit_slope
from .selection import RULES
from .receivers import FEEDBACK_MODES, ORDERING_MODES, RECEIVERS


class UsageError(Exception):
    """Invalid command-line input (maps to exit code 2)."""


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run: resolved configuration, seed,
    timestamps and the files the run produced."""

    tool: str
    version: str
    command: str
    created_utc: str
    finished_utc: str
    master_seed: int
    workers: int
    config: dict
    outputs: tuple[str, ...]
    slope_fit: dict | None = None


def parse_grid(spec: str, require_positive: bool = False) -> tuple[float, ...]:
    """Parse a grid given as "logspace:lo,hi,n", "linspace:lo,hi,n" or a
    comma list; the result must be strictly increasing."""
    s = spec.strip()
    try:
        if s.startswith(("logspace:", "linspace:")):
            kind, _, rest = s.partition(":")
            parts = [p.strip() for p in rest.split(",")]
            if len(parts) != 3:
                raise UsageError(f"{kind} grid needs lo,hi,count: got {spec!r}")
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 2:
                raise UsageError(f"grid needs at least 2 points, got {count}")
            if kind == "logspace":
                if lo <= 0:
                    raise UsageError(f"logspace grid needs a positive start, got {lo}")
                values = np.geomspace(lo, hi, count)
            else:
                values = np.linspace(lo, hi, count)
        else:
            values = np.array([float(tok) for tok in s.split(",") if tok.strip() != ""])
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(f"cannot parse grid {spec!r}: {exc}") from None
    if values.size == 0:
        raise UsageError(f"grid {spec!r} is empty")
    if np.any(np.diff(values) <= 0):
        raise UsageError(f"grid must be strictly increasing, got {spec!r}")
    if require_positive and values[0] <= 0:
        raise UsageError(f"grid values must be positive, got {spec!r}")
    return tuple(float(v) for v in values)


def _resolve_seed(value: int | None) -> int:
    """Explicit flag wins; the ANTSEL_SEED environment variable is the
    fallback; the default is 0."""
    if value is not None:
        return int(value)
    env = os.environ.get("ANTSEL_SEED")
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"ANTSEL_SEED must be an integer, got {env!r}") from None


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


def _slope_fit_dict(fit: SlopeFit) -> dict:
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "stderr": fit.stderr,
        "fit_range": list(fit.fit_range),
        "points_used": fit.points_used,
    }


def _write_manifest(out_path: str, manifest: RunManifest) -> str:
    path = out_path + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_outage(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    grid = parse_grid(args.x_grid, require_positive=True)
    started = _utc_now()
    config = ExperimentConfig(
        n_t=args.nt, n_r=args.nr, L=args.L, rule=args.rule,
        trial_count=args.trials, master_seed=seed, grid=grid, chunk_size=args.chunk_size,
    )
    curve = estimate_outage(config, workers=args.workers)
    p_hat = curve.p_hat()
    stderr = curve.stderr()
    rows = [
        [_fmt(x), h, n, _fmt(p), _fmt(s)]
        for x, h, n, p, s in zip(curve.abscissa, curve.hits, curve.trials, p_hat, stderr)
    ]
    _write_csv(args.out, ["x", "hits", "trials", "p_hat", "stderr"], rows)
    try:
        fit = _slope_fit_dict(fit_slope(curve, min_hits=args.min_hits))
    except FitError as exc:
        fit = {"error": str(exc)}
    manifest = RunManifest(
        tool="antsel", version=__version__, command="outage",
        created_utc=started, finished_utc=_utc_now(), master_seed=seed,
        workers=args.workers, config=asdict(config), outputs=(args.out,), slope_fit=fit,
    )
    _write_manifest(args.out, manifest)
    return 0


def _cmd_ber(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    grid = parse_grid(args.snr_db)
    started = _utc_now()
    config = ExperimentConfig(
        n_t=args.nt, n_r=args.nr, L=args.L, rule=args.rule,
        trial_count=args.frames, master_seed=seed, grid=grid, chunk_size=args.chunk_size,
        receiver=args.receiver, feedback=args.feedback, ordering=args.ordering,
        frame_symbols=args.frame_symbols,
    )
    curve = estimate_ber(config, workers=args.workers)
    rows = [
        [_fmt(x), e, b, _fmt(e / b)]
        for x, e, b in zip(curve.abscissa, curve.hits, curve.trials)
    ]
    _write_csv(args.out, ["snr_db", "bit_errors", "bits", "ber"], rows)
    manifest = RunManifest(
        tool="antsel", version=__version__, command="ber",
        created_utc=started, finished_utc=_utc_now(), master_seed=seed,
        workers=args.workers, config=asdict(config), outputs=(args.out,),
    )
    _write_manifest(args.out, manifest)
    return 0


def _cmd_analytic(args: argparse.Namespace) -> int:
    if args.analytic_cmd == "coefficient":
        coeff = analytic.outage_coefficient(args.nt, args.nr)
        payload = {
            "kind": "outage-expansion-coefficient",
            "n_t": coeff.n_t,
            "n_r": coeff.n_r,
            "M": coeff.m,
            "leading": coeff.leading,
            "b_m": coeff.b_m,
            "tail_sum": coeff.tail_sum,
            "c": list(coeff.c),
            "a": list(coeff.a),
        }
        _emit_json(payload, args.out)
        return 0
    if args.analytic_cmd == "quadrature":
        grid = parse_grid(args.x_grid, require_positive=True)
        points = [
            {"x": x, "probability": analytic.pr_outage_quadrature(x, args.nt, args.nr, restricted=args.restricted)}
            for x in grid
        ]
        lx = np.log([p["x"] for p in points])
        lp = np.log([max(p["probability"], 1e-300) for p in points])
        payload = {
            "kind": "outage-quadrature",
            "n_t": args.nt,
            "n_r": args.nr,
            "restricted": bool(args.restricted),
            "points": points,
            "loglog_slope": float(np.polyfit(lx, lp, 1)[0]),
        }
        _emit_json(payload, args.out)
        return 0
    if args.analytic_cmd == "dmt":
        grid = parse_grid(args.r_grid)
        payload = {
            "kind": "diversity-multiplexing-curve",
            "n_t": args.nt,
            "n_r": args.nr,
            "L": args.L,
            "bound": args.bound,
            "points": [{"r": r, "d": analytic.dmt_curve(args.nt, args.nr, args.L, r, bound=args.bound)} for r in grid],
        }
        _emit_json(payload, args.out)
        return 0
    if args.analytic_cmd == "selftest":
        from .verify import analytic_selftest

        outcomes = analytic_selftest()
        payload = {
            "kind": "analytic-selftest",
            "checks": [{"name": o.name, "passed": o.passed, "detail": o.detail} for o in outcomes],
            "passed": all(o.passed for o in outcomes),
        }
        _emit_json(payload, args.out)
        return 0 if payload["passed"] else 1
    raise UsageError(f"unknown analytic subcommand {args.analytic_cmd!r}")


def _cmd_verify(args: argparse.Namespace) -> int:
    from .verify import run_verification

    seed = _resolve_seed(args.seed)
    outcomes = run_verification(scale=args.scale, seed=seed, workers=args.workers)
    width = max(len(o.name) for o in outcomes)
    print(f"verification scale={args.scale} seed={seed}")
    for o in outcomes:
        flag = "PASS" if o.passed else ("FAIL" if o.gating else "info")
        print(f"  {o.name:<{width}}  {flag:<4}  [{o.seconds:6.2f}s]  {o.detail}")
    gating_ok = all(o.passed for o in outcomes if o.gating)
    print("result:", "PASS" if gating_ok else "FAIL")
    return 0 if gating_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antsel",
        description="Monte Carlo and analytic verification of transmit antenna selection diversity.",
    )
    parser.add_argument("--version", action="version", version=f"antsel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    grid_help = 'comma list ("0.01,0.1,1") or "logspace:lo,hi,n" / "linspace:lo,hi,n"'

    p_out = sub.add_parser("outage", help="estimate an outage curve and fit its log-log slope")
    p_out.add_argument("--nt", type=int, required=True, help="transmit antennas")
    p_out.add_argument("--nr", type=int, required=True, help="receive antennas")
    p_out.add_argument("--L", type=int, required=True, help="selected streams")
    p_out.add_argument("--rule", choices=RULES, required=True)
    p_out.add_argument("--trials", type=int, required=True)
    p_out.add_argument("--seed", type=int, default=None, help="master seed (fallback: ANTSEL_SEED, then 0)")
    p_out.add_argument("--x-grid", required=True, help=f"threshold grid: {grid_help}")
    p_out.add_argument("--chunk-size", type=int, default=100_000)
    p_out.add_argument("--workers", type=int, default=1)
    p_out.add_argument("--min-hits", type=int, default=10, help="slope fit hit floor")
    p_out.add_argument("--out", required=True, help="CSV output path (manifest lands beside it)")
    p_out.set_defaults(func=_cmd_outage)

    p_ber = sub.add_parser("ber", help="estimate a bit-error-rate curve")
    p_ber.add_argument("--nt", type=int, required=True)
    p_ber.add_argument("--nr", type=int, required=True)
    p_ber.add_argument("--L", type=int, required=True)
    p_ber.add_argument("--rule", choices=RULES, required=True)
    p_ber.add_argument("--receiver", choices=RECEIVERS, default="df-zf")
    p_ber.add_argument("--feedback", choices=FEEDBACK_MODES, default="actual")
    p_ber.add_argument("--ordering", choices=ORDERING_MODES, default=None,
                       help="decode-order override (default: the rule's native order)")
    p_ber.add_argument("--snr-db", required=True, help=f"SNR grid in dB: {grid_help}")
    p_ber.add_argument("--frames", type=int, required=True, help="channel draws per SNR point")
    p_ber.add_argument("--frame-symbols", type=int, default=50, help="QPSK symbols per stream per frame")
    p_ber.add_argument("--seed", type=int, default=None)
    p_ber.add_argument("--chunk-size", type=int, default=100_000)
    p_ber.add_argument("--workers", type=int, default=1)
    p_ber.add_argument("--out", required=True)
    p_ber.set_defaults(func=_cmd_ber)

    p_an = sub.add_parser("analytic", help="closed-form tables and the identity self-test")
    an_sub = p_an.add_subparsers(dest="analytic_cmd", required=True)

    p_coeff = an_sub.add_parser("coefficient", help="small-threshold expansion coefficients")
    p_coeff.add_argument("--nt", type=int, required=True)
    p_coeff.add_argument("--nr", type=int, required=True)
    p_coeff.add_argument("--out", default=None)
    p_coeff.set_defaults(func=_cmd_analytic)

    p_quad = an_sub.add_parser("quadrature", help="outage of the bounding variable by quadrature")
    p_quad.add_argument("--nt", type=int, required=True)
    p_quad.add_argument("--nr", type=int, required=True)
    p_quad.add_argument("--x-grid", required=True, help=f"threshold grid: {grid_help}")
    p_quad.add_argument("--restricted", action="store_true", help="condition the angles into (0, psi0)")
    p_quad.add_argument("--out", default=None)
    p_quad.set_defaults(func=_cmd_analytic)

    p_dmt = an_sub.add_parser("dmt", help="diversity-multiplexing tradeoff table")
    p_dmt.add_argument("--nt", type=int, required=True)
    p_dmt.add_argument("--nr", type=int, required=True)
    p_dmt.add_argument("--L", type=int, required=True)
    p_dmt.add_argument("--r-grid", required=True, help=f"multiplexing gains: {grid_help}")
    p_dmt.add_argument("--bound", choices=("lower", "upper", "exact-l2"), default="exact-l2")
    p_dmt.add_argument("--out", default=None)
    p_dmt.set_defaults(func=_cmd_analytic)

    p_self = an_sub.add_parser("selftest", help="check every closed-form identity; exit 1 on failure")
    p_self.add_argument("--out", default=None)
    p_self.set_defaults(func=_cmd_analytic)

    p_ver = sub.add_parser("verify", help="run the statistical and analytic verification suite")
    p_ver.add_argument("--scale", choices=("quick", "full"), default="quick")
    p_ver.add_argument("--seed", type=int, default=None)
    p_ver.add_argument("--workers", type=int, default=1)
    p_ver.set_defaults(func=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # invalid parameter combinations surface as usage problems
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"failure: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
