"""Command-line front end: sweeps, bound tables, designs, realizations, simulations."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bounds, classic_rdf, gauss_markov
from .coder_sim import DEFAULT_BURN_IN, DEFAULT_SAMPLES, VARIANTS, SimConfig, simulate
from .design import DEFAULT_ITERS, DEFAULT_ORDER, procedure2
from .errors import DomainError
from .realization import DEFAULT_TAPS, build_filter_set
from .spectra import (
    DEFAULT_GRID_POINTS,
    ArModel,
    FrequencyGrid,
    SpectralModel,
    ar_from_poles,
    psd_from_ar,
    read_psd_csv,
)
from .units import convert, to_nats

log = logging.getLogger("causalrd")

CURVES = ("shannon", "r_perp", "awgn", "rcit_ar1", "b1", "b2", "b3", "procedure2")
MATCH_TOL = 0.01
_MAX_MATCH_EVALS = 60


# ---------------------------------------------------------------------------
# source and grid handling


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(" ", "").split(",") if t]


def load_source(args) -> SpectralModel:
    if args.psd_file:
        if args.ar is not None or args.poles is not None:
            raise DomainError("--psd-file cannot be combined with --ar/--poles")
        return read_psd_csv(args.psd_file)
    grid = FrequencyGrid(args.grid)
    if args.poles is not None:
        model = ar_from_poles(_floats(args.poles), args.xi_var)
    else:
        model = ArModel(tuple(_floats(args.ar)) if args.ar else (), args.xi_var)
    return psd_from_ar(model, grid)


def d_grid(spec: SpectralModel, args) -> list[float]:
    """Requested distortions, sorted ascending, all in ``(0, variance]``."""
    var = spec.variance
    if args.d:
        values = _floats(args.d)
    else:
        lo = args.d_min if args.d_min is not None else 0.01 * var
        hi = args.d_max if args.d_max is not None else var
        values = np.geomspace(lo, hi, args.points).tolist()
    values = sorted(values)
    bad = [v for v in values if not 0 < v <= var * (1 + 1e-12)]
    if bad:
        raise DomainError(f"distortions must lie in (0, {var:.6g}]; got {bad}")
    return [min(v, var) for v in values]


def rate_nats(args) -> float:
    if args.rate_nats is not None:
        return args.rate_nats
    return to_nats(args.rate_bits)


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepSpec:
    spec: SpectralModel
    distortions: tuple[float, ...]
    curves: tuple[str, ...]
    units: str = "bits"
    order: int = DEFAULT_ORDER
    iters: int = DEFAULT_ITERS
    epsilon: float | None = None


def match_distortion(spec: SpectralModel, D: float, order: int, iters: int, tol: float = MATCH_TOL):
    """Target rate whose Procedure-2 design reaches ``D`` within ``tol`` relative.

    Achieved distortion decreases with the target rate, so ``ln(D_c / D)`` is
    bracketed and the bracket is shrunk by false-position steps with a
    bisection fallback.
    """
    cache = {}

    def gap(r):
        if r not in cache:
            out = procedure2(spec, r, order=order, iters=iters)
            cache[r] = (math.log(out.distortion / D), out)
        return cache[r]

    if not 0 < D < spec.variance:
        raise DomainError(f"need 0 < D < variance ({spec.variance:.6g}), got {D}")
    guess = max(classic_rdf.shannon_rdf(spec, D).rate + bounds.bound_b1(spec, D), 1e-9)
    g, out = gap(guess)
    if abs(g) <= math.log1p(tol):
        return out
    lo = hi = guess
    g_lo = g_hi = g
    while g_lo < 0:
        lo *= 0.5
        g_lo, out = gap(lo)
        if lo < 1e-12:
            break
    while g_hi > 0:
        hi = hi * 2 + 1e-3
        g_hi, out = gap(hi)
        if hi > 50:
            raise DomainError(f"cannot reach D = {D:.6g} below rate {hi:.3g} nats")
    for it in range(_MAX_MATCH_EVALS):
        for r, gr in ((lo, g_lo), (hi, g_hi)):
            if abs(gr) <= math.log1p(tol):
                return cache[r][1]
        r = lo + (hi - lo) * g_lo / (g_lo - g_hi)
        if it % 3 == 2 or not lo < r < hi:
            r = 0.5 * (lo + hi)
        g, _ = gap(r)
        if g > 0:
            lo, g_lo = r, g
        else:
            hi, g_hi = r, g
    raise DomainError(f"rate search for D = {D:.6g} did not converge")


def _curve_value(name: str, sw: SweepSpec, D: float) -> float:
    spec, var = sw.spec, sw.spec.variance
    if name == "shannon":
        return classic_rdf.shannon_rdf(spec, D).rate
    if name == "r_perp":
        return classic_rdf.r_perp(spec, D).rate
    if name == "awgn":
        return classic_rdf.awgn_rate(spec, D)
    if name == "rcit_ar1":
        ar = spec.ar
        if ar is None or ar.order > 1:
            raise DomainError("rcit_ar1 needs a first-order AR source")
        return gauss_markov.rcit_ar1(ar.coeffs[0] if ar.order else 0.0, ar.innovation_variance, D)
    if name in ("b1", "b2"):
        if D >= var:
            return 0.0
        return (bounds.bound_b1 if name == "b1" else bounds.bound_b2)(spec, D)
    if name == "b3":
        return bounds.bound_b3(spec, D, sw.epsilon)
    if name == "procedure2":
        if D >= var:
            return 0.0  # W = 0 reaches the variance at zero rate
        return match_distortion(spec, D, sw.order, sw.iters).rate
    raise DomainError(f"unknown curve {name!r}")


def sweep_row(sw: SweepSpec, D: float) -> tuple[list[float | None], list[str]]:
    """One output row; failures become ``None`` plus a diagnostic line."""
    values, notes = [], []
    for name in sw.curves:
        try:
            values.append(convert(_curve_value(name, sw, D), sw.units))
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            values.append(None)
            notes.append(f"D={D:.6g} {name}: {exc}")
    return values, notes


def _sweep_task(payload):
    sw, D = payload
    return sweep_row(sw, D)


def run_sweep(sw: SweepSpec, workers: int = 1) -> tuple[list[list[float | None]], list[str]]:
    payloads = [(sw, D) for D in sw.distortions]
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, payloads))
    else:
        results = [_sweep_task(p) for p in payloads]
    rows = [r[0] for r in results]
    notes = [n for r in results for n in r[1]]
    return rows, notes


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def sweep_csv(sw: SweepSpec, rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["D", *sw.curves])
    for D, row in zip(sw.distortions, rows):
        out.writerow([_fmt(D), *(_fmt(v) for v in row)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def _emit(text: str, path: str | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False)


def default_curves(spec: SpectralModel) -> tuple[str, ...]:
    ar1 = spec.ar is not None and spec.ar.order <= 1
    return tuple(c for c in CURVES if ar1 or c != "rcit_ar1")


def cmd_sweep(args) -> int:
    spec = load_source(args)
    curves = tuple(args.curves.split(",")) if args.curves else default_curves(spec)
    unknown = [c for c in curves if c not in CURVES]
    if unknown:
        raise DomainError(f"unknown curves {unknown}; choose from {list(CURVES)}")
    sw = SweepSpec(
        spec=spec,
        distortions=tuple(d_grid(spec, args)),
        curves=curves,
        units=args.units,
        order=args.taps,
        iters=args.iters,
        epsilon=args.epsilon,
    )
    rows, notes = run_sweep(sw, args.workers)
    for note in notes:
        print(f"sweep: {note}", file=sys.stderr)
    _emit(sweep_csv(sw, rows), args.out)
    return 0


def cmd_bounds(args) -> int:
    spec = load_source(args)
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["D", "shannon", "b1", "b2", "b3", "epsilon"])
    for D in d_grid(spec, args):
        if D >= spec.variance:
            print(f"bounds: skipping D={D:.6g} (bounds need D < variance)", file=sys.stderr)
            continue
        rep = bounds.bound_report(spec, D, args.epsilon)
        rates = (rep.r_shannon, rep.b1, rep.b2, rep.b3)
        out.writerow([_fmt(D), *(_fmt(convert(r, args.units)) for r in rates), _fmt(rep.epsilon)])
    _emit(buf.getvalue(), args.out)
    return 0


def _design(args, spec):
    return procedure2(spec, rate_nats(args), order=args.taps, iters=args.iters)


def cmd_design(args) -> int:
    spec = load_source(args)
    _emit(_json(_design(args, spec).to_json()), args.out)
    return 0


def cmd_realize(args) -> int:
    spec = load_source(args)
    fs = build_filter_set(spec, _design(args, spec), taps=args.length)
    _emit(_json(fs.to_json()), args.out)
    return 0


def cmd_simulate(args) -> int:
    spec = load_source(args)
    outcome = _design(args, spec)
    fs = build_filter_set(spec, outcome, taps=args.length)
    cfg = SimConfig(n_samples=args.samples, seed=args.seed, variant=args.variant, burn_in=args.burn_in)
    report = simulate(spec, fs, cfg, design_distortion=outcome.distortion, trace_path=args.trace)
    _emit(_json(report.to_json()), args.out)
    return 0


def cmd_srdf(args) -> int:
    sched = gauss_markov.GmSchedule.load(args.schedule)
    rate = gauss_markov.srdf_value(sched)
    real = gauss_markov.procedure1(sched)
    doc = {
        "length": sched.length,
        "rate_nats": rate,
        "rate_bits": convert(rate, "bits"),
        "effective_distortions": gauss_markov.effective_distortions(sched).tolist(),
        "mutual_information_nats": real.mutual_information(),
        "residuals": gauss_markov.realization_residuals(real),
    }
    _emit(_json(doc), args.out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_source(p):
    g = p.add_argument_group("source")
    g.add_argument("--ar", help="AR coefficients a1,a2,... of x(k) = sum a_m x(k-m) + xi(k)")
    g.add_argument("--poles", help="AR model given by real poles, e.g. 0.9,0.1")
    g.add_argument("--xi-var", type=float, default=1.0, help="innovation variance (default 1)")
    g.add_argument("--psd-file", help="CSV with header omega,psd on a uniform grid")
    g.add_argument("--grid", type=int, default=DEFAULT_GRID_POINTS, help="frequency grid size")


def _add_dgrid(p):
    g = p.add_argument_group("distortion grid")
    g.add_argument("--d", help="comma-separated distortions")
    g.add_argument("--d-min", type=float, help="smallest distortion (default 0.01 variance)")
    g.add_argument("--d-max", type=float, help="largest distortion (default variance)")
    g.add_argument("--points", type=int, default=25, help="log-spaced points (default 25)")


def _add_design(p, rate_required=True):
    rate = p.add_mutually_exclusive_group(required=rate_required)
    rate.add_argument("--rate-bits", type=float, help="target rate in bits/sample")
    rate.add_argument("--rate-nats", type=float, help="target rate in nats/sample")
    p.add_argument("--taps", type=int, default=DEFAULT_ORDER, help="FIR order of W (default 8)")
    p.add_argument("--iters", type=int, default=DEFAULT_ITERS, help="alternation iterations (default 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalrd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="rate curves over a distortion grid (CSV)")
    _add_source(p)
    _add_dgrid(p)
    p.add_argument("--curves", help=f"comma-separated subset of {','.join(CURVES)}")
    p.add_argument("--taps", type=int, default=DEFAULT_ORDER, help="W order for procedure2")
    p.add_argument("--iters", type=int, default=DEFAULT_ITERS, help="iterations for procedure2")
    p.add_argument("--epsilon", type=float, help="epsilon of the third bound")
    p.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="rate-loss bound table (CSV)")
    _add_source(p)
    _add_dgrid(p)
    p.add_argument("--epsilon", type=float, help="epsilon of the third bound")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("design", help="iterative filter design at a target rate (JSON)")
    _add_source(p)
    _add_design(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("realize", help="design plus minimum-phase FIR filters (JSON)")
    _add_source(p)
    _add_design(p)
    p.add_argument("--length", type=int, default=DEFAULT_TAPS, help="FIR length of A, B, 1-F")
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("simulate", help="time-domain coder simulation (JSON)")
    _add_source(p)
    _add_design(p)
    p.add_argument("--length", type=int, default=DEFAULT_TAPS, help="FIR length of A, B, 1-F")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--variant", choices=VARIANTS, default="sdusq")
    p.add_argument("--trace", help="optional CSV dump k,x,v,w,y,n_prime")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("srdf", help="sequential RDF of a Gauss-Markov schedule (JSON)")
    p.add_argument("--schedule", required=True, help="JSON {sigma0_sq, a[], xi_var[], D[]}")
    p.set_defaults(func=cmd_srdf)

    for p in sub.choices.values():
        p.add_argument("--out", help="output file (default stdout)")
        if p.get_default("func") in (cmd_sweep, cmd_bounds):
            p.add_argument("--units", choices=("bits", "nats"), default="bits")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ArithmeticError, ValueError, RuntimeError, OSError) as exc:
        print(f"causalrd {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
