"""``counterrace`` command line.

Exit codes: 0 success, 2 bad parameters, 3 numerical convergence failure,
4 an internal invariant was violated by the computed result.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

EXIT_OK, EXIT_PARAM, EXIT_CONVERGENCE, EXIT_INVARIANT = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _count(text: str) -> int:
    """Integers that may be written as ``1e7``."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(v)


def _default_seed() -> int:
    raw = os.environ.get("COUNTERRACE_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"COUNTERRACE_SEED must be an integer, got {raw!r}", EXIT_PARAM) from None


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):  # numpy scalars
        return v.item()
    return v


def render(records: list[dict], fmt: str) -> str:
    records = [_jsonable(r) for r in records]
    if fmt == "json":
        return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)
    keys: list[str] = []
    for r in records:
        keys += [k for k in r if k not in keys]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, delimiter="," if fmt == "csv" else "\t", lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    return buf.getvalue()


def _emit(args, records: list[dict], fmt: str | None = None) -> None:
    text = render(records, fmt or args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plot(args, fn, *a, **kw):
    if args.plot:
        path = fn(*a, out_dir=args.plot, **kw)
        print(f"figure: {path}", file=sys.stderr)


# --- commands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .dynamics import simulate_speed

    if args.n < 2:
        raise CliError("--n must be at least 2", EXIT_PARAM)
    if args.steps < 1 or args.replicas < 1:
        raise CliError("--steps and --replicas must be positive", EXIT_PARAM)
    if args.burn_in is not None and args.burn_in < 0:
        raise CliError("--burn-in must be non-negative", EXIT_PARAM)
    ests = [simulate_speed(args.n, args.steps, args.burn_in, args.seed, r) for r in range(args.replicas)]
    recs = [e.to_record() for e in ests]
    if args.replicas > 1:
        mean = sum(e.mean for e in ests) / len(ests)
        se = math.sqrt(sum(e.stderr**2 for e in ests)) / len(ests)
        recs.append({**recs[0], "mean": mean, "stderr": se, "steps": args.steps * args.replicas, "replica": "pooled"})
    _emit(args, recs)
    return EXIT_OK


def cmd_bounds(args) -> int:
    from . import bounds

    recs = []
    if args.asymptotic:
        recs.append(bounds.asymptotic_upper().to_record())
        recs.append(bounds.lower_bound_optimize(args.grid_resolution).to_record())
    if args.n is not None:
        if args.n < 4:
            raise CliError(f"N={args.n}: use the 'exact' command for N = 3", EXIT_PARAM)
        if args.n == 4:
            from .exact_small import n4_bounds

            lo, hi = n4_bounds()
            print("N=4 is handled by the exact solver; see 'exact --n 4'", file=sys.stderr)
            recs.append({"n": 4, "direction": "both", "lower": lo, "upper": hi, "method": "exact-small"})
        else:
            rep = bounds.finite_upper_bound(args.n)
            rec = rep.to_record()
            rec["mod3_formula"] = bounds.remark_upper_bound(args.n)
            recs.append(rec)
            if args.table:
                for tag, (c, s) in bounds.appendix_a_table(args.n).items():
                    recs.append({"n": args.n, "case": tag, "alpha": str(c), "S": s, "S_float": float(s)})
    if not recs:
        raise CliError("give --n N and/or --asymptotic", EXIT_PARAM)
    _emit(args, recs)
    return EXIT_OK


def cmd_lp(args) -> int:
    from . import lp_opt

    ns = list(range(args.range[0], args.range[1] + 1)) if args.range else [args.n]
    if any(n is None or n < 4 or n > lp_opt.ENUMERATION_CAP for n in ns):
        raise CliError(f"LP sizes must lie in 4..{lp_opt.ENUMERATION_CAP}", EXIT_PARAM)
    sols = []
    recs = []
    for n in ns:
        sol = lp_opt.solve_lp(lp_opt.build_lp(n))
        if sol.status != "optimal":
            raise CliError(f"N={n}: LP status {sol.status}", EXIT_CONVERGENCE)
        if sol.violations:
            raise CliError(f"N={n}: {sol.violations} constraints violated at the returned vertex", EXIT_INVARIANT)
        rec = sol.to_record()
        if n >= 5:
            fit = lp_opt.fit_parabola(sol.h_values)
            rec["parabola"] = fit.to_record()
            _plot(args, _lazy("plot_lp"), sol, fit)
        sols.append(sol)
        recs.append(rec)
    if args.range and args.format == "csv":
        text = lp_opt.table3_csv(sols)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    _emit(args, recs)
    return EXIT_OK


def cmd_exact(args) -> int:
    from . import exact_small

    if args.n == 3:
        _emit(args, [{"n": 3, **exact_small.solve_n3().to_record()}])
        return EXIT_OK
    if args.n != 4:
        raise CliError("exact solutions exist for N = 3 and N = 4 only", EXIT_PARAM)
    if args.L < 10 or args.tol <= 0:
        raise CliError("--L must be >= 10 and --tol positive", EXIT_PARAM)
    try:
        st = exact_small.solve_n4(L=args.L, tol=args.tol)
    except exact_small.ConvergenceError as exc:
        raise CliError(str(exc), EXIT_CONVERGENCE) from exc
    lo, hi = exact_small.n4_bounds()
    rec = {"n": 4, **st.to_record(), "lower": lo, "upper": hi, "balance_residuals": list(st.balance_residuals())}
    if not lo <= st.speed <= hi:
        raise CliError(f"speed {st.speed} outside [{lo}, {hi}]", EXIT_INVARIANT)
    _plot(args, _lazy("plot_n4"), st)
    _emit(args, [rec])
    return EXIT_OK


def cmd_meanfield(args) -> int:
    from . import meanfield as mf

    if args.k < 2 or args.t <= 0 or args.dt <= 0:
        raise CliError("need --k >= 2, --t > 0, --dt > 0", EXIT_PARAM)
    try:
        st = mf.integrate(args.k, args.t, args.dt, model=args.model)
    except mf.StepSizeError as exc:
        raise CliError(str(exc), EXIT_PARAM) from exc
    if args.format == "tsv":
        # plot data: t followed by the odd levels 1..11
        levels = [k for k in range(1, min(args.k, 11) + 1, 2)]
        recs = [{"t": float(t), **{f"phi_{k}": float(st.phi[k, j]) for k in levels}} for j, t in enumerate(st.times)]
        _emit(args, recs)
        _plot(args, _lazy("plot_phi_curves"), st)
        return EXIT_OK
    try:
        w = mf.wave_speed(st)
    except mf.InsufficientHorizonError as exc:
        raise CliError(str(exc), EXIT_CONVERGENCE) from exc
    mf.tail_diagnostics(w)
    rec = {"model": args.model, "K": args.k, "T": args.t, "dt": args.dt, **w.to_record()}
    if not args.crossings:
        rec.pop("crossing_times")
    _plot(args, _lazy("plot_phi_curves"), st)
    _plot(args, _lazy("plot_front"), w)
    _emit(args, [rec])
    return EXIT_OK


def cmd_drift(args) -> int:
    from .dynamics import drift_check

    if args.n < 3 or args.samples < 1:
        raise CliError("need --n >= 3 and --samples >= 1", EXIT_PARAM)
    rep = drift_check(args.n, args.samples, args.seed)
    _emit(args, [rep])
    if rep["quadratic_violations"] or rep["exponential_violations"]:
        print(
            f"drift above -1 beyond threshold: quadratic {rep['quadratic_violations']}, "
            f"exponential {rep['exponential_violations']} of {args.samples}",
            file=sys.stderr,
        )
        return EXIT_INVARIANT
    return EXIT_OK


TABLE4_SIMULATED = {5: 1.35, 6: 1.33, 7: 1.31, 8: 1.30, 9: 1.29, 16: 1.27}


def table4_rows(steps: int, seed: int, ns=range(4, 17)) -> list[dict]:
    from .bounds import finite_upper_bound, upper_test_function
    from .dynamics import simulate_speed
    from .lp_opt import build_lp, objective_at, solve_lp

    rows = []
    for n in ns:
        p = build_lp(n)
        if n >= 5:
            theo = finite_upper_bound(n).value
        else:
            f = upper_test_function(n)
            theo = objective_at(p, [f(k) for k in range(1, n - 1)])
        sol = solve_lp(p)
        sim = simulate_speed(n, steps, seed=seed) if steps > 0 else None
        rows.append(
            {
                "n": n,
                "theoretical": float(theo),
                "theoretical_exact": theo,
                "numerical": sol.bound,
                "numerical_exact": sol.exact_bound,
                "simulated": None if sim is None else sim.mean,
                "simulated_stderr": None if sim is None else sim.stderr,
            }
        )
    return rows


def cmd_table4(args) -> int:
    if args.steps < 0:
        raise CliError("--steps must be non-negative", EXIT_PARAM)
    rows = table4_rows(args.steps, args.seed)
    _plot(args, _lazy("plot_table4"), rows)
    _emit(args, rows)
    return EXIT_OK


def _lazy(name):
    def call(*a, **kw):
        from . import plotting

        return getattr(plotting, name)(*a, **kw)

    return call


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "tsv"), default=None)
    common.add_argument("--out", metavar="PATH", help="write to PATH instead of stdout")
    common.add_argument("--plot", metavar="DIR", help="also render figures (PNG) into DIR")
    common.add_argument("--seed", type=int, default=None, help="default: $COUNTERRACE_SEED or 0")

    p = argparse.ArgumentParser(prog="counterrace", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate of V(N)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--steps", type=_count, default=10_000_000)
    s.add_argument("--burn-in", type=_count, default=None)
    s.add_argument("--replicas", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bounds", parents=[common], help="certified finite-N and asymptotic bounds")
    s.add_argument("--n", type=int)
    s.add_argument("--asymptotic", action="store_true")
    s.add_argument("--table", action="store_true", help="also list the nine candidate configurations")
    s.add_argument("--grid-resolution", type=int, default=1000)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("lp", parents=[common], help="LP-optimal linear test function")
    s.add_argument("--n", type=int)
    s.add_argument("--range", type=int, nargs=2, metavar=("LO", "HI"))
    s.set_defaults(func=cmd_lp)

    s = sub.add_parser("exact", parents=[common], help="stationary law for N = 3 or 4")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--L", type=int, default=200)
    s.add_argument("--tol", type=float, default=1e-12)
    s.set_defaults(func=cmd_exact)

    s = sub.add_parser("meanfield", parents=[common], help="integrate the mean-field hierarchy")
    s.add_argument("--k", type=int, default=200)
    s.add_argument("--t", type=float, default=400.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--model", choices=("race", "power2"), default="race")
    s.add_argument("--crossings", action="store_true", help="include every half-crossing time")
    s.set_defaults(func=cmd_meanfield)

    s = sub.add_parser("drift", parents=[common], help="check Lyapunov drift beyond the thresholds")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--samples", type=int, default=1000)
    s.set_defaults(func=cmd_drift)

    s = sub.add_parser("table4", parents=[common], help="theoretical, LP and simulated speeds for N = 4..16")
    s.add_argument("--steps", type=_count, default=10_000_000)
    s.set_defaults(func=cmd_table4)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2 already
        return int(exc.code or 0)
    try:
        if args.format is None:
            args.format = "csv" if args.command == "table4" else "json"
        if args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except CliError as exc:
        print(f"counterrace: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, KeyError) as exc:
        print(f"counterrace: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
