"""Command-line front end: ``ktube {fit,profile,bootstrap,compare}``.

Exit codes: 0 success, 2 input error, 3 convergence failure, 4 internal
invariant violation.  Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .errors import ConvergenceError, InvariantError, KTubeError
from .inference import (
    ReferenceDistribution,
    asymptotic_lower_limit,
    bootstrap_lower_limit,
    bootstrap_null,
    build_report,
    critical_value,
    qq_data,
)
from .models import degrees_of_freedom, parse_model
from .tables import FIXTURES, load_fixture, load_table
from .tubefit import DEFAULT_PI_GRID, invert_for_c, profile, rho_star

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_INVARIANT = 0, 2, 3, 4


class InputError(Exception):
    pass


# ------------------------------------------------------------------ #
# argument handling
# ------------------------------------------------------------------ #


def _alpha(text):
    a = float(text)
    if not 0.0 < a <= 0.5:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 0.5]")
    return a


def _pi_grid(text):
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad pi grid {text!r}")
    if not grid or any(not 0.0 <= p < 1.0 for p in grid):
        raise argparse.ArgumentTypeError("pi grid values must lie in [0, 1)")
    return grid


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--table", required=True, help="CSV path, or a bundled fixture name (eye_hair, children_income, recruits)")
    common.add_argument("--format", choices=("grid2d", "long"), help="table layout (inferred from the header when omitted)")
    common.add_argument("--alpha", type=_alpha, default=0.05)
    common.add_argument("--seed", type=int, help="required by every stochastic computation")
    common.add_argument("--B", type=int, help="bootstrap replicates (at least 100)")
    common.add_argument("--pi-grid", type=_pi_grid, help="comma-separated Lagrange weights")
    radius = common.add_mutually_exclusive_group()
    radius.add_argument("--c", type=float, help="tube radius")
    radius.add_argument("--sqrt-c", type=float, help="tube radius on the square-root scale")
    common.add_argument("--out", type=Path, help="directory for JSON/CSV outputs")
    common.add_argument("--json", action="store_true", help="print JSON instead of text")
    common.add_argument("--pi-star", action="store_true", help="also compute the mixture index pi*")
    common.add_argument("--n-star", action="store_true", help="also compute the credibility index N* (needs --seed)")
    common.add_argument("--n-star-reps", type=int, default=1000)
    common.add_argument("--n-cap", type=int, help="largest sample size probed for N* (default: n)")
    common.add_argument("--workers", type=int, default=1, help="threads for bootstrap replicates")

    parser = argparse.ArgumentParser(prog="ktube", description="Kullback-Leibler tolerance tubes for multinomial models.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit", "classical and tubular fit report"),
        ("profile", "tube fits along a grid of Lagrange weights"),
        ("bootstrap", "bootstrap critical values and lower limit"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--model", default="independence", help="independence | saturated | loglinear:GEN,GEN,...")
    p = sub.add_parser("compare", parents=[common], help="compare several models on one table")
    p.add_argument("--model", action="append", required=True, help="repeat once per model")
    return parser


def _load(args):
    path = Path(args.table)
    if path.exists():
        return load_table(path, args.format)
    name = args.table if args.table.endswith(".csv") else args.table + ".csv"
    if name in FIXTURES:
        return load_fixture(name)
    raise InputError(f"no such table: {args.table}")


def _radius(args):
    if args.sqrt_c is not None:
        if args.sqrt_c < 0:
            raise InputError("--sqrt-c must be nonnegative")
        return args.sqrt_c**2
    if args.c is not None and args.c < 0:
        raise InputError("--c must be nonnegative")
    return args.c


def _check_stochastic(args, needed):
    if needed and args.seed is None:
        raise InputError("this command is stochastic and needs an explicit --seed")
    if args.B is not None and args.B < 100:
        raise InputError("--B must be at least 100")
    if args.n_star_reps < 200:
        raise InputError("--n-star-reps must be at least 200")


# ------------------------------------------------------------------ #
# output helpers
# ------------------------------------------------------------------ #


def _csv(header, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if x is None else (repr(x) if isinstance(x, float) else x) for x in r])
    return out.getvalue()


def _write(out_dir, name, text):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def _emit(args, stdout, text, payload, files):
    """Print ``text`` (or ``payload`` as JSON) and write ``files`` under ``--out``."""
    stdout.write(json.dumps(payload, indent=2) + "\n" if args.json else text)
    if args.out is not None:
        for name, body in files.items():
            _write(args.out, name, body)


# ------------------------------------------------------------------ #
# commands
# ------------------------------------------------------------------ #


def cmd_fit(args, stdout) -> int:
    _check_stochastic(args, args.B is not None or args.n_star)
    table = _load(args)
    spec = parse_model(args.model, table.axis_names, table.axis_sizes)
    report = build_report(
        table,
        spec,
        alpha=args.alpha,
        bootstrap_B=args.B,
        seed=args.seed,
        with_pi_star=args.pi_star,
        with_n_star=args.n_star,
        n_star_reps=args.n_star_reps,
        n_cap=args.n_cap,
        workers=args.workers,
    )
    _emit(args, stdout, report.render(), report.to_dict(), {"report.json": report.to_json() + "\n", "report.txt": report.render()})
    return EXIT_OK


def cmd_profile(args, stdout) -> int:
    table = _load(args)
    spec = parse_model(args.model, table.axis_names, table.axis_sizes)
    grid = sorted(args.pi_grid) if args.pi_grid else list(DEFAULT_PI_GRID)
    prof = profile(table, spec, grid)
    rows = [(p.pi, p.sqrt_c, p.c, p.lrt) for p in prof.points]
    text = _csv(("pi", "sqrt_c", "c", "lrt"), rows)
    payload = {"model": args.model, "n": table.n, "rho_star": prof.rho_star, "rows": [dict(zip(("pi", "sqrt_c", "c", "lrt"), r)) for r in rows]}
    _emit(args, stdout, text, payload, {"profile.csv": text})
    return EXIT_OK


def _qq_rows(stats, df, sqrt_c=None):
    refs = [ReferenceDistribution.half_mixture()]
    if df > 0:
        refs.insert(0, ReferenceDistribution.chi_square(df))
    pairs = [qq_data(stats, ref) for ref in refs]
    lead = () if sqrt_c is None else (sqrt_c,)
    return [lead + (pairs[0][i][1],) + tuple(p[i][0] for p in pairs) for i in range(len(stats))], [str(r) for r in refs]


def cmd_bootstrap(args, stdout) -> int:
    _check_stochastic(args, True)
    table = _load(args)
    spec = parse_model(args.model, table.axis_names, table.axis_sizes)
    df = degrees_of_freedom(spec)
    B = args.B if args.B is not None else 10_000
    c = _radius(args)
    if c is not None:
        res = bootstrap_null(table, spec, c, B=B, alpha=args.alpha, seed=args.seed, workers=args.workers)
        obs = invert_for_c(table, spec, c).lrt
        ref = ReferenceDistribution.chi_square(df) if c == 0 and df > 0 else ReferenceDistribution.half_mixture()
        payload = {
            "c": res.c,
            "sqrt_c": res.sqrt_c,
            "B": res.B,
            "seed": res.seed,
            "alpha": res.alpha,
            "observed_lrt": obs,
            "simulated_critical": res.critical_value,
            "asymptotic_critical": critical_value(ref, args.alpha),
            "zero_fraction": res.zero_fraction,
            "failures": res.failures,
        }
        qq, names = _qq_rows(res.stats, df)
        files = {"bootstrap.json": json.dumps(payload, indent=2) + "\n", "qq.csv": _csv(("empirical", *names), qq)}
        text = "".join(f"{k:<20}{v}\n" for k, v in payload.items())
        _emit(args, stdout, text, payload, files)
        return EXIT_OK

    grid = None
    if args.pi_grid is not None:
        prof = profile(table, spec, sorted(args.pi_grid))
        grid = sorted({p.c for p in prof.points})
    lim = bootstrap_lower_limit(table, spec, B=B, alpha=args.alpha, seed=args.seed, c_grid=grid, workers=args.workers, full_scan=True)
    asym = asymptotic_lower_limit(table, spec, args.alpha)
    scan = [(r.sqrt_c, r.lrt, r.simulated_critical, r.asymptotic_critical) for r in lim.rows]
    qq = []
    for r in lim.results:
        rows, names = _qq_rows(r.stats, df, r.sqrt_c)
        qq.extend(rows)
    payload = {
        "B": B,
        "seed": args.seed,
        "alpha": args.alpha,
        "rho_star": rho_star(table, spec),
        "lower_limit_bootstrap": lim.limit,
        "sqrt_lower_limit_bootstrap": lim.sqrt_limit,
        "lower_limit_asymptotic": asym,
        "sqrt_lower_limit_asymptotic": math.sqrt(asym),
        "radii": [
            {"c": r.c, "sqrt_c": r.sqrt_c, "lrt": r.lrt, "simulated_critical": r.simulated_critical,
             "asymptotic_critical": r.asymptotic_critical, "zero_fraction": r.zero_fraction}
            for r in lim.rows
        ],
    }
    scan_csv = _csv(("sqrt_c", "lrt", "simulated_critical", "asymptotic_critical"), scan)
    files = {
        "bootstrap.json": json.dumps(payload, indent=2) + "\n",
        "scan.csv": scan_csv,
        "qq.csv": _csv(("sqrt_c", "empirical", *names), qq),
    }
    text = (
        f"sqrt lower limit (bootstrap)   {lim.sqrt_limit:.6g}\n"
        f"sqrt lower limit (asymptotic)  {math.sqrt(asym):.6g}\n\n" + scan_csv
    )
    _emit(args, stdout, text, payload, files)
    return EXIT_OK


COMPARE_HEADER = ("model", "k", "df", "lrt", "aic", "bic", "sqrt_rho_star", "sqrt_rho_star_lower", "sqrt_4_mid_tube", "pi_star", "n_star", "error")


def cmd_compare(args, stdout) -> int:
    _check_stochastic(args, args.n_star or args.B is not None)
    table = _load(args)
    rows, reports = [], []
    for text in args.model:
        try:
            spec = parse_model(text, table.axis_names, table.axis_sizes)
            r = build_report(
                table,
                spec,
                alpha=args.alpha,
                bootstrap_B=args.B,
                seed=args.seed,
                with_pi_star=args.pi_star,
                with_n_star=args.n_star,
                n_star_reps=args.n_star_reps,
                n_cap=args.n_cap,
                workers=args.workers,
            )
        except (KTubeError, ValueError) as exc:
            print(f"ktube: model {text!r}: {exc}", file=sys.stderr)
            rows.append((text,) + (None,) * 10 + (str(exc),))
            reports.append({"model": text, "error": str(exc)})
            continue
        rows.append(
            (text, r.k, r.df, r.classical_lrt, r.aic, r.bic, r.sqrt_rho_star, r.sqrt_rho_star_lower_asymptotic,
             r.sqrt_4_mid_tube, r.pi_star, r.n_star, None)
        )
        reports.append(r.to_dict())
    text = _csv(COMPARE_HEADER, rows)
    _emit(args, stdout, text, reports, {"compare.csv": text, "compare.json": json.dumps(reports, indent=2) + "\n"})
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "profile": cmd_profile, "bootstrap": cmd_bootstrap, "compare": cmd_compare}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, stdout)
    except InvariantError as exc:
        print(f"ktube: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ConvergenceError as exc:
        print(f"ktube: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (InputError, KTubeError, ValueError, OSError) as exc:
        print(f"ktube: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
