"""Command-line entry point: ``mmwcoop run | compare | recipes``."""

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .config import ENGINES, load_study
from .errors import ConfigError, MmwCoopError
from .runner import ComparisonError, compare_engines, format_table, read_results, run_study, write_results

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_TOLERANCE = 0, 1, 2, 3

log = logging.getLogger("mmwcoop")


def recipe_paths():
    """Bundled recipe files, sorted by name."""
    root = resources.files("mmwcoop") / "recipes"
    return sorted((Path(str(p)) for p in root.iterdir() if p.name.endswith(".toml")), key=lambda p: p.name)


def resolve_config(name):
    """Accept a path or the stem of a bundled recipe (``fig2a``)."""
    path = Path(name)
    if path.exists():
        return path
    for p in recipe_paths():
        if p.stem == name or p.name == name:
            return p
    return path  # let load_study report the missing file


def _engines_arg(text):
    engines = [e.strip() for e in text.split(",") if e.strip()]
    bad = [e for e in engines if e not in ENGINES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown engine(s) {bad}; choose from {', '.join(ENGINES)}")
    return engines


def _cmd_run(args):
    overrides = {"engines": args.engines, "trials": args.trials, "seed": args.seed}
    try:
        study = load_study(resolve_config(args.config), overrides)
    except ConfigError as exc:
        print(f"invalid config {args.config}:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    log.info("running %s: %d engine(s), %d trials, seed %d", study.scenario_id, len(study.engines),
             study.trials, study.seed)
    result = run_study(study, workers=args.workers)
    out = Path(args.out) if args.out else Path("results") / study.scenario_id
    res_path, time_path = write_results(result, out)
    if result.rows:
        print(format_table(result))
    print(f"wrote {res_path} and {time_path}")
    for failure in result.failures:
        print(f"error: {failure}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_NUMERICAL


def _cmd_compare(args):
    try:
        report = compare_engines(read_results(args.table_a), read_results(args.table_b), tol_abs=args.tol_abs,
                                 n_sigma=args.n_sigma)
    except (ComparisonError, OSError) as exc:
        print(f"cannot compare: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(report.format())
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def _cmd_recipes(args):
    for path in recipe_paths():
        try:
            study = load_study(path)
            desc = study.description
        except ConfigError as exc:
            desc = f"INVALID: {exc}"
        print(f"{path.stem:<14} {desc}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mmwcoop", description="Cell-edge cooperation performance toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a scenario config and write CSV tables")
    run.add_argument("config", help="TOML config path or bundled recipe name")
    run.add_argument("--out", help="output directory (default results/<id>)")
    run.add_argument("--engines", type=_engines_arg, help="comma-separated subset of " + ",".join(ENGINES))
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int, default=1, help="process pool size")
    run.set_defaults(func=_cmd_run)

    cmp_ = sub.add_parser("compare", help="compare two results.csv files")
    cmp_.add_argument("table_a")
    cmp_.add_argument("table_b")
    cmp_.add_argument("--tol-abs", type=float, default=0.0)
    cmp_.add_argument("--n-sigma", type=float, default=3.0, help="stderr multiple added to the tolerance")
    cmp_.set_defaults(func=_cmd_compare)

    rec = sub.add_parser("recipes", help="bundled figure-reproduction configs")
    rec_sub = rec.add_subparsers(dest="action", required=True)
    rec_sub.add_parser("list").set_defaults(func=_cmd_recipes)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved for numerical failures here
        return EXIT_VALIDATION if exc.code == 2 else exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except MmwCoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
