"""Command-line entry point: ``credlearn {construct,bound,experiment,coverage}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from importlib import resources
from pathlib import Path

from .bounds import (
    BISECTION_TOL,
    FORMULA_IDS,
    MonteCarloParams,
    NumericalFailure,
    RiskOracle,
    diam_shift,
    drift_bound_rademacher,
    drift_report,
    epsilon_3star,
    epsilon_prime_ub,
    epsilon_star,
    epsilon_star_star,
    epsilon_ub,
)
from .construction import ROUTES, construct_from_config, setfunction_csv
from .experiments import ConfigError, ExperimentConfig, run_coverage, run_experiment, truncate5
from .finite_space import CredalSet, IncoherentAssessment, PowerSetTooLarge, SpaceMismatch
from .hypotheses import GaussianLabelModel, LabeledDataset, gaussian_tv, make_grid_space

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
BUNDLED = ("exp1_wide", "exp1_narrow", "exp2_sanity", "exp3_agnostic")


class UsageError(ValueError):
    pass


def _load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def bundled_config(name: str) -> dict:
    if name not in BUNDLED:
        raise UsageError(f"no bundled config {name!r}; choose from {', '.join(BUNDLED)}")
    text = resources.files("credlearn").joinpath("configs", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_construct(args) -> int:
    doc = _load_json(args.config)
    result = construct_from_config(doc, args.route)
    table = setfunction_csv(result.lower, result.upper)
    if args.out is None:
        sys.stdout.write(table)
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "setfunction.csv").write_text(table, encoding="utf-8")
    if result.credal_set is not None:
        (out / "credal_set.json").write_text(result.credal_set.dumps() + "\n", encoding="utf-8")
    else:
        print("note: lower probability is not 2-monotone; no extreme points written", file=sys.stderr)
    return EXIT_OK


def _resolve(value, base: Path, loader):
    """Inline JSON value, or a path relative to the config file."""
    if isinstance(value, str):
        p = Path(value)
        return loader((p if p.is_absolute() else base / p).read_text(encoding="utf-8"))
    return value


def _hypotheses(doc: dict):
    spec = doc.get("hypotheses", {})
    return make_grid_space(
        float(spec.get("grid_lo", -10.0)),
        float(spec.get("grid_hi", 10.0)),
        int(spec.get("count", doc.get("h_count", 100))),
        spec.get("polarity", "above"),
    )


def _extremes(doc: dict, base: Path):
    """Return (sources, credal set or None) from ``models`` or ``credal_set``."""
    if "models" in doc:
        return [GaussianLabelModel(**m) for m in doc["models"]], None
    if "credal_set" in doc:
        c = CredalSet.from_json(_resolve(doc["credal_set"], base, json.loads))
        return list(c.extremes), c
    raise UsageError("this formula needs 'models' or 'credal_set'")


def _dataset(doc: dict, base: Path) -> LabeledDataset:
    if "dataset" not in doc:
        raise UsageError("the agnostic bound needs an observed 'dataset' (CSV path or {x, y})")
    d = doc["dataset"]
    if isinstance(d, str):
        p = Path(d)
        return LabeledDataset.from_csv((p if p.is_absolute() else base / p).read_text(encoding="utf-8"))
    return LabeledDataset(d["x"], d["y"])


def gaussian_diameter(sources) -> float:
    return max((gaussian_tv(a, b) for a, b in itertools.combinations(sources, 2)), default=0.0)


def compute_bound(doc: dict, base: Path = Path("."), seed: int | None = None, log_base: str | None = None):
    formula = doc.get("formula")
    if formula not in FORMULA_IDS:
        raise UsageError(f"'formula' must be one of {', '.join(FORMULA_IDS)}")
    delta = doc.get("delta", 0.05)
    log = log_base or doc.get("log_base", "e")
    seed = doc.get("master_seed", 0) if seed is None else seed
    if "n" not in doc:
        raise UsageError("'n' is required")
    n = doc["n"]
    hs = _hypotheses(doc)
    if formula == "C_UB":
        return epsilon_ub(int(doc.get("h_count", len(hs))), n, delta, log)
    if formula == "C_PRIME_UB":
        return epsilon_prime_ub(int(doc.get("h_count", len(hs))), n, delta, log)

    sources, credal = _extremes(doc, base)
    mc = MonteCarloParams(int(doc.get("sigma_reps", 200)), int(doc.get("data_reps", 50)))
    family = {"T1": "T1", "C1_1_drift": "T1", "C1_3_diam": "T1", "T2": "T2", "C2_2_drift": "T2",
              "C2_3_diam": "T2", "T3": "T3", "C3_2_drift": "T3", "C3_3_diam": "T3"}[formula]
    if formula == "C3_2_drift":
        return drift_bound_rademacher(sources, hs, n, _k(doc), delta, mc, seed, log)
    tol, max_iter = float(doc.get("bisection_tol", BISECTION_TOL)), int(doc.get("max_iter", 200))
    if family == "T1":
        report = epsilon_star(RiskOracle(sources), hs, n, delta, log, tol, max_iter)
    elif family == "T2":
        report = epsilon_star_star(RiskOracle(sources), hs, _dataset(doc, base), n, delta, log, tol, max_iter)
    else:
        report = epsilon_3star(sources, hs, n, delta, mc, seed, log)
    if formula.endswith("_drift"):
        return drift_report(report, _k(doc))
    if formula.endswith("_diam"):
        if credal is not None:
            return diam_shift(report, credal)
        return diam_shift(report, eta=gaussian_diameter(sources))
    return report


def _k(doc: dict) -> int:
    if "k" not in doc:
        raise UsageError("drift formulas need the split point 'k'")
    return int(doc["k"])


def _report_markdown(report) -> str:
    row = report.csv_row()
    lines = ["| " + " | ".join(row) + " |", "|" + "|".join("---" for _ in row) + "|"]
    cells = [truncate5(v) if isinstance(v, float) else str(v) for v in row.values()]
    lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def cmd_bound(args) -> int:
    doc = _load_json(args.config)
    report = compute_bound(doc, Path(args.config).parent, args.seed, args.log_base)
    fmt = args.format or "json"
    if fmt == "json":
        text = report.dumps() + "\n"
    elif fmt == "csv":
        text = report.to_csv()
    else:
        text = _report_markdown(report)
    _emit(text, args.out)
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    if (args.config is None) == (args.name is None):
        raise UsageError("pass exactly one of --config or --name")
    doc = _load_json(args.config) if args.config else bundled_config(args.name)
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.log_base is not None:
        doc["log_base"] = "ten" if args.log_base == "10" else "natural"
    if getattr(args, "trials", None) is not None:
        doc["trials"] = args.trials
    return ExperimentConfig.from_dict(doc)


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    _emit(run_experiment(cfg).render(args.format or "md"), args.out)
    return EXIT_OK


def cmd_coverage(args) -> int:
    cfg = _experiment_config(args)
    mode = args.mode or ("excess" if cfg.noise_rho > 0 else "risk")
    _emit(run_coverage(cfg, mode, args.n).render(args.format or "md"), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="credlearn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats):
        sp.add_argument("--config", help="JSON config path")
        sp.add_argument("--out", help="output path (a directory for construct)")
        sp.add_argument("--format", choices=formats)
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--log-base", choices=("e", "10"), dest="log_base")

    c = sub.add_parser("construct", help="build lower/upper probabilities and extreme points")
    common(c, ("csv",))
    c.add_argument("--route", choices=ROUTES)
    c.set_defaults(func=cmd_construct)

    b = sub.add_parser("bound", help="evaluate one bound formula")
    common(b, ("json", "csv", "md"))
    b.set_defaults(func=cmd_bound)

    e = sub.add_parser("experiment", help="rerun a synthetic experiment")
    common(e, ("md", "csv"))
    e.add_argument("--name", choices=BUNDLED, help="use a bundled config")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("coverage", help="count bound violations over seeded trials")
    common(v, ("md", "csv"))
    v.add_argument("--name", choices=BUNDLED)
    v.add_argument("--mode", choices=("risk", "excess"))
    v.add_argument("--trials", type=int)
    v.add_argument("--n", type=int, help="single sample size instead of the config's list")
    v.set_defaults(func=cmd_coverage)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("construct", "bound") and args.config is None:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"config error: malformed JSON ({exc})", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, UsageError, IncoherentAssessment, PowerSetTooLarge, SpaceMismatch,
            ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
