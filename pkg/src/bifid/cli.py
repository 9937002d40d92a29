"""Command-line entry point ``bifid``.

Exit codes: 0 success, 1 configuration or input error, 2 some instances
failed (the run still completes and writes everything else).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
import sklearn

from . import __version__
from .exceptions import BifidError, ConfigError, SchemaError, SelectionError
from .features import FEATURE_IDS
from .filtering import SOURCE_TIERS, InstanceMetadataRow, critical_set, dissimilar_set, select_theta
from .harness import (
    InstanceSpec,
    MetadataTable,
    assemble_metadata,
    instance_features,
    study_grid,
    read_table,
    repetition_design,
    run_instance,
    write_table,
)
from .sampling import lhs_plan, nested_subset, optimize_plan, write_plan
from .selector import (
    EXTERNAL_INPUTS,
    KRIGING,
    PROJECTION_INPUTS,
    cc_baseline_select,
    project_2d,
    rule_select_row,
    train_classifier,
)
from .surrogates import TrainerConfig, accuracy, dump_model, train_cokriging, train_kriging
from .testbed import CATALOGUE_VERSION, DisturbanceConfig, get_pair, list_literature_pairs, \
    make_disturbance_pair

log = logging.getLogger("bifid")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2
DECISIONS_SCHEMA = "bifid-decisions"
# choice recorded when a decision needs a feature that is undefined for the instance
UNDECIDED = "undecided"
SEED_ENV = "BIFID_SEED"


# ---------------------------------------------------------------------------
# Configuration


def _line_of(text: str, token: str) -> int | None:
    for number, line in enumerate(text.splitlines(), 1):
        if f'"{token}"' in line:
            return number
    return None


def _config_error(text: str, token: str, message: str) -> ConfigError:
    line = _line_of(text, token) if text else None
    where = f"line {line}: " if line else ""
    return ConfigError(f"{where}{message}")


@dataclass
class RunConfig:
    """Everything a pipeline run depends on.

    ``budgets`` is ``"paper"`` or a list of ``[n_h, n_l]`` pairs; with
    ``budget_units="d"`` the pairs are multiples of each pair's dimension.
    """

    pairs: list[str] | str = "all"
    disturbances: list[dict] = field(default_factory=list)
    budgets: list[list[int]] | str = "paper"
    budget_units: str = "points"
    repetitions: int = 40
    seed: int = 0
    trainer: dict = field(default_factory=dict)
    filter: dict = field(default_factory=lambda: {"mode": "critical", "theta": "auto"})
    selector: dict = field(default_factory=lambda: {"mode": "rules"})
    output_dir: str = "bifid-out"
    jobs: int = 1

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("line 1: the config must be a JSON object")
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise _config_error(text, unknown[0], f"unknown config key {unknown[0]!r}")
        cfg = cls(**data)
        cfg.validate(text)
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text)

    def validate(self, text: str = "") -> None:
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise _config_error(text, "repetitions", "repetitions must be a positive integer")
        if not isinstance(self.seed, int):
            raise _config_error(text, "seed", "seed must be an integer")
        if self.budget_units not in ("points", "d"):
            raise _config_error(text, "budget_units", "budget_units must be 'points' or 'd'")
        if self.budgets != "paper":
            ok = isinstance(self.budgets, list) and all(
                isinstance(b, list) and len(b) == 2 and all(isinstance(v, int) for v in b)
                for b in self.budgets
            )
            if not ok or not self.budgets:
                raise _config_error(text, "budgets", "budgets must be 'paper' or a list of [n_h, n_l]")
        try:
            TrainerConfig(**self.trainer)
        except TypeError as exc:
            raise _config_error(text, "trainer", f"bad trainer settings: {exc}") from None
        if self.filter.get("mode", "critical") not in ("critical", "dissimilar"):
            raise _config_error(text, "filter", "filter mode must be 'critical' or 'dissimilar'")
        if self.selector.get("mode", "rules") not in ("rules", "cc-baseline", "classifier"):
            raise _config_error(text, "selector", "selector mode must be rules, cc-baseline or classifier")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise _config_error(text, "jobs", "jobs must be a positive integer")
        try:
            registry = build_registry(self.disturbances)
        except (ConfigError, TypeError, KeyError) as exc:
            raise _config_error(text, "disturbances", f"bad disturbance entry: {exc}") from None
        for pair_id in self.pair_ids(registry):
            if pair_id not in registry:
                raise _config_error(text, pair_id, f"unknown function pair id {pair_id!r}")

    def pair_ids(self, registry) -> list[str]:
        if self.pairs == "all":
            return sorted(registry)
        if isinstance(self.pairs, str):
            return [self.pairs]
        return list(self.pairs)

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def build_registry(disturbances=()) -> dict:
    """Literature pairs plus the disturbance pairs described in ``disturbances``."""
    registry = {p.id: p for p in list_literature_pairs()}
    for entry in disturbances:
        entry = dict(entry)
        base = get_pair(entry.pop("base"), registry)
        pair_id = entry.pop("id", None)
        pair = make_disturbance_pair(base, DisturbanceConfig.from_dict(entry), pair_id=pair_id)
        registry[pair.id] = pair
    return registry


def instance_specs(cfg: RunConfig, registry) -> list[InstanceSpec]:
    specs = []
    for pair_id in cfg.pair_ids(registry):
        d = registry[pair_id].d
        if cfg.budgets == "paper":
            budgets = study_grid(d)
        else:
            scale = d if cfg.budget_units == "d" else 1
            budgets = [(b[0] * scale, b[1] * scale) for b in cfg.budgets]
        specs += [InstanceSpec(pair_id, n_h, n_l, cfg.repetitions, cfg.seed) for n_h, n_l in budgets]
    return specs


def _env_seed(default: int) -> int:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {value!r}") from None


# ---------------------------------------------------------------------------
# Running instances


def _run_one(args):
    spec, disturbances, trainer = args
    registry = build_registry(disturbances)
    try:
        return run_instance(spec, registry, TrainerConfig(**trainer)), None
    except BifidError as exc:
        return None, f"{spec.instance_id}: {type(exc).__name__}: {exc}"


def run_specs(specs, disturbances, trainer: dict, jobs: int = 1):
    """Run instances, possibly in worker processes; results come back sorted by id."""
    work = [(spec, list(disturbances), dict(trainer)) for spec in specs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, work))
    else:
        outcomes = [_run_one(w) for w in work]
    results = sorted((r for r, _ in outcomes if r is not None), key=lambda r: r.instance_id)
    errors = [e for _, e in outcomes if e is not None]
    for error in errors:
        log.error("instance failed: %s", error)
    return results, errors


# ---------------------------------------------------------------------------
# Filtering, projection, selection, report


def metadata_rows(table: MetadataTable, features=None) -> list[InstanceMetadataRow]:
    features = features or table.feature_ids()
    missing = [f"t_{f}" for f in features if f"t_{f}" not in table.columns]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}")
    return [
        InstanceMetadataRow(
            row["instance_id"],
            [row[f"t_{f}"] for f in features],
            (row["good_kriging"], row["good_cokriging"]),
            SOURCE_TIERS.get(row["source"], max(SOURCE_TIERS.values()) + 1),
        )
        for row in table.rows
    ]


def default_theta_grid(rows, size: int = 20) -> list[float]:
    F = np.array([r.features for r in rows])
    diameter = float(max(np.linalg.norm(F - f, axis=1).max() for f in F))
    return [diameter * k / size for k in range(1, size + 1)]


def filter_table(table: MetadataTable, mode="critical", theta="auto", grid=None, features=None):
    """Filtered copy of ``table`` and a summary of the filter run."""
    rows = metadata_rows(table, features)
    if len(rows) < 2:
        return MetadataTable(table.columns, list(table.rows)), {"theta": 0.0, "retained": len(rows)}
    if theta == "auto":
        theta, raw_u = select_theta(rows, grid or default_theta_grid(rows))
    run = critical_set if mode == "critical" else dissimilar_set
    result = run(rows, float(theta))
    keep = set(result.retained)
    summary = {"theta": result.theta, "mode": mode, "uniformity": result.uniformity,
               "dissimilar": result.n_dissimilar, "violations": result.n_violations,
               "retained": len(keep)}
    return MetadataTable(table.columns, [r for r in table.rows if r["instance_id"] in keep]), summary


def projection_inputs(row: dict) -> list[float]:
    """Transformed projection inputs of one row; external landscape inputs default to 0."""
    values = []
    for name in PROJECTION_INPUTS:
        key = f"t_{name}"
        if key in row:
            values.append(float(row[key]))
        elif name in EXTERNAL_INPUTS:
            values.append(0.0)
        else:
            raise SchemaError(f"missing columns: {key}")
    return values


def decisions_table(table: MetadataTable, mode="rules", lcc_095_threshold=0.5, C=1.0):
    """Per-instance choices plus the projected coordinates."""
    columns = ["instance_id", "source", "z1", "z2", "good_kriging", "good_cokriging",
               "choice", "rule_fired"]
    if not table.rows:
        return MetadataTable(columns, []), {}
    Z = project_2d(np.array([projection_inputs(r) for r in table.rows]))
    info = {}
    if mode == "classifier":
        y = [r["good_kriging"] for r in table.rows]
        clf = train_classifier(Z, y, C=C)
        choices = clf.predict(Z)
        fired = ["classifier"] * len(choices)
        info["training_accuracy"] = clf.training_accuracy_
    else:
        choices, fired = [], []
        for r in table.rows:
            try:
                d = rule_select_row(r, lcc_095_threshold) if mode == "rules" else cc_baseline_select(r["cc"])
                choices.append(d.choice)
                fired.append(d.rule_fired)
            except SelectionError as exc:
                choices.append(UNDECIDED)
                fired.append(str(exc).split(": ")[-1])
    rows = []
    for r, z, choice, rule in zip(table.rows, Z, choices, fired):
        rows.append({"instance_id": r["instance_id"], "source": r["source"],
                     "z1": float(z[0]), "z2": float(z[1]),
                     "good_kriging": r["good_kriging"], "good_cokriging": r["good_cokriging"],
                     "choice": str(choice), "rule_fired": rule})
    return MetadataTable(columns, rows), info


def _ratio(num, den):
    return num / den if den else float("nan")


def selection_report(rows) -> dict:
    """Pr(good) per model, and accuracy, precision and recall of the choices.

    For each model, "predicted good" means the selector chose it.
    """
    n = len(rows)
    out = {"n": n, "algorithms": {}}
    if n == 0:
        return out
    for name, col in (("Kriging", "good_kriging"), ("CoKriging", "good_cokriging")):
        good = np.array([r[col] for r in rows], dtype=bool)
        chosen = np.array([r["choice"] == name for r in rows])
        out["algorithms"][name] = {
            "pr_good": float(good.mean()),
            "accuracy": float((good == chosen).mean()),
            "precision": _ratio(float((good & chosen).sum()), float(chosen.sum())),
            "recall": _ratio(float((good & chosen).sum()), float(good.sum())),
        }
    decided = [r for r in rows if r["choice"] != UNDECIDED]
    hit = [r["good_kriging"] if r["choice"] == KRIGING else r["good_cokriging"] for r in decided]
    out["selector_accuracy"] = float(np.mean(hit)) if hit else float("nan")
    out["undecided"] = n - len(decided)
    out["both_good"] = sum(1 for r in rows if r["good_kriging"] and r["good_cokriging"])
    out["both_bad"] = sum(1 for r in rows if not r["good_kriging"] and not r["good_cokriging"])
    return out


def format_report(report: dict) -> str:
    if report["n"] == 0:
        return "no instances\n"
    lines = [f"{'algorithm':<10} {'pr_good':>8} {'accuracy':>9} {'precision':>10} {'recall':>7}"]
    for name, s in report["algorithms"].items():
        lines.append(f"{name:<10} {s['pr_good']:>8.3f} {s['accuracy']:>9.3f} "
                     f"{s['precision']:>10.3f} {s['recall']:>7.3f}")
    lines.append(f"selector accuracy {report['selector_accuracy']:.3f} over "
                 f"{report['n'] - report['undecided']} decided instances ({report['undecided']} undecided)")
    lines.append(f"both good {report['both_good']}, both bad {report['both_bad']}")
    return "\n".join(lines) + "\n"


def _read_any(path, required=()):
    text = Path(path).read_text()
    schema = text.partition("\n")[0].removeprefix("# schema:").strip().partition("/")[0]
    if schema not in ("bifid-metadata", DECISIONS_SCHEMA):
        raise SchemaError(f"{path}: unknown table schema {schema!r}")
    return read_table(text, schema=schema, required=required)


# ---------------------------------------------------------------------------
# Pipeline


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def command_pipeline(config_path, jobs: int | None = None) -> int:
    cfg = RunConfig.from_file(config_path)
    cfg.seed = _env_seed(cfg.seed)
    if jobs is not None:
        cfg.jobs = jobs
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        out = Path(config_path).resolve().parent / out
    out.mkdir(parents=True, exist_ok=True)
    registry = build_registry(cfg.disturbances)
    specs = instance_specs(cfg, registry)

    results, errors = run_specs(specs, cfg.disturbances, cfg.trainer, cfg.jobs)

    plan_dir = out / "plans"
    for r in results:
        inst_dir = plan_dir / r.instance_id.replace(":", "_")
        inst_dir.mkdir(parents=True, exist_ok=True)
        for rep, design in enumerate(r.designs):
            write_plan(design, inst_dir / f"rep{rep:03d}.plan")

    table, transformer = assemble_metadata(results)
    write_table(table, out / "metadata.csv")
    if transformer is not None:
        (out / "transform.json").write_text(transformer.to_json() + "\n")

    fcfg = dict(cfg.filter)
    filtered, fsummary = filter_table(table, fcfg.get("mode", "critical"), fcfg.get("theta", "auto"),
                                      fcfg.get("grid"), fcfg.get("features"))
    write_table(filtered, out / "filtered.csv")

    scfg = dict(cfg.selector)
    decisions, sinfo = decisions_table(filtered, scfg.get("mode", "rules"),
                                       scfg.get("lcc_095_threshold", 0.5), scfg.get("C", 1.0))
    write_table(decisions, out / "decisions.csv", schema=DECISIONS_SCHEMA)
    (out / "report.txt").write_text(format_report(selection_report(decisions.rows)))

    artifacts = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "bifid_version": __version__,
        "catalogue_version": CATALOGUE_VERSION,
        "config": cfg.to_dict(),
        "config_sha256": hashlib.sha256(cfg.canonical().encode()).hexdigest(),
        "master_seed": cfg.seed,
        "instances": {s.instance_id: {"seed": s.seed, "repetitions": s.repetitions} for s in specs},
        "failed_instances": errors,
        "failed_repetitions": {r.instance_id: r.failures for r in results if r.failures},
        "filter": fsummary,
        "selector": sinfo,
        "environment": {"python": platform.python_version(), "numpy": np.__version__,
                        "scipy": scipy.__version__, "scikit-learn": sklearn.__version__},
        "artifacts": {str(p.relative_to(out)): _digest(p) for p in artifacts},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_PARTIAL if errors else EXIT_OK


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_pairs(args, registry) -> int:
    for pair in sorted(registry.values(), key=lambda p: p.id):
        print(f"{pair.id}\td={pair.d}\t{pair.source_tag}\t{pair.description}")
    return EXIT_OK


def _design(args, d):
    seed = _env_seed(args.seed)
    plan = optimize_plan(lhs_plan(args.n_l, d, seed))
    return nested_subset(plan, args.n_h if args.n_h else args.n_l, seed + 1)


def _cmd_plan(args, registry) -> int:
    d = get_pair(args.pair, registry).d if args.pair else args.d
    if d is None:
        raise ConfigError("give --pair or --d")
    write_plan(_design(args, d), args.out)
    return EXIT_OK


def _cmd_fit(args, registry) -> int:
    pair = get_pair(args.pair, registry)
    design = _design(args, pair.d)
    X_l = pair.domain.from_unit(design.X_low)
    idx = list(design.subset_indices)
    y_l = np.asarray(pair.low(X_l), dtype=float)
    y_h = np.asarray(pair.high(X_l[idx]), dtype=float)
    seed = _env_seed(args.seed)
    if args.model == "kriging":
        model = train_kriging(X_l[idx], y_h, seed=seed, bounds=pair.domain.bounds)
    else:
        model = train_cokriging(X_l[idx], y_h, X_l, y_l, seed=seed, bounds=pair.domain.bounds)
    dump_model(model, args.out)
    print(f"p_corr {accuracy(model, pair, seed=seed).p_corr:.6f}")
    return EXIT_OK


def _specs_from_args(args, registry) -> list[InstanceSpec]:
    pairs = sorted(registry) if args.pairs == "all" else args.pairs.split(",")
    for p in pairs:
        get_pair(p, registry)
    seed = _env_seed(args.seed)
    specs = []
    for pair_id in pairs:
        d = registry[pair_id].d
        if args.grid == "paper":
            budgets = study_grid(d)
        else:
            if not args.budgets:
                raise ConfigError("--grid custom needs --budgets, e.g. 2x8,4x16")
            try:
                budgets = [tuple(int(v) for v in b.split("x")) for b in args.budgets.split(",")]
            except ValueError:
                raise ConfigError(f"cannot parse budgets {args.budgets!r}") from None
        specs += [InstanceSpec(pair_id, n_h, n_l, args.reps, seed) for n_h, n_l in budgets]
    return specs


def _cmd_run(args, registry) -> int:
    specs = _specs_from_args(args, registry)
    results, errors = run_specs(specs, args.disturbance_entries, {}, args.jobs)
    table, transformer = assemble_metadata(results)
    write_table(table, args.out)
    if transformer is not None:
        Path(str(args.out) + ".transform.json").write_text(transformer.to_json() + "\n")
    return EXIT_PARTIAL if errors else EXIT_OK


def _cmd_features(args, registry) -> int:
    specs = _specs_from_args(args, registry)
    lines = [",".join(["instance_id"] + list(FEATURE_IDS))]
    for spec in specs:
        fv = instance_features(spec, registry)
        lines.append(",".join([spec.instance_id] + [repr(fv.values[f]) for f in FEATURE_IDS]))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_filter(args, registry) -> int:
    table = read_table(args.metadata)
    theta = args.theta if args.theta == "auto" else float(args.theta)
    filtered, summary = filter_table(table, args.mode, theta)
    write_table(filtered, args.out)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_project(args, registry) -> int:
    table = read_table(args.metadata)
    lines = ["instance_id,z1,z2,good_kriging,good_cokriging"]
    for row in table.rows:
        z = project_2d(projection_inputs(row))
        lines.append(f"{row['instance_id']},{float(z[0])!r},{float(z[1])!r},{row['good_kriging']},{row['good_cokriging']}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_select(args, registry) -> int:
    table = read_table(args.features)
    decisions, info = decisions_table(table, args.mode, args.lcc_095_threshold)
    text = write_table(decisions, args.out, schema=DECISIONS_SCHEMA)
    if not args.out:
        sys.stdout.write(text)
    if info:
        print(json.dumps(info, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _cmd_report(args, registry) -> int:
    table = _read_any(args.metadata, required=("good_kriging", "good_cokriging", "choice"))
    sys.stdout.write(format_report(selection_report(table.rows)))
    return EXIT_OK


def _cmd_pipeline(args, registry) -> int:
    return command_pipeline(args.config, args.jobs)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bifid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bifid {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--disturbances", help="JSON file with a list of disturbance pair entries")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pairs = sub.add_parser("pairs", help="function pair catalogue")
    pairs.add_argument("action", choices=["list"])
    pairs.set_defaults(func=_cmd_pairs)

    def design_args(p):
        p.add_argument("--n-l", "--n-low", dest="n_l", type=int, required=True)
        p.add_argument("--n-h", "--n-high", dest="n_h", type=int)
        p.add_argument("--seed", type=int, default=0)

    plan = sub.add_parser("plan", help="write an optimised nested design")
    plan.add_argument("--pair")
    plan.add_argument("--d", "--dim", dest="d", type=int)
    design_args(plan)
    plan.add_argument("--out", required=True)
    plan.set_defaults(func=_cmd_plan)

    fit = sub.add_parser("fit", help="train one model on a fresh design")
    fit.add_argument("--pair", required=True)
    fit.add_argument("--model", choices=["kriging", "cokriging"], default="cokriging")
    design_args(fit)
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=_cmd_fit)

    def instance_args(p):
        p.add_argument("--pairs", default="all", help="comma-separated ids or 'all'")
        p.add_argument("--grid", choices=["paper", "custom"], default="paper")
        p.add_argument("--budgets", help="custom budgets as n_hxn_l, e.g. 2x8,4x16")
        p.add_argument("--reps", type=int, default=40)
        p.add_argument("--seed", type=int, default=0)

    run = sub.add_parser("run", help="run instances and write the metadata table")
    instance_args(run)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", required=True)
    run.set_defaults(func=_cmd_run)

    feats = sub.add_parser("features", help="sample features only (no model training)")
    instance_args(feats)
    feats.add_argument("--out")
    feats.set_defaults(func=_cmd_features)

    filt = sub.add_parser("filter", help="filter a metadata table")
    filt.add_argument("--metadata", required=True)
    filt.add_argument("--theta", default="auto")
    filt.add_argument("--mode", choices=["dissimilar", "critical"], default="critical")
    filt.add_argument("--out", required=True)
    filt.set_defaults(func=_cmd_filter)

    proj = sub.add_parser("project", help="2-d coordinates of each instance")
    proj.add_argument("--metadata", required=True)
    proj.add_argument("--out")
    proj.set_defaults(func=_cmd_project)

    sel = sub.add_parser("select", help="choose a model per instance")
    sel.add_argument("--mode", choices=["rules", "cc-baseline", "classifier"], default="rules")
    sel.add_argument("--features", required=True, help="metadata table")
    sel.add_argument("--lcc-095-threshold", type=float, default=0.5)
    sel.add_argument("--out")
    sel.set_defaults(func=_cmd_select)

    rep = sub.add_parser("report", help="summarise labels and decisions")
    rep.add_argument("metadata", help="decisions or metadata table with a choice column")
    rep.set_defaults(func=_cmd_report)

    pipe = sub.add_parser("pipeline", help="run, filter, select and report from one config")
    pipe.add_argument("config")
    pipe.add_argument("--jobs", type=int)
    pipe.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        disturbances = json.loads(Path(args.disturbances).read_text()) if args.disturbances else []
        registry = build_registry(disturbances)
        args.disturbance_entries = disturbances
        return args.func(args, registry)
    except (BifidError, OSError, json.JSONDecodeError) as exc:
        print(f"bifid: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
