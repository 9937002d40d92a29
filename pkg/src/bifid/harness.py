"""Per-instance experiment protocol and the metadata table.

An instance is a function pair plus a budget ``(n_h, n_l)``. Each
repetition draws a fresh optimised nested design, trains Kriging on the
high-fidelity data and Co-Kriging on both sources, and scores both on the
same random test plan. A one-sided signed-rank test per model then turns
the paired scores into good/bad labels.
"""

from __future__ import annotations

import csv
import io
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from .exceptions import BifidError, SchemaError, SizeError, StatisticalPowerError
from .features import FEATURE_IDS, FeatureTransformer, FeatureVector, feature_range, \
    sample_feature_vector, sample_features
from .sampling import NestedDesign, lhs_plan, nested_subset, optimize_plan
from .surrogates import TrainerConfig, pearson_pcorr, test_points, train_cokriging, train_kriging
from .testbed import FunctionPair, get_pair

WILCOXON_TOLERANCE = 0.001
MIN_PAIRS = 6
EXACT_MAX_N = 25
# p-value reported when there are too few pairs: just below the goodness threshold.
LOW_POWER_P = 0.5 - 1e-9

METADATA_SCHEMA = "bifid-metadata"
METADATA_VERSION = (1, 0)

ALGORITHMS = ("kriging", "cokriging")


def instance_seed(master_seed: int, pair_id: str, n_h: int, n_l: int) -> int:
    """Seed of one instance, independent of the order instances are run in."""
    ss = np.random.SeedSequence([int(master_seed), zlib.crc32(pair_id.encode()), int(n_h), int(n_l)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class InstanceSpec:
    pair_id: str
    n_h: int
    n_l: int
    repetitions: int = 40
    master_seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_h <= self.n_l:
            raise SizeError(f"need 1 <= n_h <= n_l, got n_h={self.n_h}, n_l={self.n_l}")
        if self.repetitions < 1:
            raise SizeError("repetitions must be positive")

    @property
    def instance_id(self) -> str:
        return f"{self.pair_id}:h{self.n_h}:l{self.n_l}"

    @property
    def seed(self) -> int:
        return instance_seed(self.master_seed, self.pair_id, self.n_h, self.n_l)


def study_grid(d: int) -> list[tuple[int, int]]:
    """Budgets ``n_h in {2d, ..., 20d}``, ``n_l in {4d, ..., 20d}`` with ``n_h <= n_l``."""
    return [
        (n_h, n_l)
        for n_l in range(4 * d, 20 * d + 1, 4 * d)
        for n_h in range(2 * d, 20 * d + 1, 2 * d)
        if n_h <= n_l
    ]


@dataclass
class InstanceResult:
    spec: InstanceSpec
    source: str
    d: int
    acc_kriging: list[float]
    acc_cokriging: list[float]
    p_kriging: float
    p_cokriging: float
    good_kriging: bool
    good_cokriging: bool
    features: FeatureVector
    n_failed: int = 0
    low_power: bool = False
    failures: list[str] = field(default_factory=list)
    designs: list[NestedDesign] = field(default_factory=list, repr=False)

    @property
    def instance_id(self) -> str:
        return self.spec.instance_id


# ---------------------------------------------------------------------------
# Signed-rank test


def _exact_cdf(ranks2: np.ndarray, t2: int) -> float:
    """P(sum of a random subset of ``ranks2`` <= t2), every subset equally likely."""
    total = int(ranks2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in ranks2:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return float(counts[: max(t2, -1) + 1].sum() / counts.sum())


def wilcoxon_p(a: Sequence[float], b: Sequence[float], tolerance: float = WILCOXON_TOLERANCE) -> float:
    """One-sided signed-rank p-value for "``a`` is worse than ``b`` by more than ``tolerance``".

    Differences are ``a - b + tolerance``; zero differences are ranked and
    then dropped (Pratt). Up to 25 pairs the conditional null distribution
    is computed exactly (ties included); above that the normal
    approximation with continuity correction is used. A large p-value means
    ``a`` is at least as good as ``b`` up to the tolerance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise SizeError("paired samples must be 1-d and of equal length")
    n = len(a)
    if n < MIN_PAIRS:
        raise StatisticalPowerError(f"need at least {MIN_PAIRS} pairs, got {n}")
    diff = a - b + tolerance
    nonzero = diff != 0
    if not nonzero.any():
        return 1.0
    ranks = rankdata(np.abs(diff))
    r_plus = float(ranks[diff > 0].sum())

    if n <= EXACT_MAX_N:
        # ranks are multiples of 1/2, so doubling makes them integers
        ranks2 = np.rint(2 * ranks[nonzero]).astype(int)
        return _exact_cdf(ranks2, int(round(2 * r_plus)))

    n0 = int(n - nonzero.sum())
    mean = (n * (n + 1) - n0 * (n0 + 1)) / 4.0
    var = n * (n + 1) * (2 * n + 1) - n0 * (n0 + 1) * (2 * n0 + 1)
    _, tie_sizes = np.unique(np.abs(diff[nonzero]), return_counts=True)
    var -= np.sum(tie_sizes.astype(float) ** 3 - tie_sizes) / 2.0
    se = math.sqrt(var / 24.0)
    z = (r_plus - mean + 0.5) / se
    return float(ndtr(z))


def binary_label(p: float) -> bool:
    """Good iff ``p > 0.5``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value outside [0, 1]: {p}")
    return p > 0.5


# ---------------------------------------------------------------------------
# Running instances


def repetition_seeds(spec: InstanceSpec, rep: int) -> tuple[int, int, int, int]:
    """Plan, subset, model and test-plan seeds of one repetition."""
    seeds = np.random.SeedSequence([spec.seed, rep]).generate_state(4, dtype=np.uint32)
    return tuple(int(s) for s in seeds)


def repetition_design(spec: InstanceSpec, d: int, rep: int) -> NestedDesign:
    plan_seed, subset_seed, _, _ = repetition_seeds(spec, rep)
    plan = optimize_plan(lhs_plan(spec.n_l, d, plan_seed))
    return nested_subset(plan, spec.n_h, subset_seed)


def _repetition(pair: FunctionPair, spec: InstanceSpec, rep: int, config: TrainerConfig,
                train: bool = True):
    _, _, model_seed, test_seed = repetition_seeds(spec, rep)
    design = repetition_design(spec, pair.d, rep)
    X_l = pair.domain.from_unit(design.X_low)
    X_h = X_l[list(design.subset_indices)]
    y_l = np.asarray(pair.low(X_l), dtype=float)
    y_h = np.asarray(pair.high(X_h), dtype=float)
    y_l_at_h = y_l[list(design.subset_indices)]
    feats = sample_features(design.X_high, y_l_at_h, y_h, spec.n_l)
    if not train:
        return design, feats, (math.nan, math.nan), None

    X_test = test_points(pair.domain, 1000 * pair.d, test_seed)
    y_test = np.asarray(pair.high(X_test), dtype=float)
    bounds = pair.domain.bounds
    try:
        krig = train_kriging(X_h, y_h, config, model_seed, bounds)
        cokrig = train_cokriging(X_h, y_h, X_l, y_l, config, model_seed, bounds)
        acc = (pearson_pcorr(y_test, krig.predict(X_test)),
               pearson_pcorr(y_test, cokrig.predict(X_test)))
        error = None
    except (BifidError, np.linalg.LinAlgError) as exc:
        acc = (math.nan, math.nan)
        error = f"repetition {rep}: {type(exc).__name__}: {exc}"
    return design, feats, acc, error


def run_instance(spec: InstanceSpec, registry=None, config: TrainerConfig | None = None) -> InstanceResult:
    """Run every repetition of ``spec`` and label both models."""
    config = config or TrainerConfig()
    pair = get_pair(spec.pair_id, registry)
    if spec.n_h < 2:
        raise SizeError("features and Kriging need at least two high-fidelity points")
    per_rep, acc_k, acc_c, failures, designs = [], [], [], [], []
    for rep in range(spec.repetitions):
        design, feats, (a_k, a_c), error = _repetition(pair, spec, rep, config)
        designs.append(design)
        per_rep.append(feats)
        acc_k.append(a_k)
        acc_c.append(a_c)
        if error:
            failures.append(error)

    valid = np.isfinite(acc_k) & np.isfinite(acc_c)
    a = np.asarray(acc_k)[valid]
    b = np.asarray(acc_c)[valid]
    try:
        p_k, p_c = wilcoxon_p(a, b), wilcoxon_p(b, a)
        low_power = False
    except StatisticalPowerError:
        p_k = p_c = LOW_POWER_P
        low_power = True
    return InstanceResult(
        spec=spec,
        source=pair.source_tag,
        d=pair.d,
        acc_kriging=acc_k,
        acc_cokriging=acc_c,
        p_kriging=p_k,
        p_cokriging=p_c,
        good_kriging=binary_label(p_k),
        good_cokriging=binary_label(p_c),
        features=sample_feature_vector(per_rep),
        n_failed=int((~valid).sum()),
        low_power=low_power,
        failures=failures,
        designs=designs,
    )


def instance_features(spec: InstanceSpec, registry=None) -> FeatureVector:
    """Averaged sample features of ``spec`` without training any model."""
    pair = get_pair(spec.pair_id, registry)
    reps = [_repetition(pair, spec, rep, TrainerConfig(), train=False)[1]
            for rep in range(spec.repetitions)]
    return sample_feature_vector(reps)


# ---------------------------------------------------------------------------
# Metadata table


STRING_COLUMNS = ("instance_id", "source")
INT_COLUMNS = ("d", "n_h", "n_l", "n_valid", "good_kriging", "good_cokriging")


def metadata_columns(feature_ids: Sequence[str] = FEATURE_IDS) -> list[str]:
    return (
        ["instance_id", "source", "d", "n_h", "n_l"]
        + list(feature_ids)
        + [f"t_{f}" for f in feature_ids]
        + ["n_valid", "p_kriging", "p_cokriging", "good_kriging", "good_cokriging"]
    )


@dataclass
class MetadataTable:
    columns: list[str]
    rows: list[dict]

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def feature_ids(self) -> list[str]:
        return [c[2:] for c in self.columns if c.startswith("t_")]


def assemble_metadata(results: Iterable[InstanceResult], transformer: FeatureTransformer | None = None,
                      feature_ids: Sequence[str] = FEATURE_IDS) -> tuple[MetadataTable, FeatureTransformer | None]:
    """One row per instance with raw and transformed features and labels.

    Missing raw features are kept as NaN and transform to 0. When no
    fitted ``transformer`` is given, one is fitted on these results.
    """
    results = list(results)
    columns = metadata_columns(feature_ids)
    ids = [r.instance_id for r in results]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise SchemaError(f"duplicate instance ids: {', '.join(dupes)}")
    if not results:
        return MetadataTable(columns, []), transformer
    raw = np.array([[r.features.values[f] for f in feature_ids] for r in results])
    if transformer is None:
        transformer = FeatureTransformer(
            ranges=[feature_range(f) for f in feature_ids],
            feature_names=list(feature_ids),
            missing="zero",
        ).fit(raw)
    transformed = transformer.transform(raw, instance_ids=ids)
    rows = []
    for r, raw_row, t_row in zip(results, raw, transformed):
        row = {"instance_id": r.instance_id, "source": r.source, "d": r.d,
               "n_h": r.spec.n_h, "n_l": r.spec.n_l}
        row.update(zip(feature_ids, map(float, raw_row)))
        row.update(zip((f"t_{f}" for f in feature_ids), map(float, t_row)))
        row.update(n_valid=len(r.acc_kriging) - r.n_failed, p_kriging=r.p_kriging,
                   p_cokriging=r.p_cokriging, good_kriging=int(r.good_kriging),
                   good_cokriging=int(r.good_cokriging))
        rows.append(row)
    rows.sort(key=lambda row: row["instance_id"])
    return MetadataTable(columns, rows), transformer


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(table: MetadataTable, path=None, schema: str = METADATA_SCHEMA,
                version: tuple[int, int] = METADATA_VERSION) -> str:
    """CSV with a schema line; floats use ``repr`` so a read-back is bit-identical."""
    buf = io.StringIO()
    buf.write(f"# schema: {schema}/{version[0]}.{version[1]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_format(row[c]) for c in table.columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _parse(name: str, value: str):
    if name in STRING_COLUMNS or name in ("choice", "rule_fired"):
        return value
    if name in INT_COLUMNS:
        return int(value)
    return float(value)


def read_table(path_or_text, schema: str = METADATA_SCHEMA, required: Sequence[str] = ()) -> MetadataTable:
    text = str(path_or_text)
    if not text.startswith("# schema:"):
        text = Path(path_or_text).read_text()
    first, _, body = text.partition("\n")
    tag = first.removeprefix("# schema:").strip()
    name, _, ver = tag.partition("/")
    if name != schema:
        raise SchemaError(f"expected a {schema} table, found {tag!r}")
    major = ver.split(".")[0]
    if major != str(METADATA_VERSION[0]):
        raise SchemaError(f"unsupported {schema} major version {major!r}")
    reader = csv.reader(io.StringIO(body))
    try:
        columns = next(reader)
    except StopIteration:
        raise SchemaError("table has no header row") from None
    missing = [c for c in required if c not in columns]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}")
    rows = [{c: _parse(c, v) for c, v in zip(columns, line)} for line in reader if line]
    return MetadataTable(columns, rows)
