"""Tabular dataset handling: schema, CSV ingest, splits, and numeric encoding.

The student-performance CSV dialect is semicolon-delimited with a header row
and quoted strings. A bundled schema for the 32-feature student dataset ships
with the package; other single-table datasets work by supplying a schema file
of the same shape.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

DISCRETE = "discrete"
CONTINUOUS = "continuous"


class SchemaError(ValueError):
    """Schema file or schema/CSV structure problem."""


class RowError(ValueError):
    """A CSV row violates the schema; carries the offending row index."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class FeatureSchema:
    """Typed domain of a single feature column.

    Discrete features carry an ordered tuple of permitted values (strings or
    ints); continuous features carry an inclusive [min, max] range with a
    positive step resolution.
    """

    name: str
    kind: str
    values: tuple = ()
    min: float = 0.0
    max: float = 1.0
    step: float = 1.0

    def __post_init__(self):
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == DISCRETE:
            if not self.values:
                raise SchemaError(f"{self.name}: discrete feature needs a non-empty value set")
            if len(set(self.values)) != len(self.values):
                raise SchemaError(f"{self.name}: duplicate values in domain")
        else:
            if not self.min < self.max:
                raise SchemaError(f"{self.name}: continuous range needs min < max")
            if not self.step > 0:
                raise SchemaError(f"{self.name}: continuous step must be > 0")

    def contains(self, value) -> bool:
        if self.kind == DISCRETE:
            return value in self.values
        return self.min <= float(value) <= self.max

    def parse(self, text: str):
        """Parse a CSV cell into this feature's value type."""
        if self.kind == CONTINUOUS:
            return float(text)
        if self.values and isinstance(self.values[0], int):
            return int(text)
        return text


@dataclass(frozen=True)
class DataSchema:
    """Feature schemas plus the target column definition."""

    features: tuple[FeatureSchema, ...]
    target: str
    n_classes: int = 21

    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise SchemaError(f"no feature named {name!r}")

    def drop(self, names) -> "DataSchema":
        keep = tuple(f for f in self.features if f.name not in set(names))
        if len(keep) == len(self.features):
            return self
        return replace(self, features=keep)


@dataclass(frozen=True)
class Sample:
    """One row: raw feature values in schema order, integer class target."""

    features: tuple
    target: int
    synthetic: bool = False
    source_index: int | None = None


def validate_sample(schema: DataSchema, sample: Sample) -> None:
    """Raise ValueError if the sample violates the schema."""
    if len(sample.features) != len(schema.features):
        raise ValueError(
            f"expected {len(schema.features)} features, got {len(sample.features)}"
        )
    for f, v in zip(schema.features, sample.features):
        if not f.contains(v):
            raise ValueError(f"feature {f.name}: value {v!r} outside domain")
    if not (0 <= sample.target < schema.n_classes):
        raise ValueError(f"target {sample.target} outside [0, {schema.n_classes - 1}]")


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of samples with a class -> indices partition."""

    schema: DataSchema
    samples: tuple[Sample, ...]
    class_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index: dict[int, list[int]] = {}
        for i, s in enumerate(self.samples):
            index.setdefault(s.target, []).append(i)
        object.__setattr__(
            self, "class_index", {c: tuple(ix) for c, ix in sorted(index.items())}
        )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    def targets(self) -> np.ndarray:
        return np.array([s.target for s in self.samples], dtype=np.int64)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.schema, tuple(self.samples[int(i)] for i in indices))

    def extend(self, extra_samples) -> "Dataset":
        return Dataset(self.schema, self.samples + tuple(extra_samples))

    def drop_feature(self, index: int) -> "Dataset":
        """New dataset without feature `index` (used by drop-column importance)."""
        schema = replace(
            self.schema,
            features=self.schema.features[:index] + self.schema.features[index + 1:],
        )
        samples = tuple(
            replace(s, features=s.features[:index] + s.features[index + 1:])
            for s in self.samples
        )
        return Dataset(schema, samples)


def load_schema(path) -> DataSchema:
    """Read a schema file (JSON: target{name, classes} + features list)."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    feats = []
    for entry in raw.get("features", []):
        kind = entry.get("kind")
        if kind == DISCRETE:
            feats.append(FeatureSchema(entry["name"], DISCRETE, values=tuple(entry["values"])))
        elif kind == CONTINUOUS:
            feats.append(
                FeatureSchema(
                    entry["name"], CONTINUOUS,
                    min=float(entry["min"]), max=float(entry["max"]), step=float(entry["step"]),
                )
            )
        else:
            raise SchemaError(f"{entry.get('name')}: unknown kind {kind!r}")
    target = raw.get("target", {})
    if not feats or "name" not in target:
        raise SchemaError("schema needs a features list and a target name")
    return DataSchema(tuple(feats), target["name"], int(target.get("classes", 21)))


def schema_to_dict(schema: DataSchema) -> dict:
    feats = []
    for f in schema.features:
        if f.kind == DISCRETE:
            feats.append({"name": f.name, "kind": DISCRETE, "values": list(f.values)})
        else:
            feats.append({"name": f.name, "kind": CONTINUOUS,
                          "min": f.min, "max": f.max, "step": f.step})
    return {"target": {"name": schema.target, "classes": schema.n_classes},
            "features": feats}


def schema_from_dict(raw: dict) -> DataSchema:
    feats = []
    for entry in raw["features"]:
        if entry["kind"] == DISCRETE:
            feats.append(FeatureSchema(entry["name"], DISCRETE, values=tuple(entry["values"])))
        else:
            feats.append(FeatureSchema(entry["name"], CONTINUOUS, min=float(entry["min"]),
                                       max=float(entry["max"]), step=float(entry["step"])))
    return DataSchema(tuple(feats), raw["target"]["name"], int(raw["target"].get("classes", 21)))


def student_schema(include_prior_grades: bool = True) -> DataSchema:
    """The bundled 32-feature student dataset schema.

    Whether the two intermediate grade columns belong among the predictors is
    a modeling choice; with them included the feature count is 32.
    """
    with resources.as_file(resources.files("sedg.assets") / "student_schema.json") as p:
        schema = load_schema(p)
    if not include_prior_grades:
        schema = schema.drop(("G1", "G2"))
    return schema


def student_csv_path() -> Path:
    """Path of the bundled student CSV (synthetic stand-in for the UCI file)."""
    with resources.as_file(resources.files("sedg.assets") / "student-por.csv") as p:
        return p


def load_student(include_prior_grades: bool = True) -> Dataset:
    schema = student_schema(include_prior_grades)
    return load_csv(student_csv_path(), schema)


def load_csv(path, schema: DataSchema) -> Dataset:
    """Load a semicolon-delimited CSV with header against the schema.

    Extra columns beyond schema+target are ignored, except the provenance
    pair (`synthetic`, `source_index`) written by synthetic-batch export,
    which round-trips back onto the samples.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=";")
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        col = {name: i for i, name in enumerate(header)}
        for f in schema.features:
            if f.name not in col:
                raise SchemaError(f"missing column {f.name!r}")
        if schema.target not in col:
            raise SchemaError(f"missing target column {schema.target!r}")

        samples = []
        for row_idx, row in enumerate(reader):
            if not row:
                continue
            values = []
            for f in schema.features:
                text = row[col[f.name]]
                try:
                    value = f.parse(text)
                except ValueError:
                    raise RowError(row_idx, f"feature {f.name}: cannot parse {text!r}")
                if not f.contains(value):
                    raise RowError(row_idx, f"feature {f.name}: value {value!r} outside domain")
                values.append(value)
            try:
                target = int(row[col[schema.target]])
            except ValueError:
                raise RowError(row_idx, f"target: cannot parse {row[col[schema.target]]!r}")
            if not (0 <= target < schema.n_classes):
                raise RowError(
                    row_idx, f"target {target} outside [0, {schema.n_classes - 1}]"
                )
            synthetic = False
            source_index = None
            if "synthetic" in col:
                synthetic = row[col["synthetic"]].strip().lower() in ("1", "true", "yes")
            if "source_index" in col and row[col["source_index"]].strip() != "":
                source_index = int(row[col["source_index"]])
            samples.append(Sample(tuple(values), target, synthetic, source_index))
    return Dataset(schema, tuple(samples))


def save_csv(dataset: Dataset, path, provenance: bool = True) -> None:
    """Write a dataset in the input CSV dialect, plus provenance columns."""
    header = list(dataset.schema.feature_names()) + [dataset.schema.target]
    if provenance:
        header += ["synthetic", "source_index"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=";", quoting=csv.QUOTE_NONNUMERIC)
        writer.writerow(header)
        for s in dataset.samples:
            row = list(s.features) + [s.target]
            if provenance:
                row += [int(s.synthetic), "" if s.source_index is None else s.source_index]
            writer.writerow(row)


def class_distribution(dataset: Dataset) -> dict[int, int]:
    """Per-class sample counts; values sum to len(dataset)."""
    return {c: len(ix) for c, ix in dataset.class_index.items()}


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic stratified split; |test| = round(test_fraction * n).

    Per-class test counts follow the largest-remainder rule, so each class
    deviates from its exact proportion by at most one sample. Singleton
    classes stay in train.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n = len(dataset)
    test_total = round(test_fraction * n)

    classes = sorted(dataset.class_index)
    base: dict[int, int] = {}
    remainders = []
    for c in classes:
        members = dataset.class_index[c]
        if len(members) < 2:
            base[c] = 0
            continue
        exact = test_fraction * len(members)
        take = int(exact)
        take = min(take, len(members) - 1)
        base[c] = take
        remainders.append((exact - take, c))
    short = test_total - sum(base.values())
    # distribute leftover slots by largest fractional remainder, never
    # emptying a class out of train
    remainders.sort(key=lambda t: (-t[0], t[1]))
    while short > 0:
        progressed = False
        for _, c in remainders:
            if short == 0:
                break
            if base[c] + 1 <= len(dataset.class_index[c]) - 1:
                base[c] += 1
                short -= 1
                progressed = True
        if not progressed:
            break
    while short < 0:
        for _, c in sorted(remainders, key=lambda t: (t[0], t[1])):
            if short == 0:
                break
            if base[c] > 0:
                base[c] -= 1
                short += 1

    test_idx: list[int] = []
    for c in classes:
        members = np.array(dataset.class_index[c])
        rng.shuffle(members)
        test_idx.extend(members[: base[c]].tolist())
    test_set = set(test_idx)
    train_idx = [i for i in range(n) if i not in test_set]
    return dataset.subset(train_idx), dataset.subset(sorted(test_idx))


class Encoder:
    """Numeric encoding: discrete -> value index, continuous -> [0, 1] scale.

    decode(encode(s)) is the identity for schema-valid samples whose
    continuous values lie on the step grid.
    """

    def __init__(self, schema: DataSchema):
        self.schema = schema
        self.columns = []
        for f in schema.features:
            if f.kind == DISCRETE:
                self.columns.append(
                    {"kind": DISCRETE, "name": f.name,
                     "n_values": len(f.values),
                     "to_code": {v: i for i, v in enumerate(f.values)},
                     "values": f.values}
                )
            else:
                self.columns.append(
                    {"kind": CONTINUOUS, "name": f.name,
                     "min": f.min, "max": f.max, "step": f.step}
                )

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def encode_samples(self, samples) -> np.ndarray:
        X = np.empty((len(samples), self.n_features), dtype=np.float64)
        for i, s in enumerate(samples):
            for j, c in enumerate(self.columns):
                v = s.features[j]
                if c["kind"] == DISCRETE:
                    X[i, j] = c["to_code"][v]
                else:
                    X[i, j] = (float(v) - c["min"]) / (c["max"] - c["min"])
        return X

    def encode_dataset(self, dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
        return self.encode_samples(dataset.samples), dataset.targets()

    def decode_row(self, row: np.ndarray) -> tuple:
        values = []
        for j, c in enumerate(self.columns):
            x = row[j]
            if c["kind"] == DISCRETE:
                code = int(np.clip(round(x), 0, c["n_values"] - 1))
                values.append(c["values"][code])
            else:
                raw = c["min"] + float(x) * (c["max"] - c["min"])
                snapped = c["min"] + round((raw - c["min"]) / c["step"]) * c["step"]
                snapped = min(max(snapped, c["min"]), c["max"])
                values.append(int(snapped) if float(snapped).is_integer() and c["step"] >= 1 else snapped)
        return tuple(values)

    def decode(self, X: np.ndarray, targets, synthetic: bool = False) -> list[Sample]:
        return [
            Sample(self.decode_row(X[i]), int(targets[i]), synthetic=synthetic)
            for i in range(X.shape[0])
        ]


def encode(dataset: Dataset) -> tuple[np.ndarray, Encoder]:
    """Encode a dataset; returns the matrix and the invertible encoder."""
    enc = Encoder(dataset.schema)
    return enc.encode_samples(dataset.samples), enc
