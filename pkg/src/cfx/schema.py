"""Feature schemas, datasets and feature groups.

Everything downstream works on a dense float64 code matrix: ordinal and
continuous features keep their numeric values, categorical features are
dictionary-encoded against the dataset's active domain (codes follow the
sorted order of the observed string values). Instances cross between user
space (raw values) and code space through the schema-aware codec here.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

CATEGORICAL = "categorical"
ORDINAL = "ordinal"
CONTINUOUS = "continuous"

_KINDS = (CATEGORICAL, ORDINAL, CONTINUOUS)

# numeric kind codes used by the array kernels
KIND_CAT = 0
KIND_ORD = 1
KIND_CONT = 2


class SchemaError(ValueError):
    """Raised for malformed schemas or schema/instance mismatches."""


class DataError(ValueError):
    """Raised for malformed datasets (CSV or in-memory)."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise SchemaError("feature names must be non-empty strings")
        if self.kind not in _KINDS:
            raise SchemaError(
                f"feature {self.name!r}: kind must be one of {_KINDS}, got {self.kind!r}"
            )


class FeatureSchema:
    """Ordered list of named, typed features."""

    def __init__(self, features: Sequence[Feature]):
        if len(features) == 0:
            raise SchemaError("schema must declare at least one feature")
        names = [f.name for f in features]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate feature names: {dupes}")
        self.features: tuple[Feature, ...] = tuple(features)
        self.names: tuple[str, ...] = tuple(names)
        self._index = {n: i for i, n in enumerate(names)}
        self.kind_codes = np.array(
            [{CATEGORICAL: KIND_CAT, ORDINAL: KIND_ORD, CONTINUOUS: KIND_CONT}[f.kind]
             for f in features],
            dtype=np.int8,
        )

    def __len__(self) -> int:
        return len(self.features)

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSchema) and self.features == other.features

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def kind(self, i: int) -> str:
        return self.features[i].kind

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureSchema":
        if not isinstance(obj, dict) or "features" not in obj:
            raise SchemaError('schema JSON must be an object with a "features" list')
        feats = obj["features"]
        if not isinstance(feats, list):
            raise SchemaError('"features" must be a list')
        out = []
        for k, f in enumerate(feats):
            if not isinstance(f, dict) or "name" not in f or "kind" not in f:
                raise SchemaError(f'features[{k}] must have "name" and "kind"')
            out.append(Feature(f["name"], f["kind"]))
        return cls(out)

    def to_dict(self) -> dict:
        return {"features": [{"name": f.name, "kind": f.kind} for f in self.features]}

    @classmethod
    def load(cls, path: str) -> "FeatureSchema":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as e:
                raise SchemaError(f"invalid schema JSON in {path}: {e}") from None
        return cls.from_dict(obj)


class FeatureGroupSet:
    """Disjoint groups of feature indices; ungrouped features form singletons.

    Groups are the unit the search perturbs together: all features of a group
    are resampled jointly from the dataset so their combination stays
    plausible.
    """

    MAX_GROUPS = 64  # delta-sets are 64-bit masks

    def __init__(self, schema: FeatureSchema, groups: Iterable[Sequence[int]] = ()):
        n = len(schema)
        seen: set[int] = set()
        explicit: list[tuple[int, ...]] = []
        for g in groups:
            g = tuple(g)
            if not g:
                raise SchemaError("empty feature group")
            for i in g:
                if not 0 <= i < n:
                    raise SchemaError(f"feature index {i} out of range")
                if i in seen:
                    raise SchemaError(
                        f"feature {schema.names[i]!r} appears in more than one group"
                    )
                seen.add(i)
            explicit.append(g)
        singles = [(i,) for i in range(n) if i not in seen]
        # groups keep declaration order, singletons follow in schema order
        all_groups = explicit + singles
        if len(all_groups) > self.MAX_GROUPS:
            raise SchemaError(
                f"at most {self.MAX_GROUPS} feature groups are supported, "
                f"got {len(all_groups)}"
            )
        self.schema = schema
        self.groups: tuple[tuple[int, ...], ...] = tuple(all_groups)
        self.group_of = np.empty(n, dtype=np.int32)
        for gi, g in enumerate(self.groups):
            for i in g:
                self.group_of[i] = gi

    def __len__(self) -> int:
        return len(self.groups)

    def group_names(self, gi: int) -> tuple[str, ...]:
        return tuple(self.schema.names[i] for i in self.groups[gi])

    def label(self, gi: int) -> str:
        return "{" + ", ".join(self.group_names(gi)) + "}"


@dataclass
class Instance:
    """Raw feature values in schema order (user space, not codes)."""

    values: tuple

    @classmethod
    def from_mapping(cls, schema: FeatureSchema, mapping: dict) -> "Instance":
        missing = [n for n in schema.names if n not in mapping]
        if missing:
            raise SchemaError(f"instance missing features: {missing}")
        extra = [n for n in mapping if n not in schema.names]
        if extra:
            raise SchemaError(f"instance has unknown features: {extra}")
        return cls(tuple(mapping[n] for n in schema.names))

    def to_mapping(self, schema: FeatureSchema) -> dict:
        return {n: v for n, v in zip(schema.names, self.values)}


def _parse_number(raw: str):
    try:
        return float(raw)
    except ValueError:
        return None


class Dataset:
    """A schema plus a dense code matrix and its per-feature statistics.

    Exposes what the search needs: active domains with frequencies, numeric
    ranges for the distance normalizer, and joint (multi-feature) domains for
    grouped sampling.
    """

    def __init__(self, schema: FeatureSchema, matrix: np.ndarray,
                 categories: Optional[dict[int, tuple[str, ...]]] = None):
        categories = dict(categories or {})
        if matrix.ndim != 2 or matrix.shape[1] != len(schema):
            raise DataError("matrix shape does not match schema")
        if matrix.shape[0] == 0:
            raise DataError("dataset has no rows")
        self.schema = schema
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        # categories[i] maps code -> original string for categorical feature i
        self.categories = categories
        self._cat_index: dict[int, dict[str, int]] = {
            i: {v: c for c, v in enumerate(vals)} for i, vals in categories.items()
        }
        n = len(schema)
        self.feat_min = np.min(self.matrix, axis=0)
        self.feat_max = np.max(self.matrix, axis=0)
        self.feat_range = self.feat_max - self.feat_min
        self._domains: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._joint: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}
        for i in range(n):
            vals, counts = np.unique(self.matrix[:, i], return_counts=True)
            self._domains[i] = (vals, counts.astype(np.float64))

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    # --- domains -----------------------------------------------------------

    def active_domain(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Distinct observed code values of feature i with their counts."""
        return self._domains[i]

    def joint_domain(self, feats: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Distinct observed tuples over `feats` with their counts.

        Returns (tuples, counts): tuples is (K, len(feats)) float64 in
        lexicographic order, counts is (K,) float64.
        """
        key = tuple(feats)
        hit = self._joint.get(key)
        if hit is not None:
            return hit
        if len(key) == 1:
            vals, counts = self._domains[key[0]]
            out = (vals.reshape(-1, 1), counts)
        else:
            sub = self.matrix[:, list(key)]
            tuples, counts = np.unique(sub, axis=0, return_counts=True)
            out = (tuples, counts.astype(np.float64))
        self._joint[key] = out
        return out

    # --- codec -------------------------------------------------------------

    def encode_value(self, i: int, value) -> float:
        feat = self.schema.features[i]
        if feat.kind == CATEGORICAL:
            sval = str(value)
            code = self._cat_index.get(i, {}).get(sval)
            if code is None:
                raise SchemaError(
                    f"feature {feat.name!r}: value {sval!r} not in the active domain"
                )
            return float(code)
        num = _parse_number(str(value)) if isinstance(value, str) else value
        if num is None or isinstance(num, str):
            raise SchemaError(f"feature {feat.name!r}: expected a number, got {value!r}")
        num = float(num)
        if feat.kind == ORDINAL and not float(num).is_integer():
            # ordinals are rank-valued; accept integral floats only
            raise SchemaError(
                f"feature {feat.name!r}: ordinal values must be integral, got {value!r}"
            )
        return num

    def decode_value(self, i: int, code: float):
        feat = self.schema.features[i]
        if feat.kind == CATEGORICAL:
            vals = self.categories.get(i, ())
            ci = int(code)
            if not 0 <= ci < len(vals):
                raise SchemaError(f"feature {feat.name!r}: invalid code {code}")
            return vals[ci]
        if feat.kind == ORDINAL:
            return int(code)
        return float(code)

    def encode_instance(self, inst: Instance) -> np.ndarray:
        if len(inst.values) != len(self.schema):
            raise SchemaError(
                f"instance has {len(inst.values)} values, schema has {len(self.schema)}"
            )
        return np.array(
            [self.encode_value(i, v) for i, v in enumerate(inst.values)],
            dtype=np.float64,
        )

    def decode_codes(self, codes: np.ndarray) -> Instance:
        return Instance(tuple(self.decode_value(i, c) for i, c in enumerate(codes)))

    def row_instance(self, r: int) -> Instance:
        if not 0 <= r < self.n_rows:
            raise DataError(f"row index {r} out of range (dataset has {self.n_rows} rows)")
        return self.decode_codes(self.matrix[r])

    # --- construction ------------------------------------------------------

    @classmethod
    def from_columns(cls, schema: FeatureSchema, columns: dict[str, Sequence]) -> "Dataset":
        """Build from raw per-feature value sequences (user space)."""
        missing = [n for n in schema.names if n not in columns]
        if missing:
            raise DataError(f"missing columns: {missing}")
        n_rows = len(next(iter(columns.values())))
        matrix = np.empty((n_rows, len(schema)), dtype=np.float64)
        categories: dict[int, tuple[str, ...]] = {}
        for i, feat in enumerate(schema.features):
            col = columns[feat.name]
            if len(col) != n_rows:
                raise DataError(f"column {feat.name!r} has inconsistent length")
            if feat.kind == CATEGORICAL:
                svals = np.array([str(v) for v in col], dtype=object)
                cats, codes = np.unique(svals, return_inverse=True)
                categories[i] = tuple(cats.tolist())
                matrix[:, i] = codes.astype(np.float64)
            else:
                try:
                    matrix[:, i] = np.asarray(col, dtype=np.float64)
                except (TypeError, ValueError):
                    raise DataError(f"column {feat.name!r}: non-numeric value") from None
                if not np.all(np.isfinite(matrix[:, i])):
                    raise DataError(f"column {feat.name!r}: non-finite value")
        return cls(schema, matrix, categories)

    @classmethod
    def load_csv(cls, path_or_file, schema: FeatureSchema) -> "Dataset":
        """Load an RFC 4180 CSV with a header row; columns must match the schema."""
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "r", encoding="utf-8", newline="")
            close = True
        else:
            fh = path_or_file
            close = False
        try:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError("empty CSV: no header row") from None
            if set(header) != set(schema.names):
                missing = sorted(set(schema.names) - set(header))
                extra = sorted(set(header) - set(schema.names))
                parts = []
                if missing:
                    parts.append(f"missing columns {missing}")
                if extra:
                    parts.append(f"unexpected columns {extra}")
                raise DataError("CSV header does not match schema: " + "; ".join(parts))
            if len(set(header)) != len(header):
                raise DataError("CSV header has duplicate columns")
            col_pos = [header.index(n) for n in schema.names]
            raw_cols: list[list] = [[] for _ in schema.names]
            n_cols = len(header)
            for row_no, row in enumerate(reader, start=2):
                if len(row) != n_cols:
                    raise DataError(
                        f"row {row_no}: expected {n_cols} cells, got {len(row)}"
                    )
                for i, pos in enumerate(col_pos):
                    cell = row[pos]
                    if cell == "":
                        raise DataError(
                            f"row {row_no}, column {schema.names[i]!r}: missing value"
                        )
                    raw_cols[i].append(cell)
            if not raw_cols[0]:
                raise DataError("CSV has a header but no data rows")
        finally:
            if close:
                fh.close()

        columns: dict[str, Sequence] = {}
        for i, feat in enumerate(schema.features):
            col = raw_cols[i]
            if feat.kind == CATEGORICAL:
                columns[feat.name] = col
            else:
                parsed = []
                for r, cell in enumerate(col):
                    num = _parse_number(cell)
                    if num is None:
                        raise DataError(
                            f"row {r + 2}, column {feat.name!r}: "
                            f"cannot parse {cell!r} as a number"
                        )
                    parsed.append(num)
                columns[feat.name] = parsed
        return cls.from_columns(schema, columns)

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.schema.names)
            for r in range(self.n_rows):
                w.writerow([self.decode_value(i, self.matrix[r, i])
                            for i in range(self.n_features)])


def read_instance_csv(text: str, schema: FeatureSchema) -> Instance:
    """Parse a two-line CSV (header + one row) into an Instance."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if len(rows) != 2:
        raise DataError("instance CSV must have a header row and exactly one data row")
    header, row = rows
    if set(header) != set(schema.names):
        raise DataError("instance CSV header does not match schema")
    mapping = dict(zip(header, row))
    return Instance(tuple(mapping[n] for n in schema.names))
