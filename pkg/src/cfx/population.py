"""Candidate populations.

Candidates are kept in one of two interchangeable layouts:

- DeltaPopulation partitions candidates by their changed-group set (a 64-bit
  mask over group indices) and stores, per partition, only the columns of the
  changed features. This is the compact form the scoring path consumes.
- ListingPopulation stores full feature vectors, one row per candidate, plus
  the per-row mask. It exists to measure what the compact form saves and to
  cross-check engine behavior.

Both carry identical bookkeeping per candidate: insertion id (global,
monotone), birth generation, cached prediction/distance/score. Conversions
between the two are lossless.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from cfx.schema import FeatureGroupSet


@dataclass(frozen=True)
class DeltaSet:
    """Immutable bit vector over feature-group indices."""

    bits: int
    width: int

    def __post_init__(self):
        if self.width < 0 or self.width > FeatureGroupSet.MAX_GROUPS:
            raise ValueError("delta width out of range")
        if self.bits < 0 or self.bits >> self.width:
            raise ValueError("delta bits exceed width")

    @classmethod
    def empty(cls, width: int) -> "DeltaSet":
        return cls(0, width)

    @classmethod
    def of(cls, width: int, groups) -> "DeltaSet":
        bits = 0
        for g in groups:
            bits |= 1 << g
        return cls(bits, width)

    def set(self, g: int) -> "DeltaSet":
        return DeltaSet(self.bits | (1 << g), self.width)

    def test(self, g: int) -> bool:
        return bool((self.bits >> g) & 1)

    def union(self, other: "DeltaSet") -> "DeltaSet":
        return DeltaSet(self.bits | other.bits, self.width)

    def popcount(self) -> int:
        return bin(self.bits).count("1")

    def groups(self) -> tuple[int, ...]:
        return tuple(g for g in range(self.width) if self.test(g))


def mask_features(group_set: FeatureGroupSet, bits: int) -> np.ndarray:
    """Ascending feature indices covered by the mask's groups."""
    feats: list[int] = []
    for g in range(len(group_set)):
        if (bits >> g) & 1:
            feats.extend(group_set.groups[g])
    return np.array(sorted(feats), dtype=np.int32)


@dataclass
class Candidate:
    """Boundary-type view of one population row."""

    delta: DeltaSet
    changed_values: dict[int, float]  # feature index -> code value
    cached_prediction: Optional[float] = None
    cached_score: Optional[float] = None

    def validate(self, group_set: FeatureGroupSet) -> None:
        expected = set(mask_features(group_set, self.delta.bits).tolist())
        got = set(self.changed_values)
        if expected != got:
            raise ValueError(
                f"changed values cover features {sorted(got)}, "
                f"delta's groups cover {sorted(expected)}"
            )


class _Part:
    __slots__ = ("feat_idx", "cols", "ids", "born", "preds", "dists", "scores")

    def __init__(self, feat_idx: np.ndarray):
        w = len(feat_idx)
        self.feat_idx = feat_idx
        self.cols = np.empty((0, w), dtype=np.float64)
        self.ids = np.empty(0, dtype=np.int64)
        self.born = np.empty(0, dtype=np.int32)
        self.preds = np.empty(0, dtype=np.float64)
        self.dists = np.empty(0, dtype=np.float64)
        self.scores = np.empty(0, dtype=np.float64)

    @property
    def n_rows(self) -> int:
        return self.cols.shape[0]

    def append(self, cols: np.ndarray, ids: np.ndarray, born: int) -> None:
        r = cols.shape[0]
        self.cols = np.concatenate([self.cols, cols], axis=0)
        self.ids = np.concatenate([self.ids, ids])
        self.born = np.concatenate([self.born, np.full(r, born, dtype=np.int32)])
        nan = np.full(r, np.nan)
        self.preds = np.concatenate([self.preds, nan])
        self.dists = np.concatenate([self.dists, nan.copy()])
        self.scores = np.concatenate([self.scores, nan.copy()])

    def take(self, locals_asc: np.ndarray) -> None:
        self.cols = self.cols[locals_asc]
        self.ids = self.ids[locals_asc]
        self.born = self.born[locals_asc]
        self.preds = self.preds[locals_asc]
        self.dists = self.dists[locals_asc]
        self.scores = self.scores[locals_asc]


class BasePopulation:
    def __init__(self, base: np.ndarray, group_set: FeatureGroupSet):
        self.base = np.asarray(base, dtype=np.float64)
        self.group_set = group_set
        self.n_features = len(group_set.schema)
        self.width = len(group_set)
        self._next_id = 0
        self._feat_cache: dict[int, np.ndarray] = {}

    def features_of(self, bits: int) -> np.ndarray:
        hit = self._feat_cache.get(bits)
        if hit is None:
            hit = mask_features(self.group_set, bits)
            self._feat_cache[bits] = hit
        return hit

    def _alloc_ids(self, r: int) -> np.ndarray:
        ids = np.arange(self._next_id, self._next_id + r, dtype=np.int64)
        self._next_id += r
        return ids

    @property
    def candidates_created(self) -> int:
        return self._next_id


class DeltaPopulation(BasePopulation):
    """Partition map: delta mask -> column table of the changed features."""

    def __init__(self, base, group_set):
        super().__init__(base, group_set)
        self.parts: dict[int, _Part] = {}

    @property
    def n_rows(self) -> int:
        return sum(p.n_rows for p in self.parts.values())

    def _part(self, bits: int) -> _Part:
        p = self.parts.get(bits)
        if p is None:
            p = _Part(self.features_of(bits))
            self.parts[bits] = p
        return p

    def insert_block(self, bits: int, cols: np.ndarray, born: int) -> np.ndarray:
        """Append candidates sharing one mask; cols matches the mask's features."""
        p = self._part(bits)
        if cols.shape[1] != len(p.feat_idx):
            raise ValueError("column count does not match the delta's features")
        ids = self._alloc_ids(cols.shape[0])
        p.append(np.asarray(cols, dtype=np.float64), ids, born)
        return ids

    def insert_rows(self, bits_arr: np.ndarray, rows: np.ndarray, born: int) -> None:
        """Append full rows whose masks may differ (post-cascade regrouping)."""
        bits_arr = np.asarray(bits_arr, dtype=np.int64)
        ids = self._alloc_ids(rows.shape[0])
        for b in _distinct_in_order(bits_arr):
            sel = np.nonzero(bits_arr == b)[0]
            p = self._part(int(b))
            p.append(rows[sel][:, p.feat_idx], ids[sel], born)

    def insert(self, cand: Candidate, born: int = 0) -> int:
        cand.validate(self.group_set)
        feats = self.features_of(cand.delta.bits)
        cols = np.array([[cand.changed_values[f] for f in feats]], dtype=np.float64)
        ids = self.insert_block(cand.delta.bits, cols.reshape(1, len(feats)), born)
        p = self.parts[cand.delta.bits]
        if cand.cached_prediction is not None:
            p.preds[-1] = cand.cached_prediction
        if cand.cached_score is not None:
            p.scores[-1] = cand.cached_score
        return int(ids[0])

    def materialize_part(self, bits: int, locals_idx: Optional[np.ndarray] = None) -> np.ndarray:
        p = self.parts[bits]
        cols = p.cols if locals_idx is None else p.cols[locals_idx]
        out = np.tile(self.base, (cols.shape[0], 1))
        if len(p.feat_idx):
            out[:, p.feat_idx] = cols
        return out

    def materialize(self, cand_id: int) -> np.ndarray:
        """Full vector of the candidate with the given insertion id."""
        for bits, p in self.parts.items():
            hits = np.nonzero(p.ids == cand_id)[0]
            if hits.size:
                return self.materialize_part(bits, hits)[0]
        raise KeyError(f"no candidate with id {cand_id}")

    def value_count(self) -> int:
        return sum(p.n_rows * len(p.feat_idx) for p in self.parts.values())

    def dump(self) -> str:
        lines = []
        for bits, p in self.parts.items():
            lines.append(f"{bits:0{self.width}b}: {p.n_rows} rows x {len(p.feat_idx)} cols")
        return "\n".join(lines)


class ListingPopulation(BasePopulation):
    """Full feature-vector table plus per-row delta masks."""

    def __init__(self, base, group_set):
        super().__init__(base, group_set)
        n = self.n_features
        self.rows = np.empty((0, n), dtype=np.float64)
        self.bits = np.empty(0, dtype=np.int64)
        self.ids = np.empty(0, dtype=np.int64)
        self.born = np.empty(0, dtype=np.int32)
        self.preds = np.empty(0, dtype=np.float64)
        self.dists = np.empty(0, dtype=np.float64)
        self.scores = np.empty(0, dtype=np.float64)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def _append(self, rows: np.ndarray, bits_arr: np.ndarray, born: int) -> np.ndarray:
        r = rows.shape[0]
        ids = self._alloc_ids(r)
        self.rows = np.concatenate([self.rows, rows], axis=0)
        self.bits = np.concatenate([self.bits, bits_arr])
        self.ids = np.concatenate([self.ids, ids])
        self.born = np.concatenate([self.born, np.full(r, born, dtype=np.int32)])
        nan = np.full(r, np.nan)
        self.preds = np.concatenate([self.preds, nan])
        self.dists = np.concatenate([self.dists, nan.copy()])
        self.scores = np.concatenate([self.scores, nan.copy()])
        return ids

    def insert_block(self, bits: int, cols: np.ndarray, born: int) -> np.ndarray:
        feats = self.features_of(bits)
        rows = np.tile(self.base, (cols.shape[0], 1))
        if len(feats):
            rows[:, feats] = cols
        return self._append(rows, np.full(cols.shape[0], bits, dtype=np.int64), born)

    def insert_rows(self, bits_arr: np.ndarray, rows: np.ndarray, born: int) -> None:
        self._append(np.asarray(rows, dtype=np.float64),
                     np.asarray(bits_arr, dtype=np.int64), born)

    def materialize(self, cand_id: int) -> np.ndarray:
        hits = np.nonzero(self.ids == cand_id)[0]
        if not hits.size:
            raise KeyError(f"no candidate with id {cand_id}")
        return self.rows[hits[0]].copy()

    def value_count(self) -> int:
        return self.n_rows * self.n_features

    def dump(self) -> str:
        out: dict[int, int] = {}
        for b in self.bits:
            out[int(b)] = out.get(int(b), 0) + 1
        return "\n".join(f"{b:0{self.width}b}: {c} rows x {self.n_features} cols"
                         for b, c in out.items())


def _distinct_in_order(arr: np.ndarray) -> Iterator[int]:
    seen: set[int] = set()
    for v in arr:
        v = int(v)
        if v not in seen:
            seen.add(v)
            yield v


def to_listing(p: DeltaPopulation) -> ListingPopulation:
    out = ListingPopulation(p.base, p.group_set)
    entries = []
    for bits, part in p.parts.items():
        rows = p.materialize_part(bits)
        for i in range(part.n_rows):
            entries.append((int(part.ids[i]), bits, rows[i], part.born[i],
                            part.preds[i], part.dists[i], part.scores[i]))
    entries.sort(key=lambda e: e[0])
    for cid, bits, row, born, pred, d, s in entries:
        out._append(row.reshape(1, -1), np.array([bits], dtype=np.int64), int(born))
        out.ids[-1] = cid
        out.preds[-1] = pred
        out.dists[-1] = d
        out.scores[-1] = s
    out._next_id = p._next_id
    return out


def from_listing(l: ListingPopulation) -> DeltaPopulation:
    out = DeltaPopulation(l.base, l.group_set)
    for i in range(l.n_rows):
        bits = int(l.bits[i])
        feats = out.features_of(bits)
        cols = l.rows[i, feats].reshape(1, -1) if len(feats) else np.empty((1, 0))
        out.insert_block(bits, cols, int(l.born[i]))
        part = out.parts[bits]
        part.ids[-1] = l.ids[i]
        part.preds[-1] = l.preds[i]
        part.dists[-1] = l.dists[i]
        part.scores[-1] = l.scores[i]
    out._next_id = l._next_id
    return out
