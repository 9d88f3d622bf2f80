"""The counterfactual search loop.

The algorithm: ground the constraint program against x, build per-group
feasible spaces, seed a population by mutating x once per group, then iterate
{crossover of the fittest delta-sets, mutation of every candidate, selection
of the q best} until the top k candidates are all counterfactual and none of
them was created in the current generation, or a generation cap is hit.

Candidates are scored by Eq-style fitness: plain distance once the classifier
flips, distance + 1 + (1 - prediction) otherwise, so counterfactuals always
outrank non-counterfactuals. Selection batches prediction per changed-feature
partition and, when enabled, scores through classifiers specialized to the
(x, delta) context so only changed columns are evaluated.

Both population representations (partitioned delta layout, flat listing) run
through the same orchestration code and consume the random stream identically,
which makes their results interchangeable candidate-for-candidate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from cfx.distance import DistanceParams, combine_components, feature_deltas, score_batch
from cfx.models.base import Classifier
from cfx.plaf import (
    GroundedConstraints,
    PlafProgram,
    SampleSpace,
    cascade_batch,
    feasible_space,
    ground,
    parse_plaf,
)
from cfx.population import DeltaPopulation, DeltaSet, ListingPopulation
from cfx.schema import Dataset, Instance


class EngineError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    q: int = 100
    k: int = 5
    m_init: int = 20
    m_mut: int = 5
    max_generations: int = 100
    seed: int = 0
    mutation_scope: str = "all"  # "all" | "topPerDelta"
    selective_mutate: bool = False
    # Truncation selection can fixate every survivor on one delta-set whose
    # values sit just on the wrong side of the decision boundary; none of the
    # operators can then reintroduce the lost groups. Fresh independent runs
    # are the escape hatch: only taken when a run ends without converging.
    restarts: int = 3

    def __post_init__(self):
        for name in ("q", "k", "m_init", "m_mut", "max_generations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.k >= self.q:
            raise ValueError("k must be smaller than q")
        if self.mutation_scope not in ("all", "topPerDelta"):
            raise ValueError("mutation_scope must be 'all' or 'topPerDelta'")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class Explanation:
    codes: np.ndarray
    instance: Instance
    delta: DeltaSet
    distance: float
    prediction: float
    score: float
    features_changed: int


@dataclass
class ExplainResult:
    top_k: list[Explanation]
    generations: int
    explored_candidates: int
    converged: bool
    timings: dict[str, float]
    best_score_history: list[float] = field(default_factory=list)
    value_counts: list[tuple[int, int]] = field(default_factory=list)  # (delta, listing)

    @property
    def best(self) -> Optional[Explanation]:
        return self.top_k[0] if self.top_k else None


class _View:
    """Rank-ordered handles into a population after selection."""

    __slots__ = ("bits", "local", "ids", "scores", "preds", "dists", "born")

    def __init__(self, bits, local, ids, scores, preds, dists, born):
        self.bits = bits
        self.local = local
        self.ids = ids
        self.scores = scores
        self.preds = preds
        self.dists = dists
        self.born = born

    def __len__(self):
        return len(self.bits)


def _sample_without_replacement(cum_weights: np.ndarray, rows: int, m: int,
                                rng: np.random.Generator) -> np.ndarray:
    """(rows, m) distinct weighted draws per row: inverse-CDF with duplicate
    rejection; falls back to exact removal sampling under pathological
    weight concentration."""
    K = cum_weights.shape[0]
    total = cum_weights[-1]
    out = np.empty((rows, m), dtype=np.int64)
    for j in range(m):
        u = rng.random(rows) * total
        idx = np.searchsorted(cum_weights, u, side="right")
        np.minimum(idx, K - 1, out=idx)
        if j:
            for _ in range(64):
                coll = (idx[:, None] == out[:, :j]).any(axis=1)
                n_coll = int(coll.sum())
                if n_coll == 0:
                    break
                u = rng.random(n_coll) * total
                redraw = np.searchsorted(cum_weights, u, side="right")
                np.minimum(redraw, K - 1, out=redraw)
                idx[coll] = redraw
            else:
                weights = np.diff(cum_weights, prepend=0.0)
                coll = (idx[:, None] == out[:, :j]).any(axis=1)
                for r in np.nonzero(coll)[0]:
                    w = weights.copy()
                    w[out[r, :j]] = 0.0
                    cw = np.cumsum(w)
                    u1 = rng.random() * cw[-1]
                    idx[r] = min(int(np.searchsorted(cw, u1, side="right")), K - 1)
        out[:, j] = idx
    return out


class _Session:
    def __init__(self, x_codes: np.ndarray, classifier: Classifier, dataset: Dataset,
                 program: PlafProgram, hyper: Hyperparams, params: DistanceParams,
                 representation: str, partial_eval: bool, collect_value_counts: bool,
                 run: int = 0):
        self.x = x_codes
        self.classifier = classifier
        self.dataset = dataset
        self.program = program
        self.groups = program.group_set
        self.hyper = hyper
        self.params = params
        self.partial_eval = partial_eval and classifier.supports_specialization
        self.collect = collect_value_counts
        # run 0 keeps the plain seed so results are reproducible from the seed
        # alone; retries get an independent stream derived from (seed, run)
        self.rng = np.random.Generator(
            np.random.PCG64(hyper.seed if run == 0 else [hyper.seed, run]))
        self.n = len(dataset.schema)
        self.n_groups = len(self.groups)
        self.kinds = dataset.schema.kind_codes
        self.ranges = dataset.feat_range
        self.cx: GroundedConstraints = ground(x_codes, program, dataset)
        self.ss: SampleSpace = feasible_space(dataset, self.groups, self.cx)
        self.needs_cascade = self.cx.has_cross_rules or bool(self.cx.forced_groups)
        pop_cls = DeltaPopulation if representation == "delta" else ListingPopulation
        self.pop = pop_cls(x_codes, self.groups)
        self.is_delta = representation == "delta"
        self.spec_cache: dict[int, object] = {}
        self.timings = {"initial": 0.0, "selection": 0.0, "crossover": 0.0,
                        "mutation": 0.0, "selective_mutate": 0.0}
        self.view: Optional[_View] = None
        self.value_counts: list[tuple[int, int]] = []
        self._sel_tuple_deltas: dict[int, tuple] = {}

    # --- shared helpers ----------------------------------------------------

    def _partial_dist(self, cols: np.ndarray, feat_idx: np.ndarray) -> np.ndarray:
        """Distance of candidates that differ from x only at feat_idx."""
        if len(feat_idx) == 0:
            return np.zeros(cols.shape[0])
        d = feature_deltas(self.x[feat_idx], cols, self.kinds[feat_idx],
                           self.ranges[feat_idx])
        l0 = np.count_nonzero(d, axis=1).astype(np.float64)
        l1 = d.sum(axis=1)
        linf = d.max(axis=1)
        return combine_components(l0, l1, linf, self.n, self.params)

    def _predict_partition(self, bits: int, feat_idx: np.ndarray,
                           cols: np.ndarray, rows_full) -> np.ndarray:
        """rows_full: callable yielding materialized rows (lazy)."""
        if self.partial_eval:
            spec = self.spec_cache.get(bits)
            if spec is None:
                spec = self.classifier.specialize(self.x, feat_idx)
                self.spec_cache[bits] = spec
            return spec.predict_partial(cols)
        return self.classifier.predict(rows_full())

    def _insert_children(self, rows: np.ndarray, bits: np.ndarray, born: int) -> None:
        """Cascade (when the program has repairs to do) and insert."""
        if rows.shape[0] == 0:
            return
        if self.needs_cascade:
            keep = cascade_batch(rows, bits, self.cx, self.ss, self.rng)
            rows = rows[keep]
            bits = bits[keep]
            if rows.shape[0] == 0:
                return
        self.pop.insert_rows(bits, rows, born)

    def _view_rows(self) -> np.ndarray:
        """Materialized full vectors of the current view, in rank order."""
        v = self.view
        P = len(v)
        if self.is_delta:
            out = np.tile(self.x, (P, 1))
            for b in set(v.bits.tolist()):
                part = self.pop.parts[b]
                sel = np.nonzero(v.bits == b)[0]
                if len(part.feat_idx):
                    out[np.ix_(sel, part.feat_idx)] = part.cols[v.local[sel]]
            return out
        return self.pop.rows[v.local].copy()

    # --- selection ---------------------------------------------------------

    def select(self, q: int) -> None:
        t0 = time.perf_counter()
        self._score_pending()
        if self.collect:
            self.value_counts.append(
                (self.pop.value_count() if self.is_delta
                 else sum(len(self.pop.features_of(int(b))) for b in self.pop.bits),
                 self.pop.n_rows * self.n)
            )
        if self.is_delta:
            self._select_delta(q)
        else:
            self._select_listing(q)
        self.timings["selection"] += time.perf_counter() - t0

    def _score_pending(self) -> None:
        if self.is_delta:
            for bits, part in self.pop.parts.items():
                pending = np.nonzero(np.isnan(part.scores))[0]
                if pending.size == 0:
                    continue
                cols = part.cols[pending]
                preds = self._predict_partition(
                    bits, part.feat_idx, cols,
                    lambda b=bits, p=pending: self.pop.materialize_part(b, p),
                )
                dists = self._partial_dist(cols, part.feat_idx)
                part.preds[pending] = preds
                part.dists[pending] = dists
                part.scores[pending] = score_batch(dists, preds)
        else:
            pop = self.pop
            pending_all = np.nonzero(np.isnan(pop.scores))[0]
            if pending_all.size == 0:
                return
            for b in _distinct(pop.bits[pending_all]):
                sel = pending_all[pop.bits[pending_all] == b]
                feat_idx = pop.features_of(int(b))
                cols = pop.rows[np.ix_(sel, feat_idx)] if len(feat_idx) \
                    else np.empty((len(sel), 0))
                preds = self._predict_partition(
                    int(b), feat_idx, cols, lambda s=sel: pop.rows[s],
                )
                dists = self._partial_dist(cols, feat_idx)
                pop.preds[sel] = preds
                pop.dists[sel] = dists
                pop.scores[sel] = score_batch(dists, preds)

    def _select_delta(self, q: int) -> None:
        pop = self.pop
        keys, locals_, ids, scores, preds, dists, born = [], [], [], [], [], [], []
        for bits, part in pop.parts.items():
            r = part.n_rows
            keys.append(np.full(r, bits, dtype=np.int64))
            locals_.append(np.arange(r, dtype=np.int64))
            ids.append(part.ids)
            scores.append(part.scores)
            preds.append(part.preds)
            dists.append(part.dists)
            born.append(part.born)
        keys = np.concatenate(keys)
        locals_ = np.concatenate(locals_)
        ids = np.concatenate(ids)
        scores = np.concatenate(scores)
        preds = np.concatenate(preds)
        dists = np.concatenate(dists)
        born = np.concatenate(born)
        order = np.lexsort((ids, scores))[:q]
        new_local = np.empty(len(order), dtype=np.int64)
        kept_keys = keys[order]
        for b in set(kept_keys.tolist()):
            sel = np.nonzero(kept_keys == b)[0]
            old_locals = locals_[order[sel]]
            asc = np.sort(old_locals)
            pop.parts[b].take(asc)
            new_local[sel] = np.searchsorted(asc, old_locals)
        for b in [b for b, p in pop.parts.items() if b not in set(kept_keys.tolist())]:
            del pop.parts[b]
        self.view = _View(kept_keys, new_local, ids[order], scores[order],
                          preds[order], dists[order], born[order])

    def _select_listing(self, q: int) -> None:
        pop = self.pop
        order = np.lexsort((pop.ids, pop.scores))[:q]
        asc = np.sort(order)
        remap = {int(old): new for new, old in enumerate(asc)}
        pop.rows = pop.rows[asc]
        pop.bits = pop.bits[asc]
        pop.ids = pop.ids[asc]
        pop.born = pop.born[asc]
        pop.preds = pop.preds[asc]
        pop.dists = pop.dists[asc]
        pop.scores = pop.scores[asc]
        new_local = np.array([remap[int(o)] for o in order], dtype=np.int64)
        self.view = _View(pop.bits[new_local], new_local, pop.ids[new_local],
                          pop.scores[new_local], pop.preds[new_local],
                          pop.dists[new_local], pop.born[new_local])

    # --- operators ---------------------------------------------------------

    def mutate_seed(self, born: int) -> None:
        """Initial population: mutate (x, empty delta) once per group."""
        t0 = time.perf_counter()
        seed_rows = self.x.reshape(1, -1)
        seed_bits = np.zeros(1, dtype=np.int64)
        self._mutate_from(seed_rows, seed_bits, self.hyper.m_init, born)
        self.timings["initial"] += time.perf_counter() - t0

    def mutate(self, born: int) -> None:
        t0 = time.perf_counter()
        v = self.view
        if self.hyper.mutation_scope == "topPerDelta":
            first = _first_occurrence(v.bits)
            rows = self._view_rows()[first]
            bits = v.bits[first]
        else:
            rows = self._view_rows()
            bits = v.bits
        self._mutate_from(rows, bits, self.hyper.m_mut, born)
        self.timings["mutation"] += time.perf_counter() - t0

    def _mutate_from(self, src_rows: np.ndarray, src_bits: np.ndarray,
                     m: int, born: int) -> None:
        for g in range(self.n_groups):
            space = self.ss.per_group[g]
            if space.size == 0:
                continue
            sel = np.nonzero((src_bits >> g) & 1 == 0)[0]
            if sel.size == 0:
                continue
            R = sel.size
            m_g = min(m, space.size)
            if space.size <= m:
                draws = np.tile(np.arange(space.size, dtype=np.int64), (R, 1))
            else:
                draws = _sample_without_replacement(space.cum_weights, R, m_g, self.rng)
            children = np.repeat(src_rows[sel], m_g, axis=0)
            children[:, list(space.features)] = space.tuples[draws.reshape(-1)]
            bits = np.repeat(src_bits[sel] | (np.int64(1) << np.int64(g)), m_g)
            self._insert_children(children, bits, born)

    def crossover(self, born: int) -> None:
        t0 = time.perf_counter()
        v = self.view
        first = _first_occurrence(v.bits)
        if len(first) >= 2:
            parent_bits = v.bits[first]
            parents = self._view_rows()[first]
            r = len(first)
            idx_i, idx_j = np.triu_indices(r, 1)
            P = idx_i.shape[0]
            child_bits = parent_bits[idx_i] | parent_bits[idx_j]
            coins = self.rng.random((P, self.n_groups)) < 0.5
            children = np.tile(self.x, (P, 1))
            for g in range(self.n_groups):
                gi = ((parent_bits[idx_i] >> g) & 1).astype(bool)
                gj = ((parent_bits[idx_j] >> g) & 1).astype(bool)
                if not (gi.any() or gj.any()):
                    continue
                take_i = gi & (~gj | coins[:, g])
                take_j = gj & ~(gi & (~gj | coins[:, g]))
                feats = list(self.groups.groups[g])
                si = np.nonzero(take_i)[0]
                sj = np.nonzero(take_j)[0]
                if si.size:
                    children[np.ix_(si, feats)] = parents[np.ix_(idx_i[si], feats)]
                if sj.size:
                    children[np.ix_(sj, feats)] = parents[np.ix_(idx_j[sj], feats)]
            self._insert_children(children, child_bits, born)
        self.timings["crossover"] += time.perf_counter() - t0

    def selective_mutate(self, born: int) -> None:
        """Resample already-changed groups of the best candidate per delta-set,
        restricted to tuples that strictly decrease the distance."""
        t0 = time.perf_counter()
        v = self.view
        first = _first_occurrence(v.bits)
        rows = self._view_rows()[first]
        for i, vi in enumerate(first):
            bits = int(v.bits[vi])
            if bits == 0:
                continue
            row = rows[i]
            cur_dist = float(v.dists[vi])
            feat_idx = self.pop.features_of(bits)
            d_full = feature_deltas(self.x[feat_idx], row[feat_idx].reshape(1, -1),
                                    self.kinds[feat_idx], self.ranges[feat_idx])[0]
            for g in range(self.n_groups):
                if not (bits >> g) & 1:
                    continue
                space = self.ss.per_group[g]
                if space.size == 0:
                    continue
                tl0, tl1, tlinf = self._tuple_deltas(g)
                in_g = np.isin(feat_idx, space.features)
                l0_rest = float(np.count_nonzero(d_full[~in_g]))
                l1_rest = float(d_full[~in_g].sum())
                linf_rest = float(d_full[~in_g].max()) if (~in_g).any() else 0.0
                new_dists = combine_components(
                    l0_rest + tl0, l1_rest + tl1, np.maximum(linf_rest, tlinf),
                    self.n, self.params,
                )
                ok = np.nonzero(new_dists < cur_dist)[0]
                if ok.size == 0:
                    continue
                m_g = min(self.hyper.m_mut, ok.size)
                if ok.size <= self.hyper.m_mut:
                    picked = ok
                else:
                    cw = np.cumsum(space.weights[ok])
                    draws = _sample_without_replacement(cw, 1, m_g, self.rng)[0]
                    picked = ok[draws]
                children = np.tile(row, (len(picked), 1))
                children[:, list(space.features)] = space.tuples[picked]
                cbits = np.full(len(picked), bits, dtype=np.int64)
                self._insert_children(children, cbits, born)
        self.timings["selective_mutate"] += time.perf_counter() - t0

    def _tuple_deltas(self, g: int):
        hit = self._sel_tuple_deltas.get(g)
        if hit is None:
            space = self.ss.per_group[g]
            feats = np.array(space.features, dtype=np.int64)
            d = feature_deltas(self.x[feats], space.tuples, self.kinds[feats],
                               self.ranges[feats])
            hit = (np.count_nonzero(d, axis=1).astype(np.float64), d.sum(axis=1),
                   d.max(axis=1) if d.shape[1] else np.zeros(d.shape[0]))
            self._sel_tuple_deltas[g] = hit
        return hit


def _distinct(arr: np.ndarray) -> list[int]:
    seen: set[int] = set()
    out: list[int] = []
    for b in arr:
        b = int(b)
        if b not in seen:
            seen.add(b)
            out.append(b)
    return out


def _first_occurrence(bits: np.ndarray) -> np.ndarray:
    seen: set[int] = set()
    out: list[int] = []
    for i, b in enumerate(bits):
        b = int(b)
        if b not in seen:
            seen.add(b)
            out.append(i)
    return np.array(out, dtype=np.int64)


def explain(x, classifier: Classifier, dataset: Dataset,
            program: Optional[PlafProgram] = None,
            hyper: Hyperparams = Hyperparams(),
            params: DistanceParams = DistanceParams(),
            representation: str = "delta",
            partial_eval: bool = True,
            collect_value_counts: bool = False) -> ExplainResult:
    """Search counterfactual explanations for x under the given program.

    x may be an Instance or an encoded float64 vector. `representation`
    selects the population layout ("delta" | "listing"); `partial_eval`
    toggles context-specialized scoring. Both default to the fast path.
    """
    if program is None:
        program = parse_plaf("", dataset.schema)
    if representation not in ("delta", "listing"):
        raise ValueError("representation must be 'delta' or 'listing'")
    x_codes = dataset.encode_instance(x) if isinstance(x, Instance) else \
        np.asarray(x, dtype=np.float64)
    if x_codes.shape != (len(dataset.schema),):
        raise EngineError("instance does not match the schema")

    t_start = time.perf_counter()
    pred_x = float(classifier.predict(x_codes.reshape(1, -1))[0])
    if pred_x > 0.5:
        groups = program.group_set
        expl = Explanation(x_codes.copy(), dataset.decode_codes(x_codes),
                           DeltaSet.empty(len(groups)), 0.0, pred_x, 0.0, 0)
        timings = {"initial": 0.0, "selection": 0.0, "crossover": 0.0,
                   "mutation": 0.0, "selective_mutate": 0.0,
                   "total": time.perf_counter() - t_start}
        return ExplainResult([expl], 0, 0, True, timings)

    # A run that hits the generation cap has usually fixated on a hopeless
    # delta-set (see Hyperparams.restarts); independent retries are cheap
    # relative to returning nothing, and runs that converge never pay.
    timings = {"initial": 0.0, "selection": 0.0, "crossover": 0.0,
               "mutation": 0.0, "selective_mutate": 0.0}
    winner = None  # (rank_key, session, gen, converged, history)
    for run in range(hyper.restarts + 1):
        s, gen, converged, best_history = _run_once(
            x_codes, classifier, dataset, program, hyper, params,
            representation, partial_eval, collect_value_counts, run)
        for op, elapsed in s.timings.items():
            timings[op] += elapsed
        top_score = float(s.view.scores[0]) if s.view is not None and len(s.view) \
            else float("inf")
        key = (top_score, not converged, run)
        if winner is None or key < winner[0]:
            winner = (key, s, gen, converged, best_history)
        if converged:
            break
    _, s, gen, converged, best_history = winner

    top: list[Explanation] = []
    if s.view is not None and len(s.view):
        kk = min(hyper.k, len(s.view))
        rows = s._view_rows()[:kk]
        for i in range(kk):
            codes = rows[i]
            changed = int(np.count_nonzero(codes != x_codes))
            top.append(Explanation(
                codes,
                dataset.decode_codes(codes),
                DeltaSet(int(s.view.bits[i]), len(s.groups)),
                float(s.view.dists[i]),
                float(s.view.preds[i]),
                float(s.view.scores[i]),
                changed,
            ))
    timings["total"] = time.perf_counter() - t_start
    return ExplainResult(top, gen, s.pop.candidates_created, converged, timings,
                         best_history, s.value_counts)


def _run_once(x_codes, classifier, dataset, program, hyper, params,
              representation, partial_eval, collect_value_counts,
              run) -> tuple[_Session, int, bool, list[float]]:
    """One full generational search; explain() may retry with a fresh stream."""
    s = _Session(x_codes, classifier, dataset, program, hyper, params,
                 representation, partial_eval, collect_value_counts, run)

    if all(gs.size == 0 for gs in s.ss.per_group):
        raise EngineError("no mutable features: every group's feasible space is empty")

    h = hyper
    s.mutate_seed(born=0)
    s.select(h.q)
    best_history = [float(s.view.scores[0])] if len(s.view) else []

    converged = False
    gen = 0
    while gen < h.max_generations:
        gen += 1
        if len(s.view) == 0:
            break
        s.crossover(born=gen)
        s.mutate(born=gen)
        if h.selective_mutate:
            s.selective_mutate(born=gen)
        s.select(h.q)
        if len(s.view) == 0:
            break
        best_history.append(float(s.view.scores[0]))
        kk = min(h.k, len(s.view))
        top_pred = s.view.preds[:kk]
        top_born = s.view.born[:kk]
        if bool((top_pred > 0.5).all()) and bool((top_born < gen).all()):
            converged = True
            break
    return s, gen, converged, best_history
