"""Reference strategies the engine is benchmarked against.

wit_explain     nearest feasible good example straight out of the dataset
cert_explain    conventional GA seeded with every feasible good example
simcf_explain   greedy hill-climb: random group, five samples, keep the best

All three share the engine's grounded-constraint semantics, distance, and
fitness score, so quality differences come from the search strategy alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cfx.distance import DistanceParams, dist_batch, score_batch
from cfx.engine import _sample_without_replacement
from cfx.models.base import Classifier
from cfx.plaf import (
    GroundedConstraints,
    PlafProgram,
    SampleSpace,
    cascade_batch,
    feasible_space,
    ground,
)
from cfx.schema import Dataset, Instance


@dataclass
class BaselineResult:
    found: bool
    codes: Optional[np.ndarray]
    instance: Optional[Instance]
    distance: float
    prediction: float
    features_changed: int
    explored: int
    elapsed: float

    @classmethod
    def nothing(cls, explored: int, elapsed: float) -> "BaselineResult":
        return cls(False, None, None, float("inf"), float("nan"), 0, explored, elapsed)


def feasible_mask(cx: GroundedConstraints, M: np.ndarray) -> np.ndarray:
    """Rows of M (R, n) satisfying every grounded constraint w.r.t. cx's x."""
    R = M.shape[0]
    provider = lambda f: M[:, f]
    mask = np.ones(R, dtype=bool)
    for atoms in cx.per_group:
        for a in atoms:
            mask &= np.broadcast_to(np.asarray(a.evaluate(provider)), (R,))
    for impls in cx.per_group_implications:
        for ants, cons in impls:
            fired = np.ones(R, dtype=bool)
            for a in ants:
                fired &= np.broadcast_to(np.asarray(a.evaluate(provider)), (R,))
            mask &= ~fired | np.broadcast_to(np.asarray(cons.evaluate(provider)), (R,))
    for rule in cx.cross_rules:
        mask &= rule.holds(provider, R)
    return mask


def _result_from_row(x: np.ndarray, row: np.ndarray, pred: float, dataset: Dataset,
                     params: DistanceParams, explored: int, t0: float) -> BaselineResult:
    from cfx.distance import dist
    d = dist(x, row, dataset.schema.kind_codes, dataset.feat_range, params)
    changed = int(np.count_nonzero(row != x))
    return BaselineResult(True, row.copy(), dataset.decode_codes(row), float(d),
                          float(pred), changed, explored, time.perf_counter() - t0)


def wit_explain(x, classifier: Classifier, dataset: Dataset,
                program: PlafProgram, params: DistanceParams = DistanceParams(),
                d_preds: Optional[np.ndarray] = None) -> BaselineResult:
    """Scan the dataset for the closest feasible row predicted good."""
    t0 = time.perf_counter()
    x_codes = dataset.encode_instance(x) if isinstance(x, Instance) else \
        np.asarray(x, dtype=np.float64)
    cx = ground(x_codes, program, dataset)
    M = dataset.matrix
    if d_preds is None:
        d_preds = classifier.predict(M)
    ok = feasible_mask(cx, M) & (d_preds > 0.5)
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return BaselineResult.nothing(M.shape[0], time.perf_counter() - t0)
    dists = dist_batch(x_codes, M[idx], dataset.schema.kind_codes,
                       dataset.feat_range, params)
    best = idx[int(np.argmin(dists))]
    return _result_from_row(x_codes, M[best], float(d_preds[best]), dataset,
                            params, M.shape[0], t0)


def cert_explain(x, classifier: Classifier, dataset: Dataset,
                 program: PlafProgram, params: DistanceParams = DistanceParams(),
                 generations: int = 300, q: int = 100, seed: int = 0,
                 d_preds: Optional[np.ndarray] = None) -> BaselineResult:
    """Conventional GA over counterfactuals only, selected by distance.

    Initial population: every dataset row that is feasible w.r.t. x and
    predicted good. Each generation breeds q uniform-random parent pairs
    (uniform per-feature mix), mutates q members on one random feature drawn
    from its group's feasible values, drops anything infeasible or no longer
    counterfactual, and keeps the q distance-best.
    """
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(seed))
    x_codes = dataset.encode_instance(x) if isinstance(x, Instance) else \
        np.asarray(x, dtype=np.float64)
    cx = ground(x_codes, program, dataset)
    ss = feasible_space(dataset, program.group_set, cx)
    M = dataset.matrix
    if d_preds is None:
        d_preds = classifier.predict(M)
    ok = feasible_mask(cx, M) & (d_preds > 0.5)
    pop = M[ok].copy()
    explored = M.shape[0]
    if pop.shape[0] == 0:
        return BaselineResult.nothing(explored, time.perf_counter() - t0)

    kinds = dataset.schema.kind_codes
    ranges = dataset.feat_range
    groups = program.group_set
    mutable = [g for g, gs in enumerate(ss.per_group) if gs.size > 0]

    def survivors(rows: np.ndarray) -> np.ndarray:
        if rows.shape[0] == 0:
            return rows
        keep = feasible_mask(cx, rows) & (classifier.predict(rows) > 0.5)
        return rows[keep]

    dists = dist_batch(x_codes, pop, kinds, ranges, params)
    order = np.argsort(dists, kind="stable")[:q]
    pop = pop[order]
    dists = dists[order]

    for _ in range(generations):
        r = pop.shape[0]
        # crossover: q children from uniform parent pairs, uniform feature mix
        pi = rng.integers(0, r, size=q)
        pj = rng.integers(0, r, size=q)
        mix = rng.random((q, pop.shape[1])) < 0.5
        children = np.where(mix, pop[pi], pop[pj])
        # mutation: q members, one random mutable group, one weighted value
        mut = pop[rng.integers(0, r, size=q)].copy()
        which = rng.integers(0, len(mutable), size=q)
        for i in range(q):
            gs = ss.per_group[mutable[int(which[i])]]
            u = rng.random() * gs.cum_weights[-1]
            t = min(int(np.searchsorted(gs.cum_weights, u, side="right")),
                    gs.size - 1)
            mut[i, list(gs.features)] = gs.tuples[t]
        cand = survivors(np.concatenate([children, mut], axis=0))
        explored += 2 * q
        if cand.shape[0]:
            cd = dist_batch(x_codes, cand, kinds, ranges, params)
            pop = np.concatenate([pop, cand], axis=0)
            dists = np.concatenate([dists, cd])
            order = np.argsort(dists, kind="stable")[:q]
            pop = pop[order]
            dists = dists[order]

    best = int(np.argmin(dists))
    pred = float(classifier.predict(pop[best].reshape(1, -1))[0])
    return _result_from_row(x_codes, pop[best], pred, dataset, params, explored, t0)


def simcf_explain(x, classifier: Classifier, dataset: Dataset,
                  program: PlafProgram, params: DistanceParams = DistanceParams(),
                  max_iterations: int = 1000, samples: int = 5,
                  seed: int = 0) -> BaselineResult:
    """Greedy: pick a random group, try five weighted samples, keep the best
    strictly score-improving substitution; stop on a counterfactual."""
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(seed))
    x_codes = dataset.encode_instance(x) if isinstance(x, Instance) else \
        np.asarray(x, dtype=np.float64)
    cx = ground(x_codes, program, dataset)
    ss = feasible_space(dataset, program.group_set, cx)
    mutable = [g for g, gs in enumerate(ss.per_group) if gs.size > 0]
    if not mutable:
        return BaselineResult.nothing(0, time.perf_counter() - t0)

    kinds = dataset.schema.kind_codes
    ranges = dataset.feat_range
    z = x_codes.copy()
    z_bits = np.int64(0)
    pred = float(classifier.predict(z.reshape(1, -1))[0])
    z_score = float(score_batch(
        dist_batch(x_codes, z.reshape(1, -1), kinds, ranges, params),
        np.array([pred]))[0])
    explored = 0

    for _ in range(max_iterations):
        if pred > 0.5:
            break
        g = mutable[int(rng.integers(0, len(mutable)))]
        gs = ss.per_group[g]
        m_g = min(samples, gs.size)
        if gs.size <= samples:
            picks = np.arange(gs.size, dtype=np.int64)
        else:
            picks = _sample_without_replacement(gs.cum_weights, 1, m_g, rng)[0]
        cand = np.tile(z, (len(picks), 1))
        cand[:, list(gs.features)] = gs.tuples[picks]
        bits = np.full(len(picks), z_bits | (np.int64(1) << np.int64(g)))
        if cx.has_cross_rules or cx.forced_groups:
            keep = cascade_batch(cand, bits, cx, ss, rng)
            cand = cand[keep]
            bits = bits[keep]
        if cand.shape[0] == 0:
            continue
        explored += cand.shape[0]
        preds = classifier.predict(cand)
        scores = score_batch(
            dist_batch(x_codes, cand, kinds, ranges, params), preds)
        b = int(np.argmin(scores))
        if float(scores[b]) < z_score:
            z = cand[b].copy()
            z_bits = np.int64(bits[b])
            z_score = float(scores[b])
            pred = float(preds[b])

    if pred > 0.5:
        return _result_from_row(x_codes, z, pred, dataset, params, explored, t0)
    return BaselineResult.nothing(explored, time.perf_counter() - t0)
