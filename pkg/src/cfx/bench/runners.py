"""Benchmark runners.

Every runner returns per-instance records; aggregation is a separate pure
function over those records, so a report can always be recomputed from the
persisted rows (no lossy streaming statistics).
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np

from cfx import _kernels
from cfx.baselines import cert_explain, simcf_explain, wit_explain
from cfx.distance import DistanceParams
from cfx.engine import ExplainResult, Hyperparams, explain
from cfx.bench.workloads import (
    failing_instances,
    forest_workload,
    optimal_distance,
    synthetic_classifier,
    synthetic_dataset,
)
from cfx.plaf import PlafProgram, parse_plaf, satisfies_rules
from cfx.schema import Dataset

METHODS = ("engine", "wit", "cert", "simcf")


@dataclass
class QualityRecord:
    method: str
    instance: int
    valid: bool
    distance: float
    features_changed: int
    generations: int
    explored: int
    elapsed: float


@dataclass
class MethodSummary:
    method: str
    count: int
    consistency: float
    dist_mean: float
    dist_std: float
    feats_mean: float
    time_mean: float


def _engine_record(i: int, res: ExplainResult, x: np.ndarray,
                   classifier, dataset, program) -> QualityRecord:
    best = res.best
    valid = best is not None and best.prediction > 0.5
    if valid and program is not None:
        # constraint soundness is part of validity, checked the slow way
        valid = satisfies_rules(program, dataset, x, best.codes)
    return QualityRecord("engine", i, bool(valid),
                         best.distance if best else float("inf"),
                         best.features_changed if best else 0,
                         res.generations, res.explored_candidates,
                         res.timings["total"])


def run_quality_bench(dataset: Dataset, classifier, program: Optional[PlafProgram],
                      instances: np.ndarray,
                      methods: Sequence[str] = METHODS,
                      params: DistanceParams = DistanceParams(),
                      hyper: Hyperparams = Hyperparams(),
                      seed: int = 0,
                      check_constraints: bool = True) -> list[QualityRecord]:
    """Explain every instance with every method; one record per pair.

    Wall-clock excludes dataset preparation and model warm-up: the classifier
    is exercised once on the full matrix up front (this also pre-compiles any
    jitted kernels) and baselines reuse those dataset predictions.
    """
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods: {bad}")
    if program is None:
        program = parse_plaf("", dataset.schema)
    d_preds = classifier.predict(dataset.matrix)
    records: list[QualityRecord] = []
    if "engine" in methods and len(instances):
        explain(instances[0], classifier, dataset, program, hyper, params)  # warm-up
    for i, x in enumerate(instances):
        for method in methods:
            if method == "engine":
                h = Hyperparams(**{**_hyper_dict(hyper), "seed": hyper.seed + i})
                res = explain(x, classifier, dataset, program, h, params)
                records.append(_engine_record(
                    i, res, x, classifier, dataset,
                    program if check_constraints else None))
                continue
            if method == "wit":
                r = wit_explain(x, classifier, dataset, program, params,
                                d_preds=d_preds)
            elif method == "cert":
                r = cert_explain(x, classifier, dataset, program, params,
                                 seed=seed + i, d_preds=d_preds)
            else:
                r = simcf_explain(x, classifier, dataset, program, params,
                                  seed=seed + i)
            valid = r.found and r.prediction > 0.5
            if valid and check_constraints:
                valid = satisfies_rules(
                    program, dataset, np.asarray(x, dtype=np.float64), r.codes)
            records.append(QualityRecord(method, i, bool(valid), r.distance,
                                         r.features_changed, 0, r.explored,
                                         r.elapsed))
    return records


def _hyper_dict(h: Hyperparams) -> dict:
    return {f.name: getattr(h, f.name) for f in fields(h)}


def aggregate_quality(records: Sequence[QualityRecord]) -> list[MethodSummary]:
    out = []
    for method in dict.fromkeys(r.method for r in records):
        rs = [r for r in records if r.method == method]
        ok = [r for r in rs if r.valid]
        dists = [r.distance for r in ok]
        out.append(MethodSummary(
            method=method,
            count=len(rs),
            consistency=len(ok) / len(rs),
            dist_mean=statistics.fmean(dists) if dists else float("nan"),
            dist_std=statistics.pstdev(dists) if len(dists) > 1 else 0.0,
            feats_mean=statistics.fmean([r.features_changed for r in ok])
            if ok else float("nan"),
            time_mean=statistics.fmean([r.elapsed for r in rs]),
        ))
    return out


# --- operator breakdown / representation variants ----------------------------

VARIANTS = (
    (1, "listing", False),
    (2, "listing", True),
    (3, "delta", False),
    (4, "delta", True),
)


@dataclass
class BreakdownRecord:
    variant: int
    representation: str
    partial_eval: bool
    instance: int
    total: float
    initial: float
    selection: float
    crossover: float
    mutation: float
    generations: int
    explored: int
    delta_values: int
    listing_values: int
    compression: float


def _topk_signature(res: ExplainResult) -> tuple:
    return tuple((e.delta.bits, tuple(e.codes.tolist()), e.score) for e in res.top_k)


def run_breakdown_bench(dataset: Dataset, classifier, program: Optional[PlafProgram],
                        instances: np.ndarray,
                        hyper: Hyperparams = Hyperparams(),
                        params: DistanceParams = DistanceParams(),
                        ) -> tuple[list[BreakdownRecord], bool]:
    """Run the four engine variants; also report whether every variant
    returned the identical top-k on every instance."""
    records: list[BreakdownRecord] = []
    signatures: dict[int, list[tuple]] = {}
    if len(instances):
        explain(instances[0], classifier, dataset, program, hyper, params)  # warm-up
    for vid, rep, pe in VARIANTS:
        sigs = []
        for i, x in enumerate(instances):
            h = Hyperparams(**{**_hyper_dict(hyper), "seed": hyper.seed + i})
            res = explain(x, classifier, dataset, program, h, params,
                          representation=rep, partial_eval=pe,
                          collect_value_counts=True)
            dvals = sum(d for d, _ in res.value_counts)
            lvals = sum(l for _, l in res.value_counts)
            records.append(BreakdownRecord(
                vid, rep, pe, i,
                res.timings["total"], res.timings["initial"],
                res.timings["selection"], res.timings["crossover"],
                res.timings["mutation"], res.generations,
                res.explored_candidates, dvals, lvals,
                lvals / dvals if dvals else float("nan"),
            ))
            sigs.append(_topk_signature(res))
        signatures[vid] = sigs
    identical = all(signatures[v] == signatures[1] for v, _, _ in VARIANTS)
    return records, identical


# --- synthetic ground-truth suite --------------------------------------------

@dataclass
class SuiteRecord:
    order: str
    samples: str
    conditions: int
    instance: int
    valid: bool
    distance: float
    optimal: float
    generations: int
    features_changed: int
    elapsed: float


def suite_hyper(samples: str, seed: int = 0) -> Hyperparams:
    if samples == "default":
        m_init, m_mut = 20, 5
    elif samples == "fiveX":
        m_init, m_mut = 100, 25
    else:
        raise ValueError("samples must be 'default' or 'fiveX'")
    return Hyperparams(m_init=m_init, m_mut=m_mut, seed=seed,
                       selective_mutate=True)


def run_synthetic_suite(order: str = "byDomainSizeDesc", samples: str = "default",
                        instance_count: int = 100,
                        conditions: Sequence[int] = tuple(range(1, 13)),
                        rows: int = 30_000,
                        params: DistanceParams = DistanceParams(),
                        seed: int = 0,
                        dataset: Optional[Dataset] = None,
                        instances: Optional[np.ndarray] = None) -> list[SuiteRecord]:
    ds = dataset if dataset is not None else synthetic_dataset(rows)
    X = instances if instances is not None else failing_instances(instance_count)
    records: list[SuiteRecord] = []
    for c in conditions:
        clf = synthetic_classifier(ds, c, order)
        explain(X[0], clf, ds, None, suite_hyper(samples, seed), params)  # warm-up
        for i, x in enumerate(X):
            h = suite_hyper(samples, seed + i)
            res = explain(x, clf, ds, None, h, params)
            best = res.best
            valid = best is not None and best.prediction == 1.0
            records.append(SuiteRecord(
                order, samples, c, i, bool(valid),
                best.distance if best else float("inf"),
                optimal_distance(x, clf, ds, params),
                res.generations,
                best.features_changed if best else 0,
                res.timings["total"],
            ))
    return records


@dataclass
class SuiteSummary:
    order: str
    samples: str
    conditions: int
    validity: float
    dist_mean: float
    optimal_mean: float
    rel_gap: float
    generations_mean: float
    feats_mean: float
    time_mean: float


def aggregate_suite(records: Sequence[SuiteRecord]) -> list[SuiteSummary]:
    out = []
    keys = dict.fromkeys((r.order, r.samples, r.conditions) for r in records)
    for order, samples, c in keys:
        rs = [r for r in records if (r.order, r.samples, r.conditions) == (order, samples, c)]
        dist_mean = statistics.fmean([r.distance for r in rs])
        opt_mean = statistics.fmean([r.optimal for r in rs])
        out.append(SuiteSummary(
            order, samples, c,
            validity=statistics.fmean([1.0 if r.valid else 0.0 for r in rs]),
            dist_mean=dist_mean,
            optimal_mean=opt_mean,
            rel_gap=(dist_mean - opt_mean) / opt_mean if opt_mean else float("nan"),
            generations_mean=statistics.fmean([r.generations for r in rs]),
            feats_mean=statistics.fmean([r.features_changed for r in rs]),
            time_mean=statistics.fmean([r.elapsed for r in rs]),
        ))
    return out


# --- kernel backend comparison ------------------------------------------------

def run_kernel_bench(n_trees: int = 200, rows: int = 2000, repeats: int = 3,
                     seed: int = 9) -> list[dict]:
    """Time the forest kernels on every available backend (numba vs numpy)."""
    ds, clf = forest_workload(n_trees=n_trees, rows=max(rows, 100), seed=seed)
    X = ds.matrix[:rows]
    out = []
    previous = _kernels.active_backend()
    try:
        for backend in _kernels.available_backends():
            _kernels.set_backend(backend)
            clf.predict(X[:10])        # compile before timing
            clf.predict_naive(X[:10])
            for kernel, fn in (("quickscorer", clf.predict),
                               ("naive", clf.predict_naive)):
                best = min(_timed(fn, X) for _ in range(repeats))
                out.append({"backend": backend, "kernel": kernel,
                            "rows": rows, "trees": n_trees, "seconds": best})
    finally:
        _kernels.set_backend(previous)
    for row in out:
        ref = next(r["seconds"] for r in out
                   if r["kernel"] == row["kernel"] and r["backend"] == "numpy")
        row["speedup_vs_numpy"] = ref / row["seconds"]
    return out


def _timed(fn, X) -> float:
    t0 = time.perf_counter()
    fn(X)
    return time.perf_counter() - t0
