"""Reproducible benchmark workloads.

Synthetic ground-truth suite: 12 ordinal credit-style features whose domains
shrink from ~5000 values down to 2, and threshold classifiers built by adding
one condition at a time, either in decreasing-domain-size order (hardest for
a sampler) or an order that interleaves large and small domains. All grids
contain their thresholds exactly, so the optimal counterfactual is known in
closed form.

Forest latency workload: a 500-tree ensemble over 14 features with leaf
values quantized to multiples of 1/512. Dyadic leaves make float64 sums
independent of association, so every scoring strategy (naive, mask-based,
specialized, either backend) is bit-identical — which is what lets the
breakdown bench assert identical output across its four engine variants.

Also: credit/adult demo schemas plus the constraint programs used in docs,
demos and the service fixtures.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from cfx.distance import DistanceParams, dist
from cfx.models import MlpClassifier, SyntheticThresholdClassifier, TreeEnsembleClassifier
from cfx.schema import CATEGORICAL, CONTINUOUS, ORDINAL, Dataset, Feature, FeatureSchema

# --- synthetic ground-truth suite -------------------------------------------

# (name, lo, hi, step); listed in decreasing domain-size order
_SYN_GRID = [
    ("MaxBillAmountOverLast6Months", 0, 50_000, 10),      # 5001 values
    ("MostRecentBillAmount", 0, 30_000, 10),              # 3001
    ("MaxPaymentAmountOverLast6Months", 0, 20_000, 10),   # 2001
    ("MostRecentPaymentAmount", 0, 10_000, 10),           # 1001
    ("TotalMonthsOverdue", 0, 60, 1),                     # 61
    ("MonthsWithZeroBalanceOverLast6Months", 0, 6, 1),    # 7
    ("MonthsWithLowSpendingLast6Months", 0, 6, 1),        # 7
    ("MonthsWithHighSpendingLast6Months", 0, 6, 1),       # 7
    ("AgeGroup", 1, 5, 1),                                # 5
    ("EducationLevel", 1, 4, 1),                          # 4
    ("TotalOverdueCounts", 0, 2, 1),                      # 3
    ("HasHistoryOfOverduePayments", 0, 1, 1),             # 2
]

_SYN_THRESHOLD = {
    "MaxBillAmountOverLast6Months": 4320.0,
    "MostRecentBillAmount": 4020.0,
    "MaxPaymentAmountOverLast6Months": 3050.0,
    "MostRecentPaymentAmount": 1220.0,
    "TotalMonthsOverdue": 12.0,
    "MonthsWithZeroBalanceOverLast6Months": 1.0,
    "MonthsWithLowSpendingLast6Months": 1.0,
    "MonthsWithHighSpendingLast6Months": 3.0,
    "AgeGroup": 2.0,
    "EducationLevel": 3.0,
    "TotalOverdueCounts": 1.0,
    "HasHistoryOfOverduePayments": 1.0,
}

ORDER_DOMAIN_DESC = tuple(name for name, *_ in _SYN_GRID)

ORDER_INTERLEAVED = (
    "MaxBillAmountOverLast6Months",
    "TotalOverdueCounts",
    "MostRecentBillAmount",
    "AgeGroup",
    "MaxPaymentAmountOverLast6Months",
    "HasHistoryOfOverduePayments",
    "MostRecentPaymentAmount",
    "TotalMonthsOverdue",
    "EducationLevel",
    "MonthsWithZeroBalanceOverLast6Months",
    "MonthsWithLowSpendingLast6Months",
    "MonthsWithHighSpendingLast6Months",
)

_ORDERS = {"byDomainSizeDesc": ORDER_DOMAIN_DESC, "interleaved": ORDER_INTERLEAVED}


def _grid(lo: int, hi: int, step: int) -> np.ndarray:
    return np.arange(lo, hi + step, step, dtype=np.float64)


def synthetic_schema() -> FeatureSchema:
    return FeatureSchema([Feature(name, ORDINAL) for name, *_ in _SYN_GRID])


def synthetic_dataset(rows: int = 30_000, seed: int = 7) -> Dataset:
    """Every grid value appears at least once (tile + permute), so the active
    domain is the full grid and the analytic optimum is always reachable."""
    rng = np.random.Generator(np.random.PCG64(seed))
    cols = []
    for name, lo, hi, step in _SYN_GRID:
        g = _grid(lo, hi, step)
        col = np.resize(g, rows)
        rng.shuffle(col)
        cols.append(col)
    return Dataset(synthetic_schema(), np.column_stack(cols))


def synthetic_conditions(count: int, order: str = "byDomainSizeDesc") -> list[tuple[str, float]]:
    if order not in _ORDERS:
        raise ValueError(f"unknown condition order {order!r}")
    names = _ORDERS[order]
    if not 0 <= count <= len(names):
        raise ValueError("condition count out of range")
    return [(n, _SYN_THRESHOLD[n]) for n in names[:count]]


def synthetic_classifier(dataset: Dataset, count: int,
                         order: str = "byDomainSizeDesc") -> SyntheticThresholdClassifier:
    schema = dataset.schema
    conds = [(schema.index(n), t) for n, t in synthetic_conditions(count, order)]
    return SyntheticThresholdClassifier(conds, len(schema), dataset.feat_range)


def failing_instances(count: int = 100, seed: int = 11) -> np.ndarray:
    """(count, 12) instances failing all 12 threshold conditions."""
    rng = np.random.Generator(np.random.PCG64(seed))
    cols = []
    for name, lo, hi, step in _SYN_GRID:
        g = _grid(lo, hi, step)
        below = g[g < _SYN_THRESHOLD[name]]
        cols.append(below[rng.integers(0, len(below), size=count)])
    return np.column_stack(cols)


def optimal_counterfactual(x: np.ndarray, clf: SyntheticThresholdClassifier,
                           dataset: Dataset) -> np.ndarray:
    """Closest point satisfying the classifier: each failing condition's
    feature is raised to the smallest active-domain value >= threshold."""
    out = x.copy()
    for f, t in zip(clf.cond_feats, clf.cond_thresholds):
        if out[f] < t:
            dom, _ = dataset.active_domain(int(f))
            ok = dom[dom >= t]
            if ok.size == 0:
                raise ValueError(f"threshold {t} exceeds the domain of feature {f}")
            out[f] = ok[0]
    return out


def optimal_distance(x: np.ndarray, clf: SyntheticThresholdClassifier,
                     dataset: Dataset, params: DistanceParams = DistanceParams()) -> float:
    y = optimal_counterfactual(x, clf, dataset)
    return float(dist(x, y, dataset.schema.kind_codes, dataset.feat_range, params))


# --- random tree/MLP model generators ---------------------------------------

def _random_tree(rng: np.random.Generator, feats: np.ndarray,
                 lows: np.ndarray, highs: np.ndarray,
                 max_depth: int, max_leaves: int, leaf_quantum: float) -> dict:
    budget = [max_leaves]

    def build(depth: int) -> dict:
        # each split consumes one budget unit (leaves = splits + 1)
        if depth >= max_depth or budget[0] < 1 or rng.random() < 0.08:
            k = int(rng.integers(0, round(1.0 / leaf_quantum) + 1))
            return {"value": k * leaf_quantum}
        budget[0] -= 1
        j = int(rng.integers(0, len(feats)))
        f = int(feats[j])
        thr = float(rng.uniform(lows[j], highs[j]))
        return {"feature": f, "threshold": thr,
                "left": build(depth + 1), "right": build(depth + 1)}

    return build(0)


def _flatten_tree(root: dict) -> dict:
    """Nested {feature,threshold,left,right}/{value} -> flat node list with
    tree-relative child indices, node 0 the root."""
    nodes: list = []

    def walk(nd: dict) -> int:
        idx = len(nodes)
        if "value" in nd:
            nodes.append({"leaf": nd["value"]})
            return idx
        nodes.append(None)
        left = walk(nd["left"])
        right = walk(nd["right"])
        nodes[idx] = {"feature": nd["feature"], "threshold": nd["threshold"],
                      "left": left, "right": right}
        return idx

    walk(root)
    return {"nodes": nodes}


def random_forest_json(n_features: int, n_trees: int, max_depth: int,
                       seed: int, feat_low: Optional[np.ndarray] = None,
                       feat_high: Optional[np.ndarray] = None,
                       max_leaves: int = 64, features_per_tree: int = 4,
                       leaf_quantum: float = 1.0 / 512) -> dict:
    """Random ensemble in the JSON model format; dyadic leaf values."""
    rng = np.random.Generator(np.random.PCG64(seed))
    if feat_low is None:
        feat_low = np.zeros(n_features)
    if feat_high is None:
        feat_high = np.ones(n_features)
    trees = []
    for _ in range(n_trees):
        k = min(features_per_tree, n_features)
        feats = rng.choice(n_features, size=k, replace=False)
        trees.append(_flatten_tree(
            _random_tree(rng, feats, feat_low[feats], feat_high[feats],
                         max_depth, max_leaves, leaf_quantum)))
    return {"type": "forest", "n_features": n_features, "trees": trees}


def forest_workload(n_features: int = 14, n_trees: int = 500, max_depth: int = 10,
                    rows: int = 30_000, seed: int = 3) -> tuple[Dataset, TreeEnsembleClassifier]:
    """Latency/breakdown workload: 30k-row dataset, 500-tree forest."""
    rng = np.random.Generator(np.random.PCG64(seed))
    schema = FeatureSchema(
        [Feature(f"f{i:02d}", ORDINAL if i % 3 == 0 else CONTINUOUS)
         for i in range(n_features)]
    )
    cols = []
    for i in range(n_features):
        if i % 3 == 0:
            vals = np.arange(0, 50, dtype=np.float64)
            col = np.resize(vals, rows)
            rng.shuffle(col)
        else:
            col = np.round(rng.uniform(0.0, 100.0, size=rows), 3)
        cols.append(col)
    ds = Dataset(schema, np.column_stack(cols))
    spec = random_forest_json(n_features, n_trees, max_depth, seed + 1,
                              ds.feat_min, ds.feat_max, max_leaves=32)
    clf = TreeEnsembleClassifier(spec["trees"], n_features)
    return ds, clf


def forest_program_text(n_features: int = 14) -> str:
    """Constraints in the shape real deployments use: a third of the features
    pinned, two monotone. Keeps the latency workload honest - explanations are
    never computed with a fully free feature space."""
    pinned = [f"f{i:02d}" for i in range(1, n_features, 3)]
    lines = [f"PLAF x_cf.{name} = x.{name}" for name in pinned]
    lines.append("PLAF x_cf.f00 >= x.f00")
    lines.append("PLAF x_cf.f02 >= x.f02")
    return "\n".join(lines) + "\n"


def random_mlp(n_features: int, hidden: int = 32, seed: int = 5) -> MlpClassifier:
    rng = np.random.Generator(np.random.PCG64(seed))
    w1 = rng.normal(0.0, 1.0 / np.sqrt(n_features), size=(hidden, n_features))
    b1 = rng.normal(0.0, 0.1, size=hidden)
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(1, hidden))
    b2 = rng.normal(0.0, 0.1, size=1)
    return MlpClassifier([(w1, b1, "relu"), (w2, b2, "sigmoid")])


# --- credit / adult demo workloads -------------------------------------------

def credit_schema() -> FeatureSchema:
    feats = [Feature("isMale", CATEGORICAL), Feature("isMarried", CATEGORICAL)]
    feats += [Feature(name, ORDINAL) for name, *_ in _SYN_GRID]
    return FeatureSchema(feats)


def credit_dataset(rows: int = 2000, seed: int = 17) -> Dataset:
    rng = np.random.Generator(np.random.PCG64(seed))
    schema = credit_schema()
    cols = [rng.integers(0, 2, size=rows).astype(np.float64),
            rng.integers(0, 2, size=rows).astype(np.float64)]
    cats = {0: ("no", "yes"), 1: ("no", "yes")}
    for name, lo, hi, step in _SYN_GRID:
        g = _grid(lo, hi, step)
        col = np.resize(g, rows)
        rng.shuffle(col)
        cols.append(col)
    return Dataset(schema, np.column_stack(cols), categories=cats)


def credit_program_text() -> str:
    return """\
PLAF x_cf.isMale = x.isMale
PLAF x_cf.isMarried = x.isMarried
PLAF x_cf.AgeGroup >= x.AgeGroup
PLAF x_cf.EducationLevel >= x.EducationLevel
PLAF x_cf.HasHistoryOfOverduePayments >= x.HasHistoryOfOverduePayments
PLAF x_cf.TotalOverdueCounts >= x.TotalOverdueCounts
PLAF x_cf.TotalMonthsOverdue >= x.TotalMonthsOverdue
PLAF IF x_cf.EducationLevel > x.EducationLevel+1 && x.AgeGroup < 2 THEN x_cf.AgeGroup == 2
PLAF IF x_cf.MonthsWithLowSpendingLast6Months > x.MonthsWithLowSpendingLast6Months THEN x_cf.MonthsWithHighSpendingLast6Months < x.MonthsWithHighSpendingLast6Months
"""


_ADULT_CATS = {
    "WorkClass": ["Private", "SelfEmployed", "Government", "Unemployed"],
    "MaritalStatus": ["Married", "Single", "Divorced", "Widowed"],
    "Occupation": ["Tech", "Sales", "Service", "Admin", "Manual", "Other"],
    "Relationship": ["Husband", "Wife", "OwnChild", "NotInFamily", "Unmarried"],
    "Race": ["White", "Black", "AsianPacific", "Other"],
    "Gender": ["Male", "Female"],
    "NativeCountry": ["UnitedStates", "Mexico", "Philippines", "Germany", "Other"],
}


def adult_schema() -> FeatureSchema:
    return FeatureSchema([
        Feature("Age", ORDINAL),
        Feature("WorkClass", CATEGORICAL),
        Feature("Education", ORDINAL),
        Feature("MaritalStatus", CATEGORICAL),
        Feature("Occupation", CATEGORICAL),
        Feature("Relationship", CATEGORICAL),
        Feature("Race", CATEGORICAL),
        Feature("Gender", CATEGORICAL),
        Feature("CapitalGain", CONTINUOUS),
        Feature("CapitalLoss", CONTINUOUS),
        Feature("HoursPerWeek", ORDINAL),
        Feature("NativeCountry", CATEGORICAL),
    ])


def adult_dataset(rows: int = 2000, seed: int = 23) -> Dataset:
    rng = np.random.Generator(np.random.PCG64(seed))
    schema = adult_schema()
    cols: list[np.ndarray] = []
    cats: dict[int, tuple[str, ...]] = {}
    for i, f in enumerate(schema.features):
        if f.kind == CATEGORICAL:
            values = _ADULT_CATS[f.name]
            cols.append(rng.integers(0, len(values), size=rows).astype(np.float64))
            cats[i] = tuple(values)
        elif f.name == "Age":
            col = np.resize(np.arange(17, 81, dtype=np.float64), rows)
            rng.shuffle(col)
            cols.append(col)
        elif f.name == "Education":
            col = np.resize(np.arange(1, 17, dtype=np.float64), rows)
            rng.shuffle(col)
            cols.append(col)
        elif f.name == "HoursPerWeek":
            col = np.resize(np.arange(1, 100, dtype=np.float64), rows)
            rng.shuffle(col)
            cols.append(col)
        elif f.name == "CapitalGain":
            cols.append(np.round(rng.exponential(2000.0, size=rows), 2))
        else:  # CapitalLoss
            cols.append(np.round(rng.exponential(150.0, size=rows), 2))
    return Dataset(schema, np.column_stack(cols), categories=cats)


def adult_program_text() -> str:
    return """\
PLAF x_cf.Age >= x.Age
PLAF x_cf.Education >= x.Education
PLAF x_cf.MaritalStatus = x.MaritalStatus
PLAF x_cf.Relationship = x.Relationship
PLAF x_cf.Gender = x.Gender
PLAF x_cf.NativeCountry = x.NativeCountry
PLAF IF x_cf.Education > x.Education THEN x_cf.Age >= x.Age+4
"""
