"""Regenerates everything under data/: demo datasets, models, constraint
programs, session configs. Deterministic for a fixed seed, so the committed
artifacts can be rebuilt with `cfx datagen`.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator

from cfx.bench.workloads import (
    adult_dataset,
    adult_program_text,
    credit_dataset,
    credit_program_text,
    random_forest_json,
)
from cfx.schema import Dataset


def _write_bundle(root: Path, name: str, dataset: Dataset, plaf_text: str,
                  model_seed: int) -> Iterator[str]:
    d = root / name
    d.mkdir(parents=True, exist_ok=True)
    (d / "schema.json").write_text(
        json.dumps(dataset.schema.to_dict(), indent=2) + "\n")
    dataset.to_csv(str(d / "data.csv"))
    spec = random_forest_json(
        dataset.n_features, n_trees=100, max_depth=6, seed=model_seed,
        feat_low=dataset.feat_min, feat_high=dataset.feat_max,
        max_leaves=32, features_per_tree=4)
    (d / "model.json").write_text(json.dumps(spec) + "\n")
    (d / "rules.plaf").write_text(plaf_text)
    (d / "config.json").write_text(json.dumps({
        "schema": "schema.json",
        "data": "data.csv",
        "model": "model.json",
        "plaf": "rules.plaf",
        "seed": 0,
    }, indent=2) + "\n")
    yield f"{name}: {dataset.n_rows} rows, {dataset.n_features} features -> {d}"


def generate_all(out: Path, rows: int = 2000, seed: int = 17) -> Iterator[str]:
    yield from _write_bundle(out, "credit", credit_dataset(rows, seed),
                             credit_program_text(), model_seed=seed + 1)
    yield from _write_bundle(out, "adult", adult_dataset(rows, seed + 100),
                             adult_program_text(), model_seed=seed + 101)


if __name__ == "__main__":
    import sys

    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data")
    for line in generate_all(target):
        print(line)
