import numpy as np
import pytest

from cfx.schema import (CATEGORICAL, CONTINUOUS, ORDINAL, Dataset, Feature,
                        FeatureSchema)


@pytest.fixture
def people_schema():
    return FeatureSchema([
        Feature("gender", CATEGORICAL),
        Feature("age", ORDINAL),
        Feature("education", ORDINAL),
        Feature("income", CONTINUOUS),
    ])


@pytest.fixture
def people(people_schema):
    # education is rank-encoded (1=HS .. 5=PhD); income in dollars
    return Dataset.from_columns(people_schema, {
        "gender": ["female", "male", "female", "male", "female",
                   "male", "female", "male", "female", "male"],
        "age": [22, 25, 28, 30, 32, 35, 40, 45, 50, 60],
        "education": [1, 2, 2, 3, 3, 4, 4, 5, 5, 3],
        "income": [10_000, 15_000, 20_000, 30_000, 40_000,
                   50_000, 65_000, 80_000, 90_000, 100_000],
    })


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(0))


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, shown even with -q."""
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
