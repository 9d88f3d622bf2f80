from cfx.bench.workloads import (
    synthetic_schema,
    synthetic_dataset,
    synthetic_classifier,
    synthetic_conditions,
    failing_instances,
    optimal_counterfactual,
    optimal_distance,
    forest_workload,
    random_forest_json,
    random_mlp,
    credit_schema,
    credit_dataset,
    credit_program_text,
    adult_schema,
    adult_dataset,
    adult_program_text,
    ORDER_DOMAIN_DESC,
    ORDER_INTERLEAVED,
)
from cfx.bench.runners import (
    QualityRecord,
    MethodSummary,
    run_quality_bench,
    aggregate_quality,
    BreakdownRecord,
    VARIANTS,
    run_breakdown_bench,
    SuiteRecord,
    SuiteSummary,
    suite_hyper,
    run_synthetic_suite,
    aggregate_suite,
    run_kernel_bench,
)
from cfx.bench.report import (
    records_to_csv,
    records_from_csv,
    format_table,
    summaries_table,
)

__all__ = [n for n in dir() if not n.startswith("_")]
