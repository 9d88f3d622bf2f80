"""Command-line interface.

All data-bound commands read a session config (JSON with schema/data/model
paths, optional plaf path, defaults for seed/hyper/distance) given by
--config or the CFX_CONFIG environment variable.

Exit codes: 0 success, 1 configuration/input errors, 2 search finished
without converging (or a baseline found nothing).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from cfx import __version__
from cfx.baselines import cert_explain, simcf_explain, wit_explain
from cfx.distance import DistanceParams
from cfx.engine import EngineError, Hyperparams, explain
from cfx.models import ModelError, validate_model_dict
from cfx.plaf import PlafError, format_program, parse_plaf
from cfx.schema import DataError, Instance, SchemaError
from cfx.service import (
    Artifacts,
    ConfigError,
    SessionConfig,
    _hyper_from,
    _params_from,
    load_artifacts,
)


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(config_path) -> Artifacts:
    if not config_path:
        _fail("no config given (use --config or set CFX_CONFIG)")
    try:
        return load_artifacts(SessionConfig.load(config_path))
    except (ConfigError, SchemaError, DataError, ModelError) as e:
        _fail(str(e))


@click.group()
@click.version_option(__version__)
def main():
    """Counterfactual explanations for tabular classifiers."""


config_option = click.option(
    "--config", "-c", envvar="CFX_CONFIG", type=click.Path(), default=None,
    help="session config JSON (or set CFX_CONFIG)")


@main.command("explain")
@config_option
@click.option("--instance-row", type=int, default=None,
              help="explain this dataset row")
@click.option("--values", type=str, default=None,
              help='instance as JSON object {"feature": value, ...}')
@click.option("--method", type=click.Choice(["engine", "wit", "cert", "simcf"]),
              default="engine", show_default=True)
@click.option("--k", type=int, default=None, help="counterfactuals to return")
@click.option("--q", type=int, default=None, help="population size")
@click.option("--m-init", type=int, default=None)
@click.option("--m-mut", type=int, default=None)
@click.option("--max-generations", type=int, default=None)
@click.option("--restarts", type=int, default=None,
              help="extra runs allowed when the search fails to converge")
@click.option("--seed", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--mutation-scope", type=click.Choice(["all", "topPerDelta"]),
              default=None)
@click.option("--selective-mutate", is_flag=True, default=False)
@click.option("--representation", type=click.Choice(["delta", "listing"]),
              default="delta", show_default=True)
@click.option("--no-partial-eval", is_flag=True, default=False)
@click.option("--plaf", type=click.Path(exists=False), default=None,
              help="override the config's constraint program")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]),
              default="table", show_default=True)
def cli_explain(config, instance_row, values, method, k, q, m_init, m_mut,
                max_generations, restarts, seed, alpha, beta, gamma,
                mutation_scope, selective_mutate, representation,
                no_partial_eval, plaf, fmt):
    """Explain one instance: print top-k counterfactuals as a diff table."""
    art = _load(config)
    if (instance_row is None) == (values is None):
        _fail("provide exactly one of --instance-row or --values")
    if instance_row is not None:
        if not 0 <= instance_row < art.dataset.n_rows:
            _fail(f"--instance-row out of range [0, {art.dataset.n_rows})")
        x_codes = art.dataset.matrix[instance_row].copy()
    else:
        try:
            vals = json.loads(values)
            inst = Instance(tuple(vals[f.name] for f in art.schema.features))
            x_codes = art.dataset.encode_instance(inst)
        except (json.JSONDecodeError, KeyError, TypeError, DataError,
                SchemaError) as e:
            _fail(f"bad --values: {e}")

    program = art.program
    if plaf is not None:
        try:
            program = parse_plaf(Path(plaf).read_text(), art.schema)
        except FileNotFoundError:
            _fail(f"plaf file not found: {plaf}")
        except PlafError as e:
            _fail(str(e))

    overrides = {name: v for name, v in [
        ("k", k), ("q", q), ("m_init", m_init), ("m_mut", m_mut),
        ("max_generations", max_generations), ("restarts", restarts),
        ("seed", seed), ("mutation_scope", mutation_scope)] if v is not None}
    if selective_mutate:
        overrides["selective_mutate"] = True
    dist_overrides = {name: v for name, v in
                      [("alpha", alpha), ("beta", beta), ("gamma", gamma)]
                      if v is not None}
    try:
        hyper = _hyper_from(overrides, art.hyper)
        params = _params_from(dist_overrides, art.params)
    except ValueError as e:
        _fail(str(e))

    if method == "engine":
        try:
            res = explain(x_codes, art.classifier, art.dataset, program, hyper,
                          params, representation=representation,
                          partial_eval=not no_partial_eval)
        except EngineError as e:
            _fail(str(e))
        _print_engine(res, x_codes, art, fmt)
        if not res.converged:
            sys.exit(2)
        return

    fn = {"wit": wit_explain, "cert": cert_explain, "simcf": simcf_explain}[method]
    kwargs = {"params": params}
    if method in ("cert", "simcf"):
        kwargs["seed"] = hyper.seed
    r = fn(x_codes, art.classifier, art.dataset,
           program if program is not None else parse_plaf("", art.schema),
           **kwargs)
    _print_baseline(method, r, x_codes, art, fmt)
    if not r.found:
        sys.exit(2)


def _diff_rows(x_codes, codes, art):
    x_inst = art.dataset.decode_codes(x_codes)
    z_inst = art.dataset.decode_codes(codes)
    return [(f.name, a, b) for f, a, b in
            zip(art.schema.features, x_inst.values, z_inst.values) if a != b]


def _print_engine(res, x_codes, art, fmt):
    if fmt == "json":
        out = {"converged": res.converged, "generations": res.generations,
               "explored": res.explored_candidates, "top_k": []}
        for e in res.top_k:
            out["top_k"].append({
                "changed": {n: {"from": a, "to": b}
                            for n, a, b in _diff_rows(x_codes, e.codes, art)},
                "distance": e.distance, "prediction": e.prediction,
                "score": e.score})
        click.echo(json.dumps(out, indent=2))
        return
    click.echo(f"converged={res.converged} generations={res.generations} "
               f"explored={res.explored_candidates}")
    for rank, e in enumerate(res.top_k, 1):
        click.echo(f"\n#{rank}  distance={e.distance:.6f} "
                   f"prediction={e.prediction:.4f} score={e.score:.6f}")
        rows = _diff_rows(x_codes, e.codes, art)
        if not rows:
            click.echo("  (no changes)")
        for name, a, b in rows:
            click.echo(f"  {name}: {a} -> {b}")


def _print_baseline(method, r, x_codes, art, fmt):
    if fmt == "json":
        out = {"method": method, "found": r.found, "explored": r.explored}
        if r.found:
            out["distance"] = r.distance
            out["changed"] = {n: {"from": a, "to": b}
                              for n, a, b in _diff_rows(x_codes, r.codes, art)}
        click.echo(json.dumps(out, indent=2))
        return
    if not r.found:
        click.echo(f"{method}: no counterfactual found "
                   f"(explored {r.explored} candidates)")
        return
    click.echo(f"{method}: distance={r.distance:.6f} "
               f"prediction={r.prediction:.4f}")
    for name, a, b in _diff_rows(x_codes, r.codes, art):
        click.echo(f"  {name}: {a} -> {b}")


@main.command("serve")
@config_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def cli_serve(config, host, port):
    """Run the HTTP service."""
    import uvicorn

    from cfx.service import create_app
    art = _load(config)
    uvicorn.run(create_app(art), host=host, port=port, log_level="warning")


@main.command("validate-plaf")
@config_option
@click.argument("plaf_file", type=click.Path())
def cli_validate_plaf(config, plaf_file):
    """Parse a constraint program against the configured schema."""
    art = _load(config)
    try:
        text = Path(plaf_file).read_text()
    except FileNotFoundError:
        _fail(f"file not found: {plaf_file}")
    try:
        program = parse_plaf(text, art.schema)
    except PlafError as e:
        _fail(str(e))
    click.echo(f"ok: {len(program.rules)} rules, "
               f"{len(program.group_set)} feature groups")
    click.echo(format_program(program))


@main.command("validate-model")
@config_option
@click.argument("model_file", type=click.Path())
def cli_validate_model(config, model_file):
    """Check a model JSON file for structural problems."""
    art = _load(config)
    try:
        obj = json.loads(Path(model_file).read_text())
    except FileNotFoundError:
        _fail(f"file not found: {model_file}")
    except json.JSONDecodeError as e:
        _fail(f"not valid JSON: {e}")
    notes = validate_model_dict(obj, dataset=art.dataset)
    for note in notes:
        click.echo(note)
    if any(n.startswith("error:") for n in notes):
        sys.exit(1)


@main.command("bench")
@config_option
@click.option("--suite", type=click.Choice(["quality", "breakdown", "synthetic",
                                            "kernels"]), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="directory for per-instance CSV records")
@click.option("--instances", "n_instances", type=int, default=20, show_default=True)
@click.option("--rows", type=int, default=30_000, show_default=True)
@click.option("--conditions", type=str, default="1,2,3,4",
              show_default=True, help="synthetic condition counts, comma-separated")
@click.option("--order", type=click.Choice(["byDomainSizeDesc", "interleaved"]),
              default="byDomainSizeDesc", show_default=True)
@click.option("--samples", type=click.Choice(["default", "fiveX"]),
              default="default", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def cli_bench(config, suite, out, n_instances, rows, conditions, order, samples,
              seed):
    """Run a benchmark suite and print its summary table."""
    from cfx import bench as B

    out_dir = Path(out) if out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    if suite == "kernels":
        rows_ = B.run_kernel_bench(seed=seed)
        click.echo(B.format_table(
            [[r["backend"], r["kernel"], r["rows"], r["trees"], r["seconds"],
              r["speedup_vs_numpy"]] for r in rows_],
            ["backend", "kernel", "rows", "trees", "seconds", "speedup"]))
        return

    if suite == "synthetic":
        conds = [int(c) for c in conditions.split(",") if c]
        records = B.run_synthetic_suite(order=order, samples=samples,
                                        instance_count=n_instances,
                                        conditions=conds, rows=rows, seed=seed)
        if out_dir:
            B.records_to_csv(records, out_dir / "synthetic.csv")
        click.echo(B.summaries_table(B.aggregate_suite(records)))
        return

    # quality and breakdown need configured artifacts
    art = _load(config)
    preds = art.classifier.predict(art.dataset.matrix)
    bad_rows = np.nonzero(preds <= 0.5)[0][:n_instances]
    if len(bad_rows) == 0:
        _fail("no rows are classified bad; nothing to explain")
    X = art.dataset.matrix[bad_rows]

    if suite == "quality":
        records = B.run_quality_bench(art.dataset, art.classifier, art.program,
                                      X, params=art.params, hyper=art.hyper,
                                      seed=seed)
        if out_dir:
            B.records_to_csv(records, out_dir / "quality.csv")
        click.echo(B.summaries_table(B.aggregate_quality(records)))
        return

    records, identical = B.run_breakdown_bench(art.dataset, art.classifier,
                                               art.program, X, hyper=art.hyper,
                                               params=art.params)
    if out_dir:
        B.records_to_csv(records, out_dir / "breakdown.csv")
    rows_ = {}
    for r in records:
        agg = rows_.setdefault(r.variant, [r.representation, r.partial_eval,
                                           0.0, 0.0, 0])
        agg[2] += r.total
        agg[3] += r.compression
        agg[4] += 1
    table = [[v, rep, pe, tot / cnt, comp / cnt]
             for v, (rep, pe, tot, comp, cnt) in sorted(rows_.items())]
    click.echo(B.format_table(
        table, ["variant", "representation", "partial_eval", "mean_total_s",
                "mean_compression"]))
    click.echo(f"identical top-k across variants: {identical}")


@main.command("datagen")
@click.option("--out", type=click.Path(), default="data", show_default=True)
@click.option("--rows", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=17, show_default=True)
def cli_datagen(out, rows, seed):
    """Regenerate the bundled demo datasets, models, and configs."""
    from cfx.bench.datagen import generate_all
    for line in generate_all(Path(out), rows=rows, seed=seed):
        click.echo(line)


if __name__ == "__main__":
    main()
