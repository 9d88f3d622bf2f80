"""HTTP boundary: a small JSON service over one loaded dataset + model.

Endpoints (documented field-by-field in docs/api.md):

    GET  /health
    GET  /schema
    GET  /instances?limit=&offset=
    POST /plaf/validate      {"text": ...}
    POST /explain            {"row" | "values", "plaf"?, "hyper"?,
                              "distance"?, "seed"?, "method"?, "timings"?, ...}

Responses are pure functions of (loaded artifacts, request body): the same
request replays byte-identically. Malformed bodies get 400 with a structured
error; constraint-language problems get 422 with line/column; a search that
hits its generation cap is still 200 with converged=false.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from cfx import __version__, _kernels
from cfx.baselines import cert_explain, simcf_explain, wit_explain
from cfx.distance import DistanceParams
from cfx.engine import EngineError, Hyperparams, explain
from cfx.models import Classifier, load_model
from cfx.plaf import PlafError, PlafProgram, format_program, parse_plaf
from cfx.schema import (
    CATEGORICAL,
    Dataset,
    DataError,
    FeatureSchema,
    Instance,
    SchemaError,
)


class ConfigError(ValueError):
    pass


@dataclass
class SessionConfig:
    schema: str
    data: str
    model: str
    plaf: Optional[str] = None
    seed: int = 0
    hyper: Optional[dict] = None
    distance: Optional[dict] = None

    @classmethod
    def load(cls, path) -> "SessionConfig":
        p = Path(path)
        try:
            raw = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("schema", "data", "model"):
            if key not in raw:
                raise ConfigError(f"config missing required key {key!r}")
        cfg = cls(**raw)
        # paths resolve relative to the config file
        base = p.parent
        for key in ("schema", "data", "model", "plaf"):
            val = getattr(cfg, key)
            if val is not None:
                resolved = (base / val).resolve() if not Path(val).is_absolute() \
                    else Path(val)
                if not resolved.exists():
                    raise ConfigError(f"{key} path does not exist: {resolved}")
                setattr(cfg, key, str(resolved))
        return cfg


@dataclass
class Artifacts:
    schema: FeatureSchema
    dataset: Dataset
    classifier: Classifier
    program: Optional[PlafProgram]
    program_text: str
    hyper: Hyperparams
    params: DistanceParams
    seed: int


def _hyper_from(d: Optional[dict], base: Hyperparams) -> Hyperparams:
    if not d:
        return base
    known = {f.name for f in fields(Hyperparams)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown hyperparameter keys: {sorted(unknown)}")
    merged = {f.name: getattr(base, f.name) for f in fields(Hyperparams)}
    merged.update(d)
    return Hyperparams(**merged)


def _params_from(d: Optional[dict], base: DistanceParams) -> DistanceParams:
    if not d:
        return base
    unknown = set(d) - {"alpha", "beta", "gamma"}
    if unknown:
        raise ValueError(f"unknown distance keys: {sorted(unknown)}")
    return DistanceParams(d.get("alpha", base.alpha), d.get("beta", base.beta),
                          d.get("gamma", base.gamma))


def load_artifacts(cfg: SessionConfig) -> Artifacts:
    schema = FeatureSchema.load(cfg.schema)
    dataset = Dataset.load_csv(cfg.data, schema)
    classifier = load_model(cfg.model, dataset)
    text = ""
    program = None
    if cfg.plaf:
        text = Path(cfg.plaf).read_text()
        try:
            program = parse_plaf(text, schema)
        except PlafError as e:
            raise ConfigError(f"PLAF program invalid: {e}")
    try:
        hyper = _hyper_from(cfg.hyper, Hyperparams(seed=cfg.seed))
        params = _params_from(cfg.distance, DistanceParams())
    except ValueError as e:
        raise ConfigError(str(e))
    return Artifacts(schema, dataset, classifier, program, text, hyper, params,
                     cfg.seed)


def _json(payload, status_code: int = 200) -> Response:
    # one serialization path for every endpoint keeps replays byte-identical
    return Response(content=json.dumps(payload), status_code=status_code,
                    media_type="application/json")


def _error(status: int, message: str, **extra) -> Response:
    return _json({"error": {"message": message, **extra}}, status_code=status)


def _scalar(v):
    return v if isinstance(v, str) else (int(v) if float(v).is_integer() else float(v))


def _instance_payload(inst: Instance, schema: FeatureSchema) -> dict:
    return {f.name: _scalar(v) for f, v in zip(schema.features, inst.values)}


def create_app(art: Artifacts) -> FastAPI:
    app = FastAPI(title="cfx", version=__version__)
    # the explorer UI is served as static files from a different origin;
    # headers don't participate in the byte-replay guarantee (bodies do)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    state = {"preds": None}

    def d_preds() -> np.ndarray:
        if state["preds"] is None:
            state["preds"] = art.classifier.predict(art.dataset.matrix)
        return state["preds"]

    @app.get("/health")
    def health():
        return _json({"status": "ok", "version": __version__,
                      "backend": _kernels.active_backend(),
                      "rows": art.dataset.n_rows,
                      "features": len(art.schema)})

    @app.get("/schema")
    def schema():
        feats = []
        for i, f in enumerate(art.schema.features):
            vals, counts = art.dataset.active_domain(i)
            entry = {
                "name": f.name,
                "kind": f.kind,
                "distinct": int(len(vals)),
                "min": _scalar(float(art.dataset.feat_min[i])),
                "max": _scalar(float(art.dataset.feat_max[i])),
            }
            if f.kind == CATEGORICAL:
                entry["values"] = [art.dataset.decode_value(i, v) for v in vals]
            elif len(vals) <= 64:
                entry["values"] = [_scalar(float(v)) for v in vals]
            feats.append(entry)
        groups = []
        if art.program is not None:
            gs = art.program.group_set
            groups = [[art.schema.features[i].name for i in g] for g in gs.groups
                      if len(g) > 1]
        return _json({"features": feats, "groups": groups,
                      "rows": art.dataset.n_rows, "plaf": art.program_text})

    @app.get("/instances")
    def instances(limit: int = 20, offset: int = 0):
        if limit < 0 or offset < 0:
            return _error(400, "limit and offset must be non-negative")
        limit = min(limit, 500)
        hi = min(offset + limit, art.dataset.n_rows)
        rows = []
        preds = d_preds()
        for r in range(offset, hi):
            rows.append({
                "row": r,
                "values": _instance_payload(art.dataset.row_instance(r), art.schema),
                "prediction": float(preds[r]),
            })
        return _json({"rows": rows, "offset": offset, "total": art.dataset.n_rows})

    @app.post("/plaf/validate")
    async def plaf_validate(request: Request):
        body, err = await _body(request)
        if err:
            return err
        text = body.get("text")
        if not isinstance(text, str):
            return _error(400, "body must contain a string field 'text'")
        try:
            program = parse_plaf(text, art.schema)
        except PlafError as e:
            return _json({"ok": False,
                          "error": {"message": e.message, "line": e.line,
                                    "column": e.col}}, status_code=422)
        gs = program.group_set
        return _json({
            "ok": True,
            "normalized": format_program(program),
            "rules": len(program.rules),
            "groups": [[art.schema.features[i].name for i in g]
                       for g in gs.groups if len(g) > 1],
        })

    @app.post("/explain")
    async def explain_endpoint(request: Request):
        body, err = await _body(request)
        if err:
            return err
        try:
            x_codes = _request_instance(body, art)
        except LookupError as e:
            return _error(400, str(e))
        except (DataError, SchemaError, ValueError) as e:
            return _error(400, f"bad instance: {e}")

        program, text = art.program, art.program_text
        if "plaf" in body:
            if not isinstance(body["plaf"], str):
                return _error(400, "'plaf' must be a string")
            text = body["plaf"]
            try:
                program = parse_plaf(text, art.schema)
            except PlafError as e:
                return _json({"error": {"message": e.message, "line": e.line,
                                        "column": e.col}}, status_code=422)
        try:
            hyper = _hyper_from(body.get("hyper"), art.hyper)
            params = _params_from(body.get("distance"), art.params)
        except (ValueError, TypeError) as e:
            return _error(400, str(e))
        seed = body.get("seed", art.seed)
        if not isinstance(seed, int):
            return _error(400, "'seed' must be an integer")
        hyper = _hyper_from({"seed": seed}, hyper)
        method = body.get("method", "engine")

        try:
            if method == "engine":
                payload = _run_engine(x_codes, program, hyper, params, body, art)
            elif method in ("wit", "cert", "simcf"):
                payload = _run_baseline(method, x_codes, program, params, seed,
                                        art, d_preds())
            else:
                return _error(400, f"unknown method {method!r}")
        except EngineError as e:
            return _error(422, str(e))
        except PlafError as e:
            return _error(422, str(e))
        except ValueError as e:
            return _error(400, str(e))
        return _json(payload)

    return app


async def _body(request: Request):
    try:
        body = await request.json()
    except json.JSONDecodeError:
        return None, _error(400, "request body is not valid JSON")
    if not isinstance(body, dict):
        return None, _error(400, "request body must be a JSON object")
    return body, None


def _request_instance(body: dict, art: Artifacts) -> np.ndarray:
    if ("row" in body) == ("values" in body):
        raise LookupError("provide exactly one of 'row' or 'values'")
    if "row" in body:
        r = body["row"]
        if not isinstance(r, int) or not 0 <= r < art.dataset.n_rows:
            raise LookupError(f"'row' must be an integer in [0, {art.dataset.n_rows})")
        return art.dataset.matrix[r].copy()
    values = body["values"]
    if not isinstance(values, dict):
        raise LookupError("'values' must be an object of feature -> value")
    missing = [f.name for f in art.schema.features if f.name not in values]
    if missing:
        raise LookupError(f"missing features: {missing}")
    unknown = set(values) - {f.name for f in art.schema.features}
    if unknown:
        raise LookupError(f"unknown features: {sorted(unknown)}")
    inst = Instance(tuple(values[f.name] for f in art.schema.features))
    return art.dataset.encode_instance(inst)


def _diff(x_codes: np.ndarray, codes: np.ndarray, art: Artifacts) -> dict:
    out = {}
    x_inst = art.dataset.decode_codes(x_codes)
    z_inst = art.dataset.decode_codes(codes)
    for f, a, b in zip(art.schema.features, x_inst.values, z_inst.values):
        if a != b:
            out[f.name] = {"from": _scalar(a), "to": _scalar(b)}
    return out


def _run_engine(x_codes, program, hyper, params, body, art) -> dict:
    rep = body.get("representation", "delta")
    pe = body.get("partial_eval", True)
    res = explain(x_codes, art.classifier, art.dataset, program, hyper, params,
                  representation=rep, partial_eval=bool(pe))
    top = []
    for e in res.top_k:
        entry = {
            "values": _instance_payload(e.instance, art.schema),
            "changed": _diff(x_codes, e.codes, art),
            "distance": e.distance,
            "prediction": e.prediction,
            "score": e.score,
            "features_changed": e.features_changed,
        }
        top.append(entry)
    payload = {
        "method": "engine",
        "converged": res.converged,
        "generations": res.generations,
        "explored": res.explored_candidates,
        "top_k": top,
    }
    if body.get("timings"):
        # wall-clock measurements are opt-in: including them by default would
        # break the replay guarantee (identical request -> identical bytes)
        payload["timings"] = {k: res.timings[k] for k in sorted(res.timings)}
    return payload


def _run_baseline(method, x_codes, program, params, seed, art, preds) -> dict:
    fn = {"wit": wit_explain, "cert": cert_explain, "simcf": simcf_explain}[method]
    kwargs = {"params": params}
    if method in ("wit", "cert"):
        kwargs["d_preds"] = preds
    if method in ("cert", "simcf"):
        kwargs["seed"] = seed
    if program is None:
        program = parse_plaf("", art.schema)
    r = fn(x_codes, art.classifier, art.dataset, program, **kwargs)
    payload = {
        "method": method,
        "found": r.found,
        "explored": r.explored,
        "elapsed": r.elapsed,
    }
    if r.found:
        payload["counterfactual"] = {
            "values": _instance_payload(r.instance, art.schema),
            "changed": _diff(x_codes, r.codes, art),
            "distance": r.distance,
            "prediction": r.prediction,
            "features_changed": r.features_changed,
        }
    return payload


def app_from_config(path) -> FastAPI:
    return create_app(load_artifacts(SessionConfig.load(path)))
