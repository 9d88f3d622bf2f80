import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from cfx.service import (ConfigError, SessionConfig, app_from_config,
                         load_artifacts)

from test_engine import search_dataset

RULES = """\
GROUP education, income
PLAF x_cf.gender = x.gender
PLAF x_cf.age >= x.age
"""


def write_bundle(root) -> str:
    """schema/data/model/plaf files plus a config pointing at them."""
    d = search_dataset()
    (root / "schema.json").write_text(json.dumps(d.schema.to_dict()))
    d.to_csv(str(root / "data.csv"))
    inc, age = d.schema.index("income"), d.schema.index("age")
    model = {"type": "forest", "trees": [
        {"nodes": [{"feature": inc, "threshold": 52_500.0, "left": 1, "right": 2},
                   {"leaf": 0.0}, {"leaf": 1.0}]},
        {"nodes": [{"feature": age, "threshold": 50.0, "left": 1, "right": 2},
                   {"leaf": 0.0}, {"leaf": 1.0}]},
    ]}
    (root / "model.json").write_text(json.dumps(model))
    (root / "rules.plaf").write_text(RULES)
    (root / "config.json").write_text(json.dumps({
        "schema": "schema.json", "data": "data.csv", "model": "model.json",
        "plaf": "rules.plaf", "seed": 0,
    }))
    return str(root / "config.json")


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    cfg = write_bundle(tmp_path_factory.mktemp("bundle"))
    return TestClient(app_from_config(cfg))


def failing_values() -> dict:
    return {"gender": "male", "age": 30, "education": 2, "income": 20000}


class TestConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            SessionConfig.load(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        with pytest.raises(ConfigError, match="not valid JSON"):
            SessionConfig.load(p)

    def test_unknown_keys(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"schema": "s", "data": "d", "model": "m",
                                 "threads": 4}))
        with pytest.raises(ConfigError, match="unknown config keys.*threads"):
            SessionConfig.load(p)

    def test_missing_required_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"schema": "s", "data": "d"}))
        with pytest.raises(ConfigError, match="'model'"):
            SessionConfig.load(p)

    def test_paths_resolve_relative_to_config(self, tmp_path):
        cfg_path = write_bundle(tmp_path)
        cfg = SessionConfig.load(cfg_path)
        assert cfg.schema.startswith(str(tmp_path))
        art = load_artifacts(cfg)
        assert art.dataset.n_rows == 200
        assert art.program is not None

    def test_dangling_path(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"schema": "missing.json", "data": "d.csv",
                                 "model": "m.json"}))
        with pytest.raises(ConfigError, match="does not exist"):
            SessionConfig.load(p)

    def test_broken_plaf_rejected_at_load(self, tmp_path):
        cfg_path = write_bundle(tmp_path)
        (tmp_path / "rules.plaf").write_text("PLAF x_cf.nope >= 1\n")
        with pytest.raises(ConfigError, match="PLAF program invalid"):
            load_artifacts(SessionConfig.load(cfg_path))


class TestHealthAndSchema:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["backend"] in ("numba", "numpy")
        assert body["rows"] == 200 and body["features"] == 4

    def test_schema_features(self, client):
        body = client.get("/schema").json()
        by_name = {f["name"]: f for f in body["features"]}
        assert set(by_name) == {"gender", "age", "education", "income"}
        assert by_name["gender"]["kind"] == "categorical"
        assert sorted(by_name["gender"]["values"]) == ["female", "male"]
        assert by_name["age"]["kind"] == "ordinal"
        assert by_name["age"]["min"] >= 20 and by_name["age"]["max"] <= 60
        assert by_name["income"]["distinct"] >= 2

    def test_schema_reports_groups_and_plaf(self, client):
        body = client.get("/schema").json()
        assert body["groups"] == [["education", "income"]]
        assert body["plaf"] == RULES


class TestInstances:
    def test_pagination(self, client):
        first = client.get("/instances", params={"limit": 5}).json()
        assert first["total"] == 200 and len(first["rows"]) == 5
        assert [r["row"] for r in first["rows"]] == [0, 1, 2, 3, 4]
        shifted = client.get("/instances", params={"limit": 2, "offset": 4}).json()
        assert [r["row"] for r in shifted["rows"]] == [4, 5]
        assert shifted["rows"][0]["values"] == first["rows"][4]["values"]

    def test_rows_carry_predictions(self, client):
        rows = client.get("/instances", params={"limit": 3}).json()["rows"]
        for r in rows:
            assert set(r["values"]) == {"gender", "age", "education", "income"}
            assert 0.0 <= r["prediction"] <= 1.0

    def test_negative_params_rejected(self, client):
        assert client.get("/instances", params={"limit": -1}).status_code == 400

    def test_offset_beyond_end(self, client):
        body = client.get("/instances", params={"offset": 10_000}).json()
        assert body["rows"] == []


class TestPlafValidate:
    def test_valid_program(self, client):
        r = client.post("/plaf/validate", json={"text": RULES})
        assert r.status_code == 200
        body = r.json()
        assert body["ok"] is True
        assert body["rules"] == 2
        assert body["groups"] == [["education", "income"]]
        # normalized text parses to the same program
        again = client.post("/plaf/validate", json={"text": body["normalized"]})
        assert again.json()["normalized"] == body["normalized"]

    def test_syntax_error_carries_position(self, client):
        r = client.post("/plaf/validate", json={"text": "PLAF x_cf.age >= >"})
        assert r.status_code == 422
        err = r.json()["error"]
        assert err["line"] == 1 and err["column"] > 0
        assert err["message"]

    def test_unknown_feature_flagged(self, client):
        r = client.post("/plaf/validate", json={"text": "PLAF x_cf.debt >= 1"})
        assert r.status_code == 422
        assert "debt" in r.json()["error"]["message"]

    def test_missing_text_field(self, client):
        assert client.post("/plaf/validate", json={}).status_code == 400

    def test_malformed_body(self, client):
        r = client.post("/plaf/validate", content=b"{nope",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400
        assert "not valid JSON" in r.json()["error"]["message"]


class TestExplain:
    def test_values_instance(self, client):
        r = client.post("/explain", json={"values": failing_values()})
        assert r.status_code == 200
        body = r.json()
        assert body["method"] == "engine"
        assert body["converged"] is True
        assert body["generations"] >= 1
        assert len(body["top_k"]) >= 1
        best = body["top_k"][0]
        assert best["prediction"] > 0.5
        assert best["features_changed"] == len(best["changed"])
        assert best["values"]["gender"] == "male"  # pinned by the session plaf
        assert best["values"]["income"] >= 55_000
        for entry in body["top_k"]:
            for name, move in entry["changed"].items():
                assert move["from"] != move["to"]
                assert entry["values"][name] == move["to"]

    def test_row_instance(self, client):
        preds = client.get("/instances", params={"limit": 200}).json()["rows"]
        bad = next(r for r in preds if r["prediction"] <= 0.5)
        r = client.post("/explain", json={"row": bad["row"]})
        assert r.status_code == 200
        assert r.json()["top_k"][0]["prediction"] > 0.5

    def test_already_good_row(self, client):
        preds = client.get("/instances", params={"limit": 200}).json()["rows"]
        good = next(r for r in preds if r["prediction"] > 0.5)
        body = client.post("/explain", json={"row": good["row"]}).json()
        assert body["converged"] is True and body["generations"] == 0
        assert body["top_k"][0]["distance"] == 0.0
        assert body["top_k"][0]["changed"] == {}

    def test_row_values_exclusive(self, client):
        both = client.post("/explain", json={"row": 0,
                                             "values": failing_values()})
        neither = client.post("/explain", json={})
        assert both.status_code == 400 and neither.status_code == 400
        assert "exactly one" in both.json()["error"]["message"]

    def test_row_out_of_bounds(self, client):
        assert client.post("/explain", json={"row": 10_000}).status_code == 400

    def test_values_validation(self, client):
        missing = dict(failing_values())
        del missing["income"]
        r = client.post("/explain", json={"values": missing})
        assert r.status_code == 400
        assert "income" in r.json()["error"]["message"]
        extra = dict(failing_values(), debt=1)
        assert client.post("/explain",
                           json={"values": extra}).status_code == 400
        bad_cat = dict(failing_values(), gender="other")
        assert client.post("/explain",
                           json={"values": bad_cat}).status_code == 400

    def test_plaf_override(self, client):
        text = RULES + "PLAF x_cf.education = x.education\n"
        body = client.post("/explain", json={"values": failing_values(),
                                             "plaf": text}).json()
        for entry in body["top_k"]:
            assert entry["values"]["education"] == 2
            assert entry["values"]["gender"] == "male"

    def test_plaf_override_error_has_position(self, client):
        r = client.post("/explain", json={"values": failing_values(),
                                          "plaf": "PLAF\nPLAF x_cf.age >="})
        assert r.status_code == 422
        assert r.json()["error"]["line"] >= 1

    def test_replays_byte_identical(self, client):
        req = {"values": failing_values(), "seed": 11}
        a = client.post("/explain", json=req)
        b = client.post("/explain", json=req)
        assert a.content == b.content

    def test_timings_are_opt_in(self, client):
        req = {"values": failing_values(), "seed": 11}
        plain = client.post("/explain", json=req).json()
        assert "timings" not in plain
        timed = client.post("/explain", json={**req, "timings": True}).json()
        for key in ("initial", "selection", "crossover", "mutation", "total"):
            assert key in timed["timings"]

    def test_seed_changes_nothing_structural(self, client):
        a = client.post("/explain", json={"values": failing_values(), "seed": 1})
        b = client.post("/explain", json={"values": failing_values(), "seed": 2})
        assert a.json()["converged"] and b.json()["converged"]

    def test_generation_cap_still_200(self, client):
        r = client.post("/explain", json={
            "values": failing_values(),
            "hyper": {"max_generations": 1},
        })
        assert r.status_code == 200
        assert r.json()["converged"] is False
        assert r.json()["generations"] == 1

    def test_bad_hyper_key(self, client):
        r = client.post("/explain", json={"values": failing_values(),
                                          "hyper": {"population": 5}})
        assert r.status_code == 400
        assert "population" in r.json()["error"]["message"]

    def test_bad_distance_mix(self, client):
        r = client.post("/explain", json={"values": failing_values(),
                                          "distance": {"alpha": 0.9}})
        assert r.status_code == 400  # 0.9 + 1.0 + 0.0 does not sum to 1

    def test_distance_override_works(self, client):
        r = client.post("/explain", json={
            "values": failing_values(),
            "distance": {"alpha": 0.5, "beta": 0.5, "gamma": 0.0},
        })
        assert r.status_code == 200

    def test_non_integer_seed(self, client):
        r = client.post("/explain", json={"values": failing_values(),
                                          "seed": "abc"})
        assert r.status_code == 400

    def test_unknown_method(self, client):
        r = client.post("/explain", json={"values": failing_values(),
                                          "method": "oracle"})
        assert r.status_code == 400

    def test_listing_representation_same_answer(self, client):
        base = {"values": failing_values(), "seed": 3}
        a = client.post("/explain", json=base).json()
        b = client.post("/explain", json={**base, "representation": "listing"}).json()
        assert [e["score"] for e in a["top_k"]] == [e["score"] for e in b["top_k"]]


class TestBaselineMethods:
    @pytest.mark.parametrize("method", ["wit", "cert", "simcf"])
    def test_found_payload(self, client, method):
        r = client.post("/explain", json={"values": failing_values(),
                                          "method": method})
        assert r.status_code == 200
        body = r.json()
        assert body["method"] == method
        assert body["found"] is True
        cf = body["counterfactual"]
        assert cf["prediction"] > 0.5
        assert cf["values"]["gender"] == "male"
        assert cf["features_changed"] >= 1

    def test_wit_unreachable_reports_not_found(self, tmp_path):
        cfg_path = write_bundle(tmp_path)
        model = {"type": "forest", "trees": [
            {"nodes": [{"feature": 3, "threshold": 1e9, "left": 1, "right": 2},
                       {"leaf": 0.0}, {"leaf": 1.0}]}]}
        (tmp_path / "model.json").write_text(json.dumps(model))
        local = TestClient(app_from_config(cfg_path))
        body = local.post("/explain", json={"values": failing_values(),
                                            "method": "wit"}).json()
        assert body["found"] is False
        assert "counterfactual" not in body


class TestEngineErrors:
    def test_unsat_constraints_are_422(self, tmp_path):
        schema = {"features": [{"name": "a", "kind": "ordinal"}]}
        (tmp_path / "schema.json").write_text(json.dumps(schema))
        (tmp_path / "data.csv").write_text("a\n1\n2\n3\n")
        model = {"type": "forest", "trees": [
            {"nodes": [{"feature": 0, "threshold": 99.0, "left": 1, "right": 2},
                       {"leaf": 0.0}, {"leaf": 1.0}]}]}
        (tmp_path / "model.json").write_text(json.dumps(model))
        (tmp_path / "rules.plaf").write_text("PLAF x_cf.a > x.a\n")
        (tmp_path / "config.json").write_text(json.dumps({
            "schema": "schema.json", "data": "data.csv",
            "model": "model.json", "plaf": "rules.plaf"}))
        local = TestClient(app_from_config(str(tmp_path / "config.json")))
        r = local.post("/explain", json={"values": {"a": 3}})
        assert r.status_code == 422
        assert "no mutable features" in r.json()["error"]["message"]
