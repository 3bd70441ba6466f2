"""HTTP service: endpoints, job lifecycle, parity with the CLI."""

import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from artifact.curves import polyline, to_document
from artifact.io_cli import main
from artifact.service import JobRecord, create_app

FIT_CONFIG = {
    "family": "matern52",
    "iters": 80,
    "burn_in": 40,
    "seed": 5,
    "grid_resolution": 4,
    "grid_bounds": [0.2, 0.8, 0.2, 0.8],
}


def _wait(client, jid, timeout=120.0):
    t0 = time.time()
    while time.time() - t0 < timeout:
        rec = client.get(f"/v1/jobs/{jid}").json()
        if rec["status"] in ("done", "failed"):
            return rec
        time.sleep(0.05)
    raise TimeoutError(f"job {jid} did not finish")


@pytest.fixture(scope="module")
def ctx(tmp_path_factory):
    """One uploaded dataset with a finished fit, shared by the module."""
    base = tmp_path_factory.mktemp("svc")
    data_csv = base / "data.csv"
    assert main(["simulate", "--pattern", "1", "--L", "25", "--seed", "7",
                 "--out", str(data_csv)]) == 0
    root = base / "root"
    app = create_app(root)
    client = TestClient(app)
    body = data_csv.read_text()
    did = client.post("/v1/datasets", content=body).json()["dataset_id"]
    jid = client.post(
        "/v1/fit", json={"dataset_id": did, "config": FIT_CONFIG}
    ).json()["job_id"]
    rec = _wait(client, jid)
    assert rec["status"] == "done", rec
    return {
        "base": base, "root": root, "app": app, "client": client,
        "data_csv": data_csv, "dataset_id": did, "fit_job": jid,
    }


def test_health(ctx):
    r = ctx["client"].get("/v1/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_dataset_upload_idempotent_and_validated(ctx):
    client = ctx["client"]
    body = ctx["data_csv"].read_text()
    r1 = client.post("/v1/datasets", content=body)
    assert r1.status_code == 200
    assert r1.json()["dataset_id"] == ctx["dataset_id"]
    assert r1.json()["L"] == 25 and r1.json()["p"] == 1

    bad = client.post("/v1/datasets", content="s1,s2,y\n0,0,oops\n")
    assert bad.status_code == 400
    assert bad.json()["error"] == "ParseError"
    dup = client.post("/v1/datasets",
                      content="s1,s2,y\n0.1,0.1,1\n0.1,0.1,2\n")
    assert dup.status_code == 400
    assert dup.json()["error"] == "DuplicateLocation"


def test_fit_validation(ctx):
    client = ctx["client"]
    r = client.post("/v1/fit", json={"dataset_id": "nope", "config": {}})
    assert r.status_code == 404
    r = client.post("/v1/fit", json={"dataset_id": ctx["dataset_id"],
                                     "config": {"bogus": 1}})
    assert r.status_code == 400
    r = client.post("/v1/fit", content="not json")
    assert r.status_code == 400


def test_job_record_lifecycle(ctx):
    rec = ctx["client"].get(f"/v1/jobs/{ctx['fit_job']}").json()
    assert rec["kind"] == "fit"
    assert rec["status"] == "done"
    assert rec["result"].endswith(".csv")
    assert rec["error"] is None
    assert ctx["client"].get("/v1/jobs/missing").status_code == 404

    j = JobRecord(id="x", kind="fit")
    j.advance("running")
    j.advance("done", result="r")
    with pytest.raises(ValueError):
        j.advance("running")
    with pytest.raises(ValueError):
        j.advance("queued")


def test_fit_chain_file_matches_cli(ctx):
    cli_chains = ctx["base"] / "cli_chains.csv"
    assert main([
        "fit", "--data", str(ctx["data_csv"]), "--out", str(cli_chains),
        "--family", "matern52", "--iters", "80", "--burn-in", "40",
        "--seed", "5",
    ]) == 0
    service_chains = ctx["root"] / "chains" / f"{ctx['fit_job']}.csv"
    assert service_chains.read_text() == cli_chains.read_text()


def test_grid_summary_matches_cli_byte_for_byte(ctx):
    client = ctx["client"]
    r = client.get("/v1/grid-summary", params={"job": ctx["fit_job"]})
    assert r.status_code == 200

    cli_grid = ctx["base"] / "cli_grid.csv"
    service_chains = ctx["root"] / "chains" / f"{ctx['fit_job']}.csv"
    assert main([
        "differentials", "--data", str(ctx["data_csv"]),
        "--chains", str(service_chains), "--out", str(cli_grid),
        "--grid-resolution", "4", "--bounds", "0.2,0.8,0.2,0.8",
        "--seed", "5",
    ]) == 0
    assert r.text == cli_grid.read_text()

    # repeated requests serve the identical cached artifact
    again = client.get("/v1/grid-summary", params={"job": ctx["fit_job"]})
    assert again.text == r.text

    one = client.get("/v1/grid-summary",
                     params={"job": ctx["fit_job"], "field": "z"})
    lines = one.text.strip().splitlines()
    assert lines[0] == "x,y,field,median,lower,upper,flag"
    assert all(ln.split(",")[2] == "z" for ln in lines[1:])
    assert len(lines) == 1 + 16

    assert client.get("/v1/grid-summary",
                      params={"job": ctx["fit_job"],
                              "field": "nope"}).status_code == 400
    assert client.get("/v1/grid-summary",
                      params={"job": "missing"}).status_code == 404


def _womble_body(ctx, **settings):
    curve = to_document(polyline([(0.3, 0.3), (0.6, 0.5)]))
    base = {"max_norm": 0.1, "seed": 3}
    base.update(settings)
    return {"fit_job_id": ctx["fit_job"], "curve": curve, "settings": base}


def test_womble_sync_matches_cli(ctx):
    client = ctx["client"]
    r = client.post("/v1/womble", json=_womble_body(ctx))
    assert r.status_code == 200
    payload = r.json()
    assert payload["n_segments"] == len(payload["segments"])

    curve_json = ctx["base"] / "curve.json"
    curve_json.write_text(json.dumps(to_document(
        polyline([(0.3, 0.3), (0.6, 0.5)]))))
    out_prefix = str(ctx["base"] / "cli_womb")
    service_chains = ctx["root"] / "chains" / f"{ctx['fit_job']}.csv"
    assert main([
        "womble", "--data", str(ctx["data_csv"]),
        "--chains", str(service_chains), "--curve", str(curve_json),
        "--out", out_prefix, "--max-norm", "0.1", "--seed", "3",
    ]) == 0

    rows = payload["segments"]
    lines = open(out_prefix + ".segments.csv").read().strip().splitlines()
    header = lines[0].split(",")
    assert len(lines) - 1 == len(rows)
    for ln, row in zip(lines[1:], rows):
        cells = dict(zip(header, ln.split(",")))
        for key, val in row.items():
            if isinstance(val, str):
                assert cells[key] == val
            elif key == "segment":
                assert int(cells[key]) == val
            else:
                assert float(cells[key]) == val
    cli_curve = json.load(open(out_prefix + ".curve.json"))
    assert payload["curve"] == cli_curve


def test_womble_validation(ctx):
    client = ctx["client"]
    r = client.post("/v1/womble", json={"fit_job_id": "nope",
                                        "curve": {}, "settings": {}})
    assert r.status_code == 404
    r = client.post("/v1/womble", json={"fit_job_id": ctx["fit_job"],
                                        "curve": "not a dict"})
    assert r.status_code == 400
    r = client.post("/v1/womble",
                    json=_womble_body(ctx, bogus_setting=1))
    assert r.status_code == 400
    bad_curve = {"kind": "polyline"}  # missing points
    r = client.post("/v1/womble", json={"fit_job_id": ctx["fit_job"],
                                        "curve": bad_curve, "settings": {}})
    assert r.status_code == 400


def test_womble_against_unfinished_fit_is_409(ctx):
    client = ctx["client"]
    # first job occupies the single worker; the second stays queued
    blocker = client.post("/v1/fit", json={
        "dataset_id": ctx["dataset_id"],
        "config": {"family": "matern52", "iters": 4000, "seed": 1},
    }).json()["job_id"]
    queued = client.post("/v1/fit", json={
        "dataset_id": ctx["dataset_id"],
        "config": {"family": "matern52", "iters": 80, "seed": 2},
    }).json()["job_id"]
    body = _womble_body(ctx)
    body["fit_job_id"] = queued
    r = client.post("/v1/womble", json=body)
    assert r.status_code == 409
    assert _wait(client, blocker)["status"] == "done"
    assert _wait(client, queued)["status"] == "done"


def test_concurrent_womble_requests_are_independent(ctx):
    app = ctx["app"]
    body = _womble_body(ctx)
    reference = TestClient(app).post("/v1/womble", json=body).json()
    results = [None, None]

    def hit(i):
        results[i] = TestClient(app).post("/v1/womble", json=body).json()

    threads = [threading.Thread(target=hit, args=(i,)) for i in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results[0] == reference
    assert results[1] == reference


def test_async_womble_over_segment_limit(ctx):
    client = ctx["client"]
    body = _womble_body(ctx, max_norm=0.3 / 256.0, mode="independent",
                        n_quad_1d=4, n_quad_2d=16)
    body["curve"] = to_document(polyline([(0.3, 0.3), (0.6, 0.5)]))
    r = client.post("/v1/womble", json=body)
    assert r.status_code == 202
    jid = r.json()["job_id"]
    rec = _wait(client, jid)
    assert rec["status"] == "done", rec
    res = client.get(f"/v1/jobs/{jid}/result")
    assert res.status_code == 200
    payload = res.json()
    assert payload["n_segments"] > 200
    assert len(payload["segments"]) == payload["n_segments"]


def test_restart_recovers_completed_fit(ctx):
    # a stale running job on disk is failed on recovery; done fits serve
    stale = JobRecord(id="stalejob", kind="fit", status="running")
    (ctx["root"] / "jobs" / "stalejob.json").write_text(
        json.dumps(stale.__dict__))
    app2 = create_app(ctx["root"])
    c2 = TestClient(app2)
    rec = c2.get(f"/v1/jobs/{ctx['fit_job']}").json()
    assert rec["status"] == "done"
    assert c2.get("/v1/jobs/stalejob").json()["status"] == "failed"
    assert "interrupted" in c2.get("/v1/jobs/stalejob").json()["error"]

    first = ctx["client"].get("/v1/grid-summary",
                              params={"job": ctx["fit_job"]})
    again = c2.get("/v1/grid-summary", params={"job": ctx["fit_job"]})
    assert again.text == first.text
    r = c2.post("/v1/womble", json=_womble_body(ctx))
    assert r.status_code == 200
