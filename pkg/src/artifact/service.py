"""Local HTTP API exposing fitted-model artifacts under /v1.

Layout on disk (root directory given to create_app):

    datasets/<id>.csv      uploaded data, id = content digest
    chains/<job>.csv       chain files written by finished fit jobs
    jobs/<job>.json        JobRecord snapshots (restart recovery)
    results/<job>.*        cached grid summaries / async womble payloads

One worker thread runs queued jobs in order (one fit at a time); request
handling itself is concurrent.  Wombling against a finished fit is computed
synchronously for partitions of up to 200 segments.  All numeric work goes
through the same code paths as the CLI, so equal inputs and seeds give
byte-identical artifacts.
"""

import hashlib
import io
import json
import queue
import threading
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .curves import from_document, realize
from .differential_gp import FIELDS, sample_differentials
from .errors import ArtifactError
from .io_cli import (
    RunConfig,
    build_grid,
    grid_summary_text,
    load_dataset,
    parse_dataset,
    womb_curve_record,
    womb_segment_rows,
)
from .mcmc import fit, load_chains, save_chains
from .wombling import sample_wombling

_STATUS_ORDER = {"queued": 0, "running": 1, "done": 2, "failed": 2}
_SYNC_SEGMENT_LIMIT = 200


@dataclass
class JobRecord:
    id: str
    kind: str  # fit | differentials | womble
    status: str = "queued"
    result: str | None = None
    error: str | None = None
    dataset_id: str | None = None
    config: dict | None = None

    def advance(self, status, result=None, error=None):
        if _STATUS_ORDER[status] <= _STATUS_ORDER[self.status]:
            raise ValueError(
                f"job {self.id}: cannot move {self.status} -> {status}"
            )
        self.status = status
        if result is not None:
            self.result = result
        if error is not None:
            self.error = error

    def public(self):
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "result": self.result,
            "error": self.error,
        }


class _Store:
    """Jobs in memory, artifacts on disk; everything behind one lock."""

    def __init__(self, root):
        self.root = Path(root)
        for sub in ("datasets", "chains", "jobs", "results"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        self.jobs: dict[str, JobRecord] = {}
        self.work = queue.Queue()
        self._recover()

    # paths
    def dataset_path(self, did):
        return self.root / "datasets" / f"{did}.csv"

    def chains_path(self, jid):
        return self.root / "chains" / f"{jid}.csv"

    def job_path(self, jid):
        return self.root / "jobs" / f"{jid}.json"

    def result_path(self, jid, suffix):
        return self.root / "results" / f"{jid}.{suffix}"

    def _recover(self):
        for path in sorted((self.root / "jobs").glob("*.json")):
            rec = JobRecord(**json.loads(path.read_text()))
            if rec.status in ("queued", "running"):
                rec.advance("failed", error="interrupted by restart")
                path.write_text(json.dumps(asdict(rec)))
            self.jobs[rec.id] = rec

    def persist(self, rec):
        self.job_path(rec.id).write_text(json.dumps(asdict(rec)))

    def add_job(self, rec):
        with self.lock:
            self.jobs[rec.id] = rec
            self.persist(rec)

    def transition(self, jid, status, result=None, error=None):
        with self.lock:
            rec = self.jobs[jid]
            rec.advance(status, result=result, error=error)
            self.persist(rec)

    def get(self, jid) -> JobRecord:
        with self.lock:
            rec = self.jobs.get(jid)
        if rec is None:
            raise HTTPException(status_code=404, detail=f"unknown job {jid}")
        return rec


def _run_fit(store, rec):
    cfg = RunConfig(**(rec.config or {}))
    data = load_dataset(store.dataset_path(rec.dataset_id))
    chains = fit(
        data,
        cfg.family,
        priors=cfg.prior_config(data),
        iters=cfg.iters,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=cfg.seed,
        target_accept=cfg.target_accept,
    )
    out = store.chains_path(rec.id)
    save_chains(chains, out)
    return str(out)


def _womble_payload(store, fit_rec, curve_doc, settings):
    cfg = RunConfig(**(fit_rec.config or {}))
    allowed = {
        "max_norm", "n_quad_1d", "n_quad_2d", "alpha", "mode", "seed", "thin"
    }
    bad = set(settings) - allowed
    if bad:
        raise HTTPException(
            status_code=400, detail=f"unknown womble settings {sorted(bad)}"
        )
    for k, v in settings.items():
        setattr(cfg, k, v)
    data = load_dataset(store.dataset_path(fit_rec.dataset_id))
    chains = load_chains(store.chains_path(fit_rec.id), data)
    partition = realize(from_document(curve_doc), max_norm=cfg.max_norm)
    res = sample_wombling(
        chains,
        partition,
        n_quad_1d=cfg.n_quad_1d,
        n_quad_2d=cfg.n_quad_2d,
        alpha=cfg.alpha,
        mode=cfg.mode,
        seed=cfg.seed,
        thin=cfg.thin,
    )
    return {
        "fit_job_id": fit_rec.id,
        "n_segments": int(res.lengths.size),
        "segments": womb_segment_rows(res),
        "curve": womb_curve_record(res),
    }, len(partition.segments)


def _grid_summary_csv(store, rec):
    """Full grid-summary CSV for a finished fit, cached on disk."""
    cache = store.result_path(rec.id, "grid.csv")
    if cache.exists():
        return cache.read_text()
    cfg = RunConfig(**(rec.config or {}))
    data = load_dataset(store.dataset_path(rec.dataset_id))
    chains = load_chains(store.chains_path(rec.id), data)
    grid = build_grid(
        cfg.grid_resolution,
        bounds=cfg.grid_bounds,
        hull_locations=None if cfg.grid_bounds else data.locations,
    )
    summary = sample_differentials(
        chains, grid, alpha=cfg.alpha, thin=cfg.thin, seed=cfg.seed
    )
    text = grid_summary_text(summary)
    cache.write_text(text)
    return text


def _worker(store):
    while True:
        jid = store.work.get()
        if jid is None:
            return
        rec = store.get(jid)
        store.transition(jid, "running")
        try:
            if rec.kind == "fit":
                result = _run_fit(store, rec)
            elif rec.kind == "womble":
                fit_rec = store.get(rec.config["fit_job_id"])
                payload, _ = _womble_payload(
                    store, fit_rec, rec.config["curve"],
                    rec.config.get("settings", {}),
                )
                out = store.result_path(jid, "womble.json")
                out.write_text(json.dumps(payload))
                result = str(out)
            else:
                raise ValueError(f"unknown job kind {rec.kind}")
            store.transition(jid, "done", result=result)
        except Exception as exc:  # job errors land in the record
            store.transition(jid, "failed", error=f"{type(exc).__name__}: {exc}")


def create_app(root) -> FastAPI:
    store = _Store(root)
    app = FastAPI(title="spatial-gradient service", version="1")
    app.state.store = store
    worker = threading.Thread(target=_worker, args=(store,), daemon=True)
    worker.start()

    @app.exception_handler(ArtifactError)
    async def _artifact_error(request, exc):
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/datasets")
    async def upload_dataset(request: Request):
        body = (await request.body()).decode("utf-8")
        data = parse_dataset(io.StringIO(body), label="<upload>")
        did = hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]
        path = store.dataset_path(did)
        if not path.exists():
            path.write_text(body)
        return {"dataset_id": did, "L": data.L, "p": data.p}

    @app.post("/v1/fit")
    async def start_fit(request: Request):
        doc = await _json_body(request)
        did = doc.get("dataset_id")
        if not did or not store.dataset_path(did).exists():
            raise HTTPException(status_code=404,
                                detail=f"unknown dataset {did}")
        cfg_doc = doc.get("config") or {}
        known = set(RunConfig.__dataclass_fields__)
        bad = set(cfg_doc) - known
        if bad:
            raise HTTPException(status_code=400,
                                detail=f"unknown config keys {sorted(bad)}")
        rec = JobRecord(id=uuid.uuid4().hex[:12], kind="fit",
                        dataset_id=did, config=cfg_doc)
        store.add_job(rec)
        store.work.put(rec.id)
        return {"job_id": rec.id}

    @app.get("/v1/jobs/{jid}")
    def job_status(jid: str):
        return store.get(jid).public()

    @app.get("/v1/jobs/{jid}/result")
    def job_result(jid: str):
        rec = store.get(jid)
        if rec.status != "done" or not rec.result:
            raise HTTPException(status_code=409,
                                detail=f"job {jid} is {rec.status}")
        path = Path(rec.result)
        if path.suffix == ".json":
            return JSONResponse(content=json.loads(path.read_text()))
        return PlainTextResponse(path.read_text())

    @app.get("/v1/grid-summary")
    def grid_summary(job: str, field: str | None = None):
        rec = store.get(job)
        if rec.kind != "fit":
            raise HTTPException(status_code=400,
                                detail=f"job {job} is not a fit")
        if rec.status != "done":
            raise HTTPException(status_code=409,
                                detail=f"fit {job} is {rec.status}")
        text = _grid_summary_csv(store, rec)
        if field is not None:
            if field not in FIELDS:
                raise HTTPException(status_code=400,
                                    detail=f"unknown field {field}")
            lines = text.splitlines()
            keep = [lines[0]] + [
                ln for ln in lines[1:] if ln.split(",")[2] == field
            ]
            text = "\n".join(keep) + "\n"
        return PlainTextResponse(text, media_type="text/csv")

    @app.post("/v1/womble")
    async def womble(request: Request):
        doc = await _json_body(request)
        jid = doc.get("fit_job_id")
        if jid is None:
            raise HTTPException(status_code=400, detail="fit_job_id required")
        rec = store.get(jid)
        if rec.kind != "fit":
            raise HTTPException(status_code=400,
                                detail=f"job {jid} is not a fit")
        if rec.status in ("queued", "running"):
            raise HTTPException(status_code=409,
                                detail=f"fit {jid} is {rec.status}")
        if rec.status == "failed":
            raise HTTPException(status_code=409, detail=f"fit {jid} failed")
        curve_doc = doc.get("curve")
        if not isinstance(curve_doc, dict):
            raise HTTPException(status_code=400,
                                detail="curve document required")
        settings = doc.get("settings") or {}
        cfg = RunConfig(**(rec.config or {}))
        max_norm = settings.get("max_norm", cfg.max_norm)
        n_seg = len(realize(from_document(curve_doc), max_norm=max_norm).segments)
        if n_seg <= _SYNC_SEGMENT_LIMIT:
            payload, _ = _womble_payload(store, rec, curve_doc, settings)
            return JSONResponse(content=payload)
        wid = uuid.uuid4().hex[:12]
        wrec = JobRecord(
            id=wid, kind="womble", dataset_id=rec.dataset_id,
            config={"fit_job_id": jid, "curve": curve_doc,
                    "settings": settings},
        )
        store.add_job(wrec)
        store.work.put(wid)
        return JSONResponse(status_code=202, content={"job_id": wid})

    return app


async def _json_body(request: Request):
    try:
        doc = json.loads(await request.body())
    except json.JSONDecodeError as exc:
        raise HTTPException(status_code=400, detail=f"bad JSON body: {exc}")
    if not isinstance(doc, dict):
        raise HTTPException(status_code=400, detail="body must be an object")
    return doc
