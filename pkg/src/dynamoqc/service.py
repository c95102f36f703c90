"""HTTP review API over a populated report store.

Endpoints (JSON bodies):
  GET  /datasets                 queue listing; filter by verdict, group
  GET  /datasets/{id}            full report
  GET  /datasets/{id}/frames     per-frame quantification table
  POST /datasets/{id}/decision   record an operator decision
  GET  /summary                  cohort summary

Decision writes are serialized through a single appender lock; each request
reads a consistent snapshot from disk.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import ConflictError, NotFoundError, ValidationError
from .pipeline import (
    DecisionChoice,
    ReviewDecision,
    Verdict,
    _category_for,
    build_summary,
    fold_decisions,
    list_report_ids,
    load_decision_log,
    read_report,
    record_decision,
)

_VERDICT_ALIASES = {
    "manual": Verdict.MANUAL_INSPECT.value,
    "manualinspect": Verdict.MANUAL_INSPECT.value,
    "accept": Verdict.AUTO_ACCEPT.value,
    "autoaccept": Verdict.AUTO_ACCEPT.value,
    "reject": Verdict.AUTO_REJECT.value,
    "autoreject": Verdict.AUTO_REJECT.value,
}


class DecisionBody(BaseModel):
    decided_by: str = Field(min_length=1)
    decision: DecisionChoice
    recovery_start_offset: int = Field(ge=0, le=3)
    note: str = ""


def _queue_item(report: dict, decision) -> dict:
    qcs = report["qcs"]
    return {
        "dataset_id": report["dataset_id"],
        "score": qcs["score"],
        "verdict": qcs["verdict"],
        "category": _category_for(qcs["verdict"], decision),
        "violations": [
            {"criterion": v["criterion"], "weight": v["weight"], "detail": v["detail"]}
            for v in qcs["violations"]
        ],
        "group": report.get("group"),
        "decided": decision is not None,
    }


def create_app(reports_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    reports_dir = Path(reports_dir)
    app = FastAPI(title="dynamoqc review service", version="0.1.0")
    write_lock = threading.Lock()

    def get_report_or_404(dataset_id: str) -> dict:
        try:
            return read_report(reports_dir, dataset_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/datasets")
    def list_datasets(
        verdict: str | None = Query(default=None),
        group: str | None = Query(default=None),
    ):
        wanted = None
        if verdict is not None:
            key = verdict.replace("_", "").replace("-", "").lower()
            wanted = _VERDICT_ALIASES.get(key)
            if wanted is None:
                raise HTTPException(
                    status_code=422, detail=f"unknown verdict filter {verdict!r}"
                )
        state = fold_decisions(load_decision_log(reports_dir))
        items = []
        for dataset_id in list_report_ids(reports_dir):
            report = read_report(reports_dir, dataset_id)
            if wanted is not None and report["qcs"]["verdict"] != wanted:
                continue
            if group is not None and report.get("group") != group:
                continue
            items.append(_queue_item(report, state.get(dataset_id)))
        items.sort(key=lambda item: (item["score"], item["dataset_id"]))
        return {"datasets": items}

    @app.get("/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        report = get_report_or_404(dataset_id)
        decision = fold_decisions(load_decision_log(reports_dir)).get(dataset_id)
        report["review"] = report.get("review") or {}
        report["review"]["category"] = _category_for(
            report["qcs"]["verdict"], decision
        )
        return report

    @app.get("/datasets/{dataset_id}/frames")
    def get_frames(dataset_id: str):
        report = get_report_or_404(dataset_id)
        return {"dataset_id": dataset_id, "frames": report["frames"]}

    @app.post("/datasets/{dataset_id}/decision")
    def post_decision(dataset_id: str, body: DecisionBody):
        get_report_or_404(dataset_id)
        decision = ReviewDecision(
            dataset_id=dataset_id,
            decided_by=body.decided_by,
            decision=body.decision,
            recovery_start_offset=body.recovery_start_offset,
            note=body.note,
        )
        with write_lock:
            try:
                report = record_decision(reports_dir, decision)
            except ConflictError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except ValidationError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            except NotFoundError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
        return report

    @app.get("/summary")
    def get_summary():
        return build_summary(reports_dir).to_dict()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
