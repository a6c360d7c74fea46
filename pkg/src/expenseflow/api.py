"""HTTP interface (/api/v1) for submissions, tasks, decisions, policy,
reports, and metrics — the contract the reviewer UI and scripts consume.

Request bodies are validated by hand so every failure maps to the uniform
error shape {code, message, status} with a code from ERROR_CODES; no stack
trace ever leaks. GETs are side-effect-free.
"""

import os

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .config import Config
from .errors import ExpenseFlowError, InvalidDecision, InvalidLabels
from .evaluation import build_confusion, compute_metrics, outcomes_from_exports, read_labels
from .hitl import DecisionAction, ItemResolution, ReviewDecision, TaskState
from .pipeline import Engine, ExpenseSubmission, export_to_dict, final_to_dict, submission_to_dict
from .policy import ListKind, PolicyEntry, Provenance, Source, entry_to_dict
from .receipt import ReceiptDocument
from .serialize import extraction_to_dict, task_to_dict

ERROR_CODES = frozenset(
    {
        "malformed_receipt",
        "invalid_number",
        "invalid_date",
        "conflicting_category",
        "store_corrupt",
        "io_failure",
        "unknown_account",
        "duplicate_task_for_report",
        "task_not_found",
        "already_decided",
        "invalid_decision",
        "duplicate_report",
        "report_not_found",
        "terminal_state",
        "awaiting_review",
        "duplicate_report_id",
        "invalid_spec",
        "invalid_labels",
        "invalid_body",
        "internal_error",
    }
)

_STATUS_BY_CODE = {
    "malformed_receipt": 422,
    "invalid_number": 422,
    "invalid_date": 422,
    "conflicting_category": 422,
    "store_corrupt": 422,
    "io_failure": 500,
    "unknown_account": 422,
    "duplicate_task_for_report": 409,
    "task_not_found": 404,
    "already_decided": 409,
    "invalid_decision": 422,
    "duplicate_report": 409,
    "report_not_found": 404,
    "terminal_state": 409,
    "awaiting_review": 409,
    "duplicate_report_id": 422,
    "invalid_spec": 422,
    "invalid_labels": 422,
    "invalid_body": 400,
    "internal_error": 500,
}


class BadBody(ExpenseFlowError):
    code = "invalid_body"


def _error_response(code: str, message: str) -> JSONResponse:
    status = _STATUS_BY_CODE.get(code, 500)
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "status": status},
    )


def _require(body: dict, key: str, kind=str):
    if not isinstance(body, dict) or key not in body:
        raise BadBody(f"missing field {key!r}")
    value = body[key]
    if kind is int and isinstance(value, bool):
        raise BadBody(f"field {key!r} must be an integer")
    if not isinstance(value, kind):
        raise BadBody(f"field {key!r} must be {kind.__name__}")
    return value


def _task_summary(task) -> dict:
    return {
        "task_id": task.task_id,
        "report_id": task.report_id,
        "created_at": task.created_at.isoformat(),
        "state": task.state.value,
        "item_count": len(task.items),
    }


def task_detail_payload(engine: Engine, task_id: str) -> dict:
    """Task plus the report context the reviewer screens display."""
    task = engine.queue.get(task_id)
    report = engine.get_report(task.report_id)
    account = engine.store.account_policy(report.submission.account_code)
    detail = task_to_dict(task)
    detail["report"] = {
        "report_id": report.submission.report_id,
        "user": report.submission.user,
        "account_code": report.submission.account_code,
        "description": report.submission.description,
        "declared_total": report.submission.declared_total,
        "state": report.state.value,
    }
    detail["extraction"] = (
        None if report.extraction is None else extraction_to_dict(report.extraction)
    )
    detail["account"] = (
        None
        if account is None
        else {
            "code": account.code,
            "name": account.name,
            "allowed_categories": sorted(account.allowed_categories),
        }
    )
    return detail


def _report_payload(engine: Engine, report) -> dict:
    return {
        "report_id": report.submission.report_id,
        "state": report.state.value,
        "submission": submission_to_dict(report.submission),
        "extraction": None if report.extraction is None else extraction_to_dict(report.extraction),
        "defective_fields": (
            None if report.defective_fields is None else list(report.defective_fields)
        ),
        "task_id": report.task_id,
        "final": None if report.final is None else final_to_dict(report.final),
        "export": None if report.export is None else export_to_dict(report.export),
        "events": engine.report_events(report.submission.report_id),
    }


def _decision_from_body(body: dict) -> ReviewDecision:
    action_raw = _require(body, "action")
    if action_raw not in ("approve", "reject"):
        raise InvalidDecision(f"action must be approve|reject, got {action_raw!r}")
    reviewer = _require(body, "reviewer")
    if not reviewer:
        raise InvalidDecision("reviewer must be non-empty")
    resolutions = []
    for raw in body.get("item_resolutions") or []:
        if not isinstance(raw, dict):
            raise InvalidDecision("item_resolutions entries must be objects")
        try:
            resolutions.append(
                ItemResolution(
                    original_name=_require(raw, "original_name"),
                    category=_require(raw, "category"),
                    save_synonyms=bool(raw.get("save_synonyms", False)),
                    synonyms=frozenset(raw.get("synonyms") or []),
                )
            )
        except (ValueError, BadBody) as exc:
            raise InvalidDecision(str(exc)) from exc
    return ReviewDecision(
        action=DecisionAction.APPROVE if action_raw == "approve" else DecisionAction.REJECT,
        reviewer=reviewer,
        comment=body.get("comment"),
        item_resolutions=tuple(resolutions),
    )


def create_app(config: Config | None = None, engine: Engine | None = None) -> FastAPI:
    config = config or Config()
    engine = engine or Engine(config)
    app = FastAPI(title="expenseflow", version="0.1.0")
    app.state.engine = engine
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[config.ui_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ExpenseFlowError)
    async def _domain_error(_request: Request, exc: ExpenseFlowError):
        return _error_response(exc.code, exc.message)

    @app.exception_handler(Exception)
    async def _unexpected(_request: Request, exc: Exception):
        return _error_response("internal_error", "unexpected server error")

    @app.post("/api/v1/submissions", status_code=201)
    async def handle_submit(request: Request):
        body = await _json_body(request)
        report_id = _require(body, "report_id")
        receipt_raw = body.get("receipt")
        if isinstance(receipt_raw, dict):
            receipt = ReceiptDocument(
                source_id=receipt_raw.get("source_id") or report_id,
                raw_text=_require(receipt_raw, "raw_text"),
            )
        else:
            receipt = ReceiptDocument(
                source_id=report_id, raw_text=_require(body, "receipt_text")
            )
        submission = ExpenseSubmission(
            report_id=report_id,
            user=_require(body, "user"),
            account_code=_require(body, "account_code"),
            description=body.get("description") or "",
            declared_total=_require(body, "declared_total", int),
            receipt=receipt,
        )
        engine.submit(submission)
        state = engine.run_to_completion(report_id)
        return {"report_id": report_id, "state": state.value}

    @app.get("/api/v1/tasks")
    def handle_tasks(state: str | None = None, report_id: str | None = None, limit: int = 100):
        task_state = None
        if state is not None:
            try:
                task_state = TaskState(state.capitalize())
            except ValueError:
                raise BadBody(f"state must be pending|decided, got {state!r}")
        tasks = engine.queue.list_tasks(state=task_state, report_id=report_id)
        return [_task_summary(t) for t in tasks[: max(0, limit)]]

    @app.get("/api/v1/tasks/{task_id}")
    def handle_task_detail(task_id: str):
        return task_detail_payload(engine, task_id)

    @app.post("/api/v1/tasks/{task_id}/decision")
    async def handle_decision(task_id: str, request: Request):
        body = await _json_body(request)
        decision = _decision_from_body(body)
        task, report = engine.decide(task_id, decision)
        return {
            "task_id": task.task_id,
            "report_id": report.submission.report_id,
            "final_state": report.state.value,
            "verdict": report.final.verdict.value,
            "final": final_to_dict(report.final),
        }

    @app.get("/api/v1/policy")
    def handle_policy():
        return engine.store.snapshot()

    @app.post("/api/v1/policy/entries")
    async def handle_policy_upsert(request: Request):
        body = await _json_body(request)
        list_raw = _require(body, "list")
        try:
            kind = ListKind(list_raw)
        except ValueError:
            raise BadBody(f"list must be whitelist|blacklist, got {list_raw!r}")
        try:
            entry = PolicyEntry(
                name=_require(body, "name"),
                category=body.get("category"),
                list_kind=kind,
                synonyms=frozenset(body.get("synonyms") or []),
                provenance=Provenance(Source.MANUAL, reviewer=body.get("reviewer")),
                reason=body.get("reason"),
            )
        except ValueError as exc:
            raise BadBody(str(exc)) from exc
        engine.upsert_policy_entry(entry)
        return {"version": engine.store.version, "entry": entry_to_dict(entry)}

    @app.get("/api/v1/metrics")
    def handle_metrics(labels: str | None = None):
        labels_path = labels or config.labels_path
        if not labels_path:
            raise InvalidLabels("no labels path given (query ?labels= or config labels_path)")
        truth = read_labels(labels_path)
        outcomes = outcomes_from_exports(truth, engine.exports.records)
        return compute_metrics(build_confusion(outcomes)).to_dict()

    @app.get("/api/v1/reports/{report_id}")
    def handle_report(report_id: str):
        return _report_payload(engine, engine.get_report(report_id))

    if config.ui_dist and os.path.isdir(config.ui_dist):
        app.mount("/ui", StaticFiles(directory=config.ui_dist, html=True), name="ui")

    return app


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception as exc:
        raise BadBody(f"body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise BadBody("body must be a JSON object")
    return body
