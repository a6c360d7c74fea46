"""End-to-end orchestration: an explicit per-report state machine with an
append-only audit event log, an export sink standing in for the ERP hand-off,
and a notification log.

Every transition appends exactly one audit event; the event log replays to
the exact current state of every report, which is also how an engine
restarts. The policy store persists separately (its own file), so replay
never re-applies learning writes.
"""

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

import requests

from .advisor import AdvisorQuery, ExternalAdvisor, ExternalAdvisorConfig, StubAdvisor, build_policy_digest
from .classify import ClassificationOutcome, VerdictStatus, classify_report
from .config import Config
from .errors import (
    AwaitingReview,
    DuplicateReport,
    IoFailure,
    ReportNotFound,
    TerminalState,
)
from .hitl import DecisionAction, ReviewDecision, ReviewQueue, ReviewTask, TaskItem
from .policy import PolicyStore, load_store, save_store, seed_store
from .receipt import ExtractionResult, GateStatus, ReceiptDocument, gate_confidence, parse_receipt
from .serialize import (
    decision_from_dict,
    decision_to_dict,
    extraction_from_dict,
    extraction_to_dict,
    feedback_to_dict,
    outcome_from_dict,
    outcome_to_dict,
    task_from_dict,
    task_to_dict,
)


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class PipelineState(Enum):
    RECEIVED = "Received"
    EXTRACTED = "Extracted"
    DEFECTIVE = "Defective"
    CLASSIFIED = "Classified"
    PENDING_REVIEW = "PendingReview"
    AUTO_APPROVED = "AutoApproved"
    AUTO_REJECTED = "AutoRejected"
    APPROVED = "Approved"
    REJECTED = "Rejected"
    EXPORTED = "Exported"


TERMINAL = PipelineState.EXPORTED
FINALIZED_STATES = (
    PipelineState.AUTO_APPROVED,
    PipelineState.AUTO_REJECTED,
    PipelineState.APPROVED,
    PipelineState.REJECTED,
)


class Verdict(Enum):
    APPROVE = "Approve"
    REJECT = "Reject"


class ReasonClass(Enum):
    DEFECTIVE = "Defective"
    POLICY = "Policy"
    AMOUNT = "Amount"


@dataclass(frozen=True)
class DecidedBy:
    kind: str  # system | reviewer
    name: str | None = None

    @staticmethod
    def system() -> "DecidedBy":
        return DecidedBy("system")

    @staticmethod
    def reviewer(name: str) -> "DecidedBy":
        return DecidedBy("reviewer", name)


@dataclass(frozen=True)
class ItemResult:
    name: str
    category: str | None
    result: str  # approved | rejected | unreviewed


@dataclass(frozen=True)
class FinalDecision:
    report_id: str
    verdict: Verdict
    reasons: tuple[str, ...]
    decided_by: DecidedBy
    item_results: tuple[ItemResult, ...] = ()
    reason_class: ReasonClass | None = None

    def __post_init__(self):
        if self.verdict is Verdict.REJECT and not self.reasons:
            raise ValueError("a rejection must carry at least one reason")


@dataclass(frozen=True)
class ExportRecord:
    final: FinalDecision
    exported_at: datetime
    sequence: int


class NotificationKind(Enum):
    DEFECTIVE_RECEIPT = "DefectiveReceipt"
    REVIEW_REQUESTED = "ReviewRequested"
    FINALIZED = "Finalized"


@dataclass(frozen=True)
class Notification:
    recipient: str
    kind: NotificationKind
    payload: str
    at: datetime


@dataclass(frozen=True)
class ExpenseSubmission:
    report_id: str
    user: str
    account_code: str
    description: str
    declared_total: int
    receipt: ReceiptDocument

    def __post_init__(self):
        if not self.report_id:
            raise ValueError("report_id must be non-empty")
        if self.declared_total < 0:
            raise ValueError("declared_total must be >= 0")


@dataclass
class Report:
    """Everything the pipeline knows about one submission."""

    submission: ExpenseSubmission
    state: PipelineState = PipelineState.RECEIVED
    extraction: ExtractionResult | None = None
    defective_fields: tuple[str, ...] | None = None
    outcome: ClassificationOutcome | None = None
    amount_ok: bool | None = None
    receipt_total: int | None = None
    task_id: str | None = None
    final: FinalDecision | None = None
    export: ExportRecord | None = None


class JsonlLog:
    """Append-only JSON Lines log with an in-memory mirror.

    A record lands in memory only after the file write flushed, so the
    mirror never runs ahead of disk. path=None keeps the log memory-only
    (used by fast tests).
    """

    def __init__(self, path: str | None):
        self.path = path
        self.records: list[dict] = []
        self._fh = None
        if path:
            try:
                if os.path.exists(path):
                    with open(path, encoding="utf-8") as fh:
                        self.records = [json.loads(line) for line in fh if line.strip()]
                self._fh = open(path, "a", encoding="utf-8")
            except (OSError, json.JSONDecodeError) as exc:
                raise IoFailure(f"cannot open log {path}: {exc}") from exc

    def append(self, record: dict) -> None:
        if self._fh is not None:
            try:
                self._fh.write(json.dumps(record, ensure_ascii=False) + "\n")
                self._fh.flush()
            except OSError as exc:
                raise IoFailure(f"cannot append to {self.path}: {exc}") from exc
        self.records.append(record)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def submission_to_dict(s: ExpenseSubmission) -> dict:
    return {
        "report_id": s.report_id,
        "user": s.user,
        "account_code": s.account_code,
        "description": s.description,
        "declared_total": s.declared_total,
        "receipt": {"source_id": s.receipt.source_id, "raw_text": s.receipt.raw_text},
    }


def submission_from_dict(raw: dict) -> ExpenseSubmission:
    return ExpenseSubmission(
        report_id=raw["report_id"],
        user=raw["user"],
        account_code=raw["account_code"],
        description=raw["description"],
        declared_total=raw["declared_total"],
        receipt=ReceiptDocument(raw["receipt"]["source_id"], raw["receipt"]["raw_text"]),
    )


def final_to_dict(f: FinalDecision) -> dict:
    return {
        "report_id": f.report_id,
        "verdict": f.verdict.value,
        "reasons": list(f.reasons),
        "decided_by": {"kind": f.decided_by.kind, "name": f.decided_by.name},
        "item_results": [
            {"name": r.name, "category": r.category, "result": r.result}
            for r in f.item_results
        ],
        "reason_class": None if f.reason_class is None else f.reason_class.value,
    }


def final_from_dict(raw: dict) -> FinalDecision:
    return FinalDecision(
        report_id=raw["report_id"],
        verdict=Verdict(raw["verdict"]),
        reasons=tuple(raw["reasons"]),
        decided_by=DecidedBy(raw["decided_by"]["kind"], raw["decided_by"].get("name")),
        item_results=tuple(
            ItemResult(r["name"], r.get("category"), r["result"])
            for r in raw["item_results"]
        ),
        reason_class=(
            None if raw.get("reason_class") is None else ReasonClass(raw["reason_class"])
        ),
    )


def export_to_dict(r: ExportRecord) -> dict:
    return {
        "final": final_to_dict(r.final),
        "exported_at": r.exported_at.isoformat(),
        "sequence": r.sequence,
    }


def export_from_dict(raw: dict) -> ExportRecord:
    return ExportRecord(
        final=final_from_dict(raw["final"]),
        exported_at=datetime.fromisoformat(raw["exported_at"]),
        sequence=raw["sequence"],
    )


class Engine:
    """Single-process orchestrator. Mutations serialize through one lock;
    distinct reports may still interleave their transitions freely."""

    def __init__(self, config: Config, store: PolicyStore | None = None, advisor=None):
        self.config = config
        self.lock = threading.RLock()
        if store is not None:
            self.store = store
        elif config.store_path and os.path.exists(config.store_path):
            self.store = load_store(config.store_path)
        else:
            self.store = seed_store()
            if config.store_path:
                save_store(self.store, config.store_path)
        if advisor is not None:
            self.advisor = advisor
        elif config.advisor.kind == "external" and config.advisor.url:
            self.advisor = ExternalAdvisor(
                ExternalAdvisorConfig(
                    url=config.advisor.url,
                    timeout_s=config.advisor.timeout_s,
                    prompt_path=config.advisor.prompt_path,
                )
            )
        else:
            self.advisor = StubAdvisor(self.store, config.tau_white, config.tau_black)
        self.events = JsonlLog(config.event_log_path)
        self.exports = JsonlLog(config.export_sink_path)
        self.notifications = JsonlLog(config.notification_log_path)
        self.reports: dict[str, Report] = {}
        self.queue = ReviewQueue()
        self._next_event_seq = 1
        self._next_export_seq = 1 + max(
            (r["sequence"] for r in self.exports.records), default=0
        )
        replay_into(self, self.events.records)
        if self.events.records:
            self._next_event_seq = max(e["seq"] for e in self.events.records) + 1

    def close(self) -> None:
        self.events.close()
        self.exports.close()
        self.notifications.close()

    # -- event plumbing -----------------------------------------------------

    def _append_event(self, report_id: str, event: str, payload: dict) -> None:
        self.events.append(
            {
                "seq": self._next_event_seq,
                "at": _utcnow().isoformat(),
                "report_id": report_id,
                "event": event,
                "payload": payload,
            }
        )
        self._next_event_seq += 1

    def notify(self, notification: Notification) -> None:
        """Append to the notification log; mirror to the webhook without
        ever delaying or failing the calling transition."""
        record = {
            "recipient": notification.recipient,
            "kind": notification.kind.value,
            "payload": notification.payload,
            "at": notification.at.isoformat(),
        }
        try:
            self.notifications.append(record)
        except IoFailure:
            pass
        if self.config.webhook_url:
            threading.Thread(
                target=self._post_webhook, args=(record,), daemon=True
            ).start()

    def _post_webhook(self, record: dict) -> None:
        try:
            requests.post(self.config.webhook_url, json=record, timeout=5)
        except requests.RequestException:
            pass

    def _notify_user(self, report: Report, kind: NotificationKind, payload: str) -> None:
        self.notify(
            Notification(report.submission.user, kind, payload, _utcnow())
        )

    # -- stage 0: submission ------------------------------------------------

    def submit(self, submission: ExpenseSubmission) -> Report:
        """Register a submission; the receipt is validated up front so a
        malformed document never creates state."""
        with self.lock:
            if submission.report_id in self.reports:
                raise DuplicateReport(f"report {submission.report_id!r} already submitted")
            parse_receipt(submission.receipt)  # raises before any state exists
            self._append_event(
                submission.report_id, "submitted", {"submission": submission_to_dict(submission)}
            )
            report = Report(submission=submission)
            self.reports[submission.report_id] = report
            return report

    def get_report(self, report_id: str) -> Report:
        report = self.reports.get(report_id)
        if report is None:
            raise ReportNotFound(f"no report {report_id!r}")
        return report

    def report_events(self, report_id: str) -> list[dict]:
        return [e for e in self.events.records if e["report_id"] == report_id]

    # -- the state machine --------------------------------------------------

    def advance(self, report_id: str) -> PipelineState:
        """Execute exactly one transition for the report."""
        with self.lock:
            report = self.get_report(report_id)
            state = report.state
            if state is TERMINAL:
                raise TerminalState(f"report {report_id!r} is already exported")
            if state is PipelineState.RECEIVED:
                self._do_extract(report)
            elif state is PipelineState.EXTRACTED:
                self._do_gate(report)
            elif state is PipelineState.CLASSIFIED:
                self._do_decide_auto(report)
            elif state is PipelineState.DEFECTIVE:
                self._do_reject_defective(report)
            elif state in FINALIZED_STATES:
                self._do_export(report)
            elif state is PipelineState.PENDING_REVIEW:
                raise AwaitingReview(
                    f"report {report_id!r} waits on task {report.task_id}; decide it first"
                )
            return report.state

    def run_to_completion(self, report_id: str) -> PipelineState:
        """Advance until the report is exported or parked for review."""
        with self.lock:
            state = self.get_report(report_id).state
            while state is not TERMINAL and state is not PipelineState.PENDING_REVIEW:
                state = self.advance(report_id)
            return state

    def _do_extract(self, report: Report) -> None:
        extraction = parse_receipt(report.submission.receipt)
        self._append_event(
            report.submission.report_id, "extracted", {"extraction": extraction_to_dict(extraction)}
        )
        report.extraction = extraction
        report.state = PipelineState.EXTRACTED

    def _do_gate(self, report: Report) -> None:
        verdict = gate_confidence(
            report.extraction,
            set(self.config.mandatory_fields),
            self.config.confidence_threshold,
        )
        report_id = report.submission.report_id
        if verdict.status is GateStatus.DEFECTIVE:
            self._append_event(
                report_id, "defective", {"defective_fields": list(verdict.defective_fields)}
            )
            report.defective_fields = verdict.defective_fields
            report.state = PipelineState.DEFECTIVE
            self._notify_user(
                report,
                NotificationKind.DEFECTIVE_RECEIPT,
                "receipt defective; low-confidence or missing fields: "
                + ", ".join(verdict.defective_fields),
            )
            return
        outcome = classify_report(
            report.extraction,
            report.submission.account_code,
            self.store,
            self.config.strict_category,
        )
        total = report.extraction.field_value("total")
        receipt_total = total if isinstance(total, int) else None
        amount_ok = receipt_total == report.submission.declared_total
        self._append_event(
            report_id,
            "classified",
            {
                "outcome": outcome_to_dict(outcome),
                "amount_ok": amount_ok,
                "receipt_total": receipt_total,
            },
        )
        report.outcome = outcome
        report.amount_ok = amount_ok
        report.receipt_total = receipt_total
        report.state = PipelineState.CLASSIFIED

    def _item_results(
        self, report: Report, resolutions: dict[str, str] | None = None
    ) -> tuple[ItemResult, ...]:
        if report.outcome is None:
            return ()
        results = []
        for v in report.outcome.verdicts:
            if v.status is VerdictStatus.ALLOWED:
                results.append(ItemResult(v.item.name, v.category, "approved"))
            elif v.status is VerdictStatus.PROHIBITED:
                results.append(ItemResult(v.item.name, None, "rejected"))
            else:
                category = (resolutions or {}).get(v.item.name)
                if category is not None:
                    results.append(ItemResult(v.item.name, category, "approved"))
                else:
                    results.append(ItemResult(v.item.name, None, "unreviewed"))
        return tuple(results)

    def _do_decide_auto(self, report: Report) -> None:
        report_id = report.submission.report_id
        outcome = report.outcome
        reasons = [
            f"item {v.item.name!r} rejected: {v.basis}"
            for v in outcome.verdicts
            if v.status is VerdictStatus.PROHIBITED
        ]
        any_prohibited = bool(reasons)
        if not report.amount_ok:
            if report.receipt_total is None:
                reasons.append(
                    f"receipt has no total to verify against declared total "
                    f"{report.submission.declared_total}"
                )
            else:
                reasons.append(
                    f"declared total {report.submission.declared_total} ≠ "
                    f"receipt total {report.receipt_total}"
                )
        if reasons:
            final = FinalDecision(
                report_id=report_id,
                verdict=Verdict.REJECT,
                reasons=tuple(reasons),
                decided_by=DecidedBy.system(),
                item_results=self._item_results(report),
                reason_class=ReasonClass.POLICY if any_prohibited else ReasonClass.AMOUNT,
            )
            self._append_event(report_id, "auto_rejected", {"final": final_to_dict(final)})
            report.final = final
            report.state = PipelineState.AUTO_REJECTED
            return
        if outcome.escalations:
            digest = build_policy_digest(self.store, report.submission.account_code)
            task_items = []
            for idx in outcome.escalations:
                verdict = outcome.verdicts[idx]
                query = AdvisorQuery(
                    item_name=verdict.item.name,
                    account_code=report.submission.account_code,
                    description=report.submission.description,
                    policy_digest=digest,
                )
                task_items.append(
                    TaskItem(verdict.item, verdict, self.advisor.advise(query))
                )
            task = self.queue.create_task(report_id, task_items)
            self._append_event(report_id, "task_created", {"task": task_to_dict(task)})
            report.task_id = task.task_id
            report.state = PipelineState.PENDING_REVIEW
            self._notify_user(
                report,
                NotificationKind.REVIEW_REQUESTED,
                f"task {task.task_id} awaits review ({len(task.items)} item(s))",
            )
            return
        final = FinalDecision(
            report_id=report_id,
            verdict=Verdict.APPROVE,
            reasons=(),
            decided_by=DecidedBy.system(),
            item_results=self._item_results(report),
        )
        self._append_event(report_id, "auto_approved", {"final": final_to_dict(final)})
        report.final = final
        report.state = PipelineState.AUTO_APPROVED

    def _do_reject_defective(self, report: Report) -> None:
        report_id = report.submission.report_id
        final = FinalDecision(
            report_id=report_id,
            verdict=Verdict.REJECT,
            reasons=("defective receipt",),
            decided_by=DecidedBy.system(),
            reason_class=ReasonClass.DEFECTIVE,
        )
        self._append_event(report_id, "rejected", {"final": final_to_dict(final)})
        report.final = final
        report.state = PipelineState.REJECTED

    def _do_export(self, report: Report) -> None:
        report_id = report.submission.report_id
        record = ExportRecord(
            final=report.final, exported_at=_utcnow(), sequence=self._next_export_seq
        )
        self.exports.append(export_to_dict(record))  # durable before the event
        self._next_export_seq += 1
        self._append_event(report_id, "exported", {"record": export_to_dict(record)})
        report.export = record
        report.state = PipelineState.EXPORTED
        self._notify_user(
            report,
            NotificationKind.FINALIZED,
            f"report {report_id} finalized: {report.final.verdict.value}",
        )

    # -- stage 4: the human decision -----------------------------------------

    def decide(self, task_id: str, decision: ReviewDecision) -> tuple[ReviewTask, Report]:
        """Apply a reviewer decision and finalize the report (to Exported)."""
        with self.lock:
            task = self.queue.get(task_id)
            report = self.get_report(task.report_id)
            task, feedback = self.queue.submit_decision(task_id, decision, self.store)
            if self.config.store_path:
                save_store(self.store, self.config.store_path)
            self._append_event(
                task.report_id,
                "decision",
                {
                    "task_id": task_id,
                    "decision": decision_to_dict(decision),
                    "feedback": feedback_to_dict(feedback),
                },
            )
            if decision.action is DecisionAction.APPROVE:
                resolutions = {
                    r.original_name: r.category for r in decision.item_resolutions
                }
                final = FinalDecision(
                    report_id=task.report_id,
                    verdict=Verdict.APPROVE,
                    reasons=(),
                    decided_by=DecidedBy.reviewer(decision.reviewer),
                    item_results=self._item_results(report, resolutions),
                )
                self._append_event(
                    task.report_id, "approved", {"final": final_to_dict(final)}
                )
                report.final = final
                report.state = PipelineState.APPROVED
            else:
                reason = f"rejected by reviewer {decision.reviewer}"
                if decision.comment:
                    reason += f": {decision.comment}"
                final = FinalDecision(
                    report_id=task.report_id,
                    verdict=Verdict.REJECT,
                    reasons=(reason,),
                    decided_by=DecidedBy.reviewer(decision.reviewer),
                    item_results=self._item_results(report),
                    reason_class=ReasonClass.POLICY,
                )
                self._append_event(
                    task.report_id, "rejected", {"final": final_to_dict(final)}
                )
                report.final = final
                report.state = PipelineState.REJECTED
            self.run_to_completion(task.report_id)
            return task, report

    # -- policy administration ----------------------------------------------

    def upsert_policy_entry(self, entry) -> None:
        """Store mutation + persistence, under the single-writer lock."""
        with self.lock:
            self.store.upsert_entry(entry)
            if self.config.store_path:
                save_store(self.store, self.config.store_path)


def replay_into(engine: Engine, events: list[dict]) -> None:
    """Rebuild report registry and review queue from audit events."""
    for event in events:
        kind = event["event"]
        payload = event["payload"]
        report_id = event["report_id"]
        if kind == "submitted":
            engine.reports[report_id] = Report(
                submission=submission_from_dict(payload["submission"])
            )
            continue
        report = engine.reports[report_id]
        if kind == "extracted":
            report.extraction = extraction_from_dict(payload["extraction"])
            report.state = PipelineState.EXTRACTED
        elif kind == "defective":
            report.defective_fields = tuple(payload["defective_fields"])
            report.state = PipelineState.DEFECTIVE
        elif kind == "classified":
            report.outcome = outcome_from_dict(payload["outcome"])
            report.amount_ok = payload["amount_ok"]
            report.receipt_total = payload["receipt_total"]
            report.state = PipelineState.CLASSIFIED
        elif kind == "task_created":
            task = task_from_dict(payload["task"])
            engine.queue.restore_task(task)
            report.task_id = task.task_id
            report.state = PipelineState.PENDING_REVIEW
        elif kind == "decision":
            engine.queue.restore_decision(
                payload["task_id"], decision_from_dict(payload["decision"])
            )
        elif kind == "auto_approved":
            report.final = final_from_dict(payload["final"])
            report.state = PipelineState.AUTO_APPROVED
        elif kind == "auto_rejected":
            report.final = final_from_dict(payload["final"])
            report.state = PipelineState.AUTO_REJECTED
        elif kind == "approved":
            report.final = final_from_dict(payload["final"])
            report.state = PipelineState.APPROVED
        elif kind == "rejected":
            report.final = final_from_dict(payload["final"])
            report.state = PipelineState.REJECTED
        elif kind == "exported":
            report.export = export_from_dict(payload["record"])
            report.state = PipelineState.EXPORTED
