"""Dict codecs for the domain artifacts.

One codec per artifact, used verbatim by the event log, the API payloads,
and the CLI's JSON output, so replayed and served data stay structurally
identical to the live objects.
"""

from datetime import datetime

from .advisor import AdvisorRecommendation, Compliance
from .classify import ClassificationOutcome, ItemVerdict, VerdictStatus
from .hitl import (
    DecisionAction,
    ItemResolution,
    ReviewDecision,
    ReviewTask,
    TaskItem,
    TaskState,
    FeedbackRecord,
)
from .policy import entry_from_dict, entry_to_dict
from .receipt import ExtractionResult, FieldExtraction, LineItem


def _ts(dt: datetime) -> str:
    return dt.isoformat()


def _dt(raw: str) -> datetime:
    return datetime.fromisoformat(raw)


def line_item_to_dict(item: LineItem) -> dict:
    return {
        "name": item.name,
        "quantity": item.quantity,
        "unit_price": item.unit_price,
        "amount": item.amount,
    }


def line_item_from_dict(raw: dict) -> LineItem:
    return LineItem(
        name=raw["name"],
        quantity=raw.get("quantity"),
        unit_price=raw.get("unit_price"),
        amount=raw["amount"],
    )


def extraction_to_dict(result: ExtractionResult) -> dict:
    return {
        "fields": [
            {"field_name": f.field_name, "value": f.value, "confidence": f.confidence}
            for f in result.fields
        ],
        "items": [line_item_to_dict(i) for i in result.items],
        "warnings": list(result.warnings),
    }


def extraction_from_dict(raw: dict) -> ExtractionResult:
    return ExtractionResult(
        fields=tuple(
            FieldExtraction(f["field_name"], f["value"], f["confidence"])
            for f in raw["fields"]
        ),
        items=tuple(line_item_from_dict(i) for i in raw["items"]),
        warnings=tuple(raw["warnings"]),
    )


def verdict_to_dict(v: ItemVerdict) -> dict:
    return {
        "item": line_item_to_dict(v.item),
        "status": v.status.value,
        "basis": v.basis,
        "category": v.category,
        "matched_entry": None if v.matched_entry is None else entry_to_dict(v.matched_entry),
    }


def verdict_from_dict(raw: dict) -> ItemVerdict:
    return ItemVerdict(
        item=line_item_from_dict(raw["item"]),
        status=VerdictStatus(raw["status"]),
        basis=raw["basis"],
        category=raw.get("category"),
        matched_entry=(
            None if raw.get("matched_entry") is None else entry_from_dict(raw["matched_entry"])
        ),
    )


def outcome_to_dict(o: ClassificationOutcome) -> dict:
    return {
        "account_code": o.account_code,
        "verdicts": [verdict_to_dict(v) for v in o.verdicts],
        "escalations": list(o.escalations),
    }


def outcome_from_dict(raw: dict) -> ClassificationOutcome:
    return ClassificationOutcome(
        account_code=raw["account_code"],
        verdicts=tuple(verdict_from_dict(v) for v in raw["verdicts"]),
        escalations=tuple(raw["escalations"]),
    )


def recommendation_to_dict(r: AdvisorRecommendation) -> dict:
    return {
        "item_name": r.item_name,
        "compliant": r.compliant.value,
        "rationale": r.rationale,
        "recommended_category": r.recommended_category,
        "recommended_account": r.recommended_account,
        "matched_similar": r.matched_similar,
        "similarity": r.similarity,
    }


def recommendation_from_dict(raw: dict) -> AdvisorRecommendation:
    return AdvisorRecommendation(
        item_name=raw["item_name"],
        compliant=Compliance(raw["compliant"]),
        rationale=raw["rationale"],
        recommended_category=raw.get("recommended_category"),
        recommended_account=raw.get("recommended_account"),
        matched_similar=raw.get("matched_similar"),
        similarity=raw.get("similarity"),
    )


def task_to_dict(t: ReviewTask) -> dict:
    return {
        "task_id": t.task_id,
        "report_id": t.report_id,
        "created_at": _ts(t.created_at),
        "seq": t.seq,
        "state": t.state.value,
        "items": [
            {
                "item": line_item_to_dict(ti.item),
                "verdict": verdict_to_dict(ti.verdict),
                "recommendation": (
                    None
                    if ti.recommendation is None
                    else recommendation_to_dict(ti.recommendation)
                ),
            }
            for ti in t.items
        ],
        "decision": None if t.decision is None else decision_to_dict(t.decision),
    }


def task_from_dict(raw: dict) -> ReviewTask:
    return ReviewTask(
        task_id=raw["task_id"],
        report_id=raw["report_id"],
        created_at=_dt(raw["created_at"]),
        seq=raw["seq"],
        state=TaskState(raw["state"]),
        items=tuple(
            TaskItem(
                item=line_item_from_dict(ti["item"]),
                verdict=verdict_from_dict(ti["verdict"]),
                recommendation=(
                    None
                    if ti.get("recommendation") is None
                    else recommendation_from_dict(ti["recommendation"])
                ),
            )
            for ti in raw["items"]
        ),
        decision=None if raw.get("decision") is None else decision_from_dict(raw["decision"]),
    )


def decision_to_dict(d: ReviewDecision) -> dict:
    return {
        "action": d.action.value,
        "reviewer": d.reviewer,
        "comment": d.comment,
        "decided_at": _ts(d.decided_at),
        "item_resolutions": [
            {
                "original_name": r.original_name,
                "category": r.category,
                "save_synonyms": r.save_synonyms,
                "synonyms": sorted(r.synonyms),
            }
            for r in d.item_resolutions
        ],
    }


def decision_from_dict(raw: dict) -> ReviewDecision:
    return ReviewDecision(
        action=DecisionAction(raw["action"]),
        reviewer=raw["reviewer"],
        comment=raw.get("comment"),
        decided_at=_dt(raw["decided_at"]),
        item_resolutions=tuple(
            ItemResolution(
                original_name=r["original_name"],
                category=r["category"],
                save_synonyms=r["save_synonyms"],
                synonyms=frozenset(r.get("synonyms", [])),
            )
            for r in raw["item_resolutions"]
        ),
    )


def feedback_to_dict(f: FeedbackRecord) -> dict:
    return {
        "decision_ref": f.decision_ref,
        "store_version_before": f.store_version_before,
        "store_version_after": f.store_version_after,
        "entries_written": list(f.entries_written),
    }


def feedback_from_dict(raw: dict) -> FeedbackRecord:
    return FeedbackRecord(
        decision_ref=raw["decision_ref"],
        store_version_before=raw["store_version_before"],
        store_version_after=raw["store_version_after"],
        entries_written=tuple(raw["entries_written"]),
    )
