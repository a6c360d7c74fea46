"""Stage-4 human-in-the-loop review queue.

Escalated items become ReviewTasks; a reviewer's Approve decision writes the
resolved items back to the policy store (the learning step), atomically with
the task transition. Decisions are idempotent by task id: a replay gets
AlreadyDecided and the first decision stands.
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .advisor import AdvisorRecommendation
from .classify import ItemVerdict, VerdictStatus
from .errors import (
    AlreadyDecided,
    ConflictingCategory,
    DuplicateTaskForReport,
    InvalidDecision,
    TaskNotFound,
)
from .policy import ListKind, PolicyEntry, PolicyStore, Provenance, Source, normalize_name
from .receipt import LineItem


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class TaskState(Enum):
    PENDING = "Pending"
    DECIDED = "Decided"


class DecisionAction(Enum):
    APPROVE = "Approve"
    REJECT = "Reject"


@dataclass(frozen=True)
class TaskItem:
    item: LineItem
    verdict: ItemVerdict
    recommendation: AdvisorRecommendation | None = None


@dataclass(frozen=True)
class ItemResolution:
    """Reviewer's verdict for one escalated item.

    The original name and the proposed synonyms are immutable facts of the
    receipt and the recommendation; the reviewer chooses the category and
    whether to keep the synonyms.
    """

    original_name: str
    category: str
    save_synonyms: bool = False
    synonyms: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.original_name:
            raise ValueError("original_name must be non-empty")
        if not self.category:
            raise ValueError("category must be non-empty")
        object.__setattr__(self, "synonyms", frozenset(self.synonyms))
        if self.synonyms and not self.save_synonyms:
            raise ValueError("synonyms given but save_synonyms is false")


@dataclass(frozen=True)
class ReviewDecision:
    action: DecisionAction
    reviewer: str
    item_resolutions: tuple[ItemResolution, ...] = ()
    comment: str | None = None
    decided_at: datetime = field(default_factory=_utcnow)


@dataclass(frozen=True)
class FeedbackRecord:
    """What one decision wrote back to the store."""

    decision_ref: str
    store_version_before: int
    store_version_after: int
    entries_written: tuple[str, ...] = ()


@dataclass
class ReviewTask:
    task_id: str
    report_id: str
    created_at: datetime
    items: tuple[TaskItem, ...]
    seq: int
    state: TaskState = TaskState.PENDING
    decision: ReviewDecision | None = None


class ReviewQueue:
    """In-memory task queue; persistence is the pipeline's event log."""

    def __init__(self):
        self.tasks: dict[str, ReviewTask] = {}
        self._next_seq = 1

    def create_task(self, report_id: str, escalated: list[TaskItem]) -> ReviewTask:
        if not escalated:
            raise ValueError("escalated item list must be non-empty")
        for task in self.tasks.values():
            if task.report_id == report_id and task.state is TaskState.PENDING:
                raise DuplicateTaskForReport(
                    f"report {report_id!r} already has pending task {task.task_id}"
                )
        seq = self._next_seq
        task = ReviewTask(
            task_id=f"T{seq}",
            report_id=report_id,
            created_at=_utcnow(),
            items=tuple(escalated),
            seq=seq,
        )
        self._next_seq += 1
        self.tasks[task.task_id] = task
        return task

    def restore_task(self, task: ReviewTask) -> None:
        """Re-install a task from the event log (replay path)."""
        self.tasks[task.task_id] = task
        self._next_seq = max(self._next_seq, task.seq + 1)

    def get(self, task_id: str) -> ReviewTask:
        task = self.tasks.get(task_id)
        if task is None:
            raise TaskNotFound(f"no task {task_id!r}")
        return task

    def list_tasks(
        self, state: TaskState | None = None, report_id: str | None = None
    ) -> list[ReviewTask]:
        tasks = [
            t
            for t in self.tasks.values()
            if (state is None or t.state is state)
            and (report_id is None or t.report_id == report_id)
        ]
        return sorted(tasks, key=lambda t: (t.created_at, t.seq))

    def validate_decision(self, task: ReviewTask, decision: ReviewDecision) -> None:
        """Reject malformed decisions before anything is written."""
        names = {r.original_name for r in decision.item_resolutions}
        item_names = {ti.item.name for ti in task.items}
        unknown_names = names - item_names
        if unknown_names:
            raise InvalidDecision(
                f"resolutions name items not in the task: {sorted(unknown_names)}"
            )
        by_key: dict[str, str] = {}
        for r in decision.item_resolutions:
            key = normalize_name(r.original_name)
            if by_key.get(key, r.category) != r.category:
                raise InvalidDecision(
                    f"two resolutions give {r.original_name!r} different categories"
                )
            by_key[key] = r.category
        if decision.action is DecisionAction.APPROVE:
            for ti in task.items:
                if ti.verdict.status is VerdictStatus.UNKNOWN and ti.item.name not in names:
                    raise InvalidDecision(
                        f"approval lacks a category for unknown item {ti.item.name!r}"
                    )

    def submit_decision(
        self, task_id: str, decision: ReviewDecision, store: PolicyStore
    ) -> tuple[ReviewTask, FeedbackRecord]:
        """Apply a reviewer decision: write resolved items to the store (on
        Approve) and mark the task Decided, atomically.

        Conflicts are detected before any write, so a ConflictingCategory
        leaves both the task and the store untouched.
        """
        task = self.get(task_id)
        if task.state is TaskState.DECIDED:
            raise AlreadyDecided(f"task {task_id} already decided; first decision stands")
        self.validate_decision(task, decision)

        entries = []
        if decision.action is DecisionAction.APPROVE:
            for r in decision.item_resolutions:
                entry = PolicyEntry(
                    name=r.original_name,
                    category=r.category,
                    list_kind=ListKind.WHITELIST,
                    synonyms=r.synonyms if r.save_synonyms else frozenset(),
                    provenance=Provenance(
                        Source.HITL, reviewer=decision.reviewer, timestamp=decision.decided_at
                    ),
                )
                existing = store.entries.get((ListKind.WHITELIST, entry.normalized_key))
                if existing is not None and existing.category != entry.category:
                    raise ConflictingCategory(
                        f"whitelist entry {entry.normalized_key!r} already has category "
                        f"{existing.category!r}, refusing {entry.category!r}"
                    )
                entries.append(entry)

        before = store.version
        written = []
        for entry in entries:
            store.upsert_entry(entry)
            written.append(entry.normalized_key)

        task.state = TaskState.DECIDED
        task.decision = decision
        feedback = FeedbackRecord(
            decision_ref=task_id,
            store_version_before=before,
            store_version_after=store.version,
            entries_written=tuple(written),
        )
        return task, feedback

    def restore_decision(self, task_id: str, decision: ReviewDecision) -> None:
        """Mark a task Decided from the event log without touching the store
        (the store file already reflects the write)."""
        task = self.get(task_id)
        task.state = TaskState.DECIDED
        task.decision = decision
