"""Domain errors shared across the package.

Every error carries a machine-readable ``code`` so the API and CLI can map
failures to their wire contracts without string matching.
"""


class ExpenseFlowError(Exception):
    """Base class for all domain errors."""

    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class MalformedReceipt(ExpenseFlowError):
    code = "malformed_receipt"


class InvalidNumber(ExpenseFlowError):
    code = "invalid_number"


class InvalidDate(ExpenseFlowError):
    code = "invalid_date"


class ConflictingCategory(ExpenseFlowError):
    code = "conflicting_category"


class StoreCorrupt(ExpenseFlowError):
    code = "store_corrupt"


class IoFailure(ExpenseFlowError):
    code = "io_failure"


class UnknownAccount(ExpenseFlowError):
    code = "unknown_account"


class DuplicateTaskForReport(ExpenseFlowError):
    code = "duplicate_task_for_report"


class TaskNotFound(ExpenseFlowError):
    code = "task_not_found"


class AlreadyDecided(ExpenseFlowError):
    code = "already_decided"


class InvalidDecision(ExpenseFlowError):
    code = "invalid_decision"


class DuplicateReport(ExpenseFlowError):
    code = "duplicate_report"


class ReportNotFound(ExpenseFlowError):
    code = "report_not_found"


class TerminalState(ExpenseFlowError):
    code = "terminal_state"


class AwaitingReview(ExpenseFlowError):
    code = "awaiting_review"


class DuplicateReportId(ExpenseFlowError):
    code = "duplicate_report_id"


class InvalidSpec(ExpenseFlowError):
    code = "invalid_spec"


class InvalidLabels(ExpenseFlowError):
    code = "invalid_labels"
