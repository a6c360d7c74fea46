"""Stage-2 policy-based classification of extracted line items.

Rule precedence is fixed: blacklist match, then whitelist match checked
against the account's allowed categories, then unknown. Non-routine accounts
escalate every item to human review.
"""

from dataclasses import dataclass
from enum import Enum

from .errors import UnknownAccount
from .policy import AccountPolicy, ListKind, PolicyEntry, PolicyStore
from .receipt import ExtractionResult, LineItem


class VerdictStatus(Enum):
    ALLOWED = "Allowed"
    PROHIBITED = "Prohibited"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ItemVerdict:
    item: LineItem
    status: VerdictStatus
    basis: str
    category: str | None = None
    matched_entry: PolicyEntry | None = None

    def __post_init__(self):
        if self.status is VerdictStatus.ALLOWED:
            if self.category is None or self.matched_entry is None:
                raise ValueError("Allowed verdict requires category and matched entry")
        if self.status is VerdictStatus.UNKNOWN:
            if self.category is not None or self.matched_entry is not None:
                raise ValueError("Unknown verdict carries no category or entry")


@dataclass(frozen=True)
class ClassificationOutcome:
    account_code: str
    verdicts: tuple[ItemVerdict, ...]
    escalations: tuple[int, ...]


def classify_item(
    item: LineItem,
    account: AccountPolicy,
    store: PolicyStore,
    strict_category: bool = True,
) -> ItemVerdict:
    """Classify one line item against the store under the given account.

    With strict_category (default), a whitelisted item whose category the
    account does not allow is Prohibited outright; otherwise it escalates
    as Unknown.
    """
    hit = store.lookup(item.name)
    if hit is None:
        return ItemVerdict(item, VerdictStatus.UNKNOWN, basis="no policy entry matches")
    entry = hit.entry
    if entry.list_kind is ListKind.BLACKLIST:
        reason = entry.reason or "blacklisted"
        return ItemVerdict(
            item,
            VerdictStatus.PROHIBITED,
            basis=f"blacklist entry {entry.name!r}: {reason}",
            matched_entry=entry,
        )
    if entry.category in account.allowed_categories:
        return ItemVerdict(
            item,
            VerdictStatus.ALLOWED,
            basis=f"whitelist entry {entry.name!r} (via {hit.matched_text!r})",
            category=entry.category,
            matched_entry=entry,
        )
    if strict_category:
        return ItemVerdict(
            item,
            VerdictStatus.PROHIBITED,
            basis=(
                f"category {entry.category!r} not allowed for account {account.code}"
            ),
            matched_entry=entry,
        )
    return ItemVerdict(item, VerdictStatus.UNKNOWN, basis="category not allowed; escalating")


def classify_report(
    extraction: ExtractionResult,
    account_code: str,
    store: PolicyStore,
    strict_category: bool = True,
) -> ClassificationOutcome:
    """Classify every line item of a report, in document order.

    Accounts not flagged routine skip the item-level check entirely: every
    verdict is Unknown, forcing human review.
    """
    account = store.account_policy(account_code)
    if account is None:
        raise UnknownAccount(f"account {account_code!r} is not in the policy store")
    if not account.routine:
        verdicts = tuple(
            ItemVerdict(
                item,
                VerdictStatus.UNKNOWN,
                basis="account is not a routine expense; human review required",
            )
            for item in extraction.items
        )
    else:
        verdicts = tuple(
            classify_item(item, account, store, strict_category)
            for item in extraction.items
        )
    escalations = tuple(
        i for i, v in enumerate(verdicts) if v.status is VerdictStatus.UNKNOWN
    )
    return ClassificationOutcome(account_code, verdicts, escalations)
