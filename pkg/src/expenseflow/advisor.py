"""Stage-3 exception handling: recommendations for items the classifier
could not place.

Ships a deterministic similarity-based stub (normalized Levenshtein against
every entry name and synonym) and a client for an external completion
endpoint. Both satisfy the same contract; recommendations are advisory only
and never mutate the policy store. The external client degrades to Unsure on
any failure — the pipeline must never block on the advisor.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Protocol

import requests

from .errors import UnknownAccount
from .policy import ListKind, PolicyStore, normalize_name

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 30.0
PROMPT_RESOURCE = "advisor_prompt.txt"


def levenshtein(a: str, b: str) -> int:
    """Edit distance (insert/delete/substitute, unit costs), two-row DP."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        row = [i]
        for j, cb in enumerate(b, start=1):
            row.append(min(row[-1] + 1, prev[j] + 1, prev[j - 1] + (ca != cb)))
        prev = row
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """Similarity in [0, 1] over normalized forms; 1.0 when both are empty."""
    na, nb = normalize_name(a), normalize_name(b)
    longest = max(len(na), len(nb))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(na, nb) / longest


class Compliance(Enum):
    YES = "yes"
    NO = "no"
    UNSURE = "unsure"


@dataclass(frozen=True)
class AdvisorQuery:
    item_name: str
    account_code: str
    description: str = ""
    policy_digest: dict | None = None

    def __post_init__(self):
        if not self.item_name:
            raise ValueError("item_name must be non-empty")


@dataclass(frozen=True)
class AdvisorRecommendation:
    item_name: str
    compliant: Compliance
    rationale: str
    recommended_category: str | None = None
    recommended_account: str | None = None
    matched_similar: str | None = None
    similarity: float | None = None

    def __post_init__(self):
        if (self.compliant is Compliance.YES) != (self.recommended_category is not None):
            raise ValueError("recommended_category present iff compliant is yes")
        if (self.matched_similar is None) != (self.similarity is None):
            raise ValueError("similarity present iff matched_similar present")


class Advisor(Protocol):
    """Contract every advisor backend satisfies."""

    name: str
    deterministic: bool

    def advise(self, query: AdvisorQuery) -> AdvisorRecommendation: ...


def build_policy_digest(store: PolicyStore, account_code: str) -> dict:
    """What the advisor is allowed to see of the policy store."""
    account = store.account_policy(account_code)
    if account is None:
        raise UnknownAccount(f"account {account_code!r} is not in the policy store")

    def names(kind):
        out = []
        for entry in store.entries_on(kind):
            out.append(entry.name)
            out.extend(sorted(entry.synonyms))
        return out

    return {
        "allowed_categories": sorted(account.allowed_categories),
        "whitelist": names(ListKind.WHITELIST),
        "blacklist": names(ListKind.BLACKLIST),
    }


def _best_match(query_name: str, store: PolicyStore, kind: ListKind):
    """Argmax of similarity over every (entry, name-or-synonym) pair.

    Ties break by higher similarity, then shorter normalized entry name,
    then lexicographic key, then the matched text itself.
    """
    best = None
    for entry in store.entries_on(kind):
        for text in (entry.name, *sorted(entry.synonyms)):
            sim = similarity(query_name, text)
            rank = (-sim, len(entry.normalized_key), entry.normalized_key, normalize_name(text))
            if best is None or rank < best[0]:
                best = (rank, entry, text, sim)
    return best


def advise_stub(
    query: AdvisorQuery,
    store: PolicyStore,
    tau_white: float = 0.5,
    tau_black: float = 0.5,
) -> AdvisorRecommendation:
    """Deterministic recommendation from similarity against the store.

    A blacklist match at or above tau_black wins (compliant no); otherwise a
    whitelist match at or above tau_white whose category the account allows
    yields compliant yes; anything else is unsure.
    """
    account = store.account_policy(query.account_code)
    if account is None:
        raise UnknownAccount(f"account {query.account_code!r} is not in the policy store")

    black = _best_match(query.item_name, store, ListKind.BLACKLIST)
    if black is not None and black[3] >= tau_black:
        _, entry, text, sim = black
        return AdvisorRecommendation(
            item_name=query.item_name,
            compliant=Compliance.NO,
            rationale=(
                f"{query.item_name!r} resembles blacklisted {text!r} "
                f"(similarity {sim:.3f}): {entry.reason or 'prohibited'}"
            ),
            matched_similar=text,
            similarity=sim,
        )

    white = _best_match(query.item_name, store, ListKind.WHITELIST)
    if white is not None and white[3] >= tau_white and white[1].category in account.allowed_categories:
        _, entry, text, sim = white
        return AdvisorRecommendation(
            item_name=query.item_name,
            compliant=Compliance.YES,
            rationale=(
                f"{query.item_name!r} resembles whitelisted {text!r} "
                f"(similarity {sim:.3f}); category {entry.category!r} is allowed "
                f"for account {query.account_code}"
            ),
            recommended_category=entry.category,
            recommended_account=query.account_code,
            matched_similar=text,
            similarity=sim,
        )

    return AdvisorRecommendation(
        item_name=query.item_name,
        compliant=Compliance.UNSURE,
        rationale="no sufficiently similar policy entry; deferring to human review",
    )


@dataclass
class StubAdvisor:
    """Advisor backed by advise_stub over a live store reference."""

    store: PolicyStore
    tau_white: float = 0.5
    tau_black: float = 0.5
    name: str = "stub"
    deterministic: bool = True

    def advise(self, query: AdvisorQuery) -> AdvisorRecommendation:
        return advise_stub(query, self.store, self.tau_white, self.tau_black)


@dataclass(frozen=True)
class ExternalAdvisorConfig:
    url: str
    timeout_s: float = DEFAULT_TIMEOUT_S
    prompt_path: str | None = None


def default_prompt_template() -> str:
    return resources.files("expenseflow.data").joinpath(PROMPT_RESOURCE).read_text("utf-8")


def render_prompt(template: str, query: AdvisorQuery) -> str:
    digest = query.policy_digest or {}
    return template.format(
        item=query.item_name,
        account=query.account_code,
        categories=", ".join(digest.get("allowed_categories", [])),
        whitelist=", ".join(digest.get("whitelist", [])),
        blacklist=", ".join(digest.get("blacklist", [])),
    )


def _query_id(query: AdvisorQuery) -> str:
    payload = f"{query.item_name}\x1f{query.account_code}\x1f{query.description}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _unsure(query: AdvisorQuery, rationale: str) -> AdvisorRecommendation:
    return AdvisorRecommendation(
        item_name=query.item_name, compliant=Compliance.UNSURE, rationale=rationale
    )


def advise_external(
    query: AdvisorQuery, config: ExternalAdvisorConfig
) -> AdvisorRecommendation:
    """Ask the configured completion endpoint; degrade to unsure on failure.

    Never raises: unreachable endpoints, timeouts, and unparseable replies
    all map to compliant unsure with the failure recorded in the rationale.
    """
    if config.prompt_path:
        try:
            with open(config.prompt_path, encoding="utf-8") as fh:
                template = fh.read()
        except OSError as exc:
            log.warning("advisor prompt template unreadable: %s", exc)
            return _unsure(query, f"advisor unavailable: prompt template unreadable ({exc})")
    else:
        template = default_prompt_template()

    body = {
        "query_id": _query_id(query),
        "prompt": render_prompt(template, query),
        "policy_digest": query.policy_digest or {},
    }
    try:
        response = requests.post(config.url, json=body, timeout=config.timeout_s)
        response.raise_for_status()
        reply = response.json()
    except (requests.RequestException, json.JSONDecodeError, ValueError) as exc:
        log.warning("advisor endpoint failed: %s", exc)
        return _unsure(query, f"advisor unavailable: {exc}")

    try:
        compliant = Compliance(str(reply["compliant"]).lower())
        reason = str(reply.get("reason", ""))
        if compliant is Compliance.YES:
            category = reply["recommend"]
            if not isinstance(category, str) or not category:
                raise ValueError("missing recommend")
            return AdvisorRecommendation(
                item_name=query.item_name,
                compliant=Compliance.YES,
                rationale=reason or "recommended by external advisor",
                recommended_category=category,
                recommended_account=str(reply.get("account") or query.account_code),
            )
        if compliant is Compliance.NO:
            return AdvisorRecommendation(
                item_name=query.item_name,
                compliant=Compliance.NO,
                rationale=reason or "rejected by external advisor",
            )
        return _unsure(query, reason or "external advisor is unsure")
    except (KeyError, TypeError, ValueError) as exc:
        log.warning("unparseable advisor reply %r: %s", reply, exc)
        return _unsure(query, f"unparseable advisor reply: {exc}")


@dataclass
class ExternalAdvisor:
    """Advisor backed by the external endpoint contract."""

    config: ExternalAdvisorConfig
    name: str = "external"
    deterministic: bool = False

    def advise(self, query: AdvisorQuery) -> AdvisorRecommendation:
        return advise_external(query, self.config)
