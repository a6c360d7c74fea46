"""Account policies and the whitelist/blacklist knowledge base.

Entry names and synonyms are matched through one shared normalization, so
stage-2 classification stays deterministic; fuzzy matching lives only in the
advisor. The store follows a single-writer, multiple-reader contract: callers
serialize mutations, readers may query snapshots freely.
"""

import json
import os
import tempfile
import unicodedata
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from importlib import resources

from .errors import ConflictingCategory, IoFailure, StoreCorrupt

SEED_RESOURCE = "seed.policy.json"


def normalize_name(raw: str) -> str:
    """Normalize an item name for matching.

    Applies Unicode compatibility normalization and case folding (iterated to
    a fixed point so the result is idempotent), replaces non-alphanumeric
    characters with spaces, collapses whitespace, and trims.
    """
    folded = None
    while raw != folded:
        folded = raw
        raw = unicodedata.normalize("NFKC", raw).casefold()
    cleaned = "".join(c if c.isalnum() else " " for c in raw)
    return " ".join(cleaned.split())


class ListKind(Enum):
    WHITELIST = "whitelist"
    BLACKLIST = "blacklist"


class Source(Enum):
    SEED = "seed"
    HITL = "hitl"
    MANUAL = "manual"


@dataclass(frozen=True)
class Provenance:
    source: Source
    reviewer: str | None = None
    timestamp: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc).replace(microsecond=0)
    )


@dataclass(frozen=True)
class AccountPolicy:
    """A ledger account with its allowed item categories."""

    code: str
    name: str
    allowed_categories: frozenset[str] = frozenset()
    routine: bool = True

    def __post_init__(self):
        if not self.code:
            raise ValueError("account code must be non-empty")
        object.__setattr__(self, "allowed_categories", frozenset(self.allowed_categories))


@dataclass(frozen=True)
class PolicyEntry:
    """One whitelist or blacklist entry with its synonyms and provenance.

    normalized_key is derived from name; synonyms that normalize to the
    entry's own key are dropped at construction.
    """

    name: str
    category: str | None
    list_kind: ListKind
    synonyms: frozenset[str] = frozenset()
    provenance: Provenance = field(default_factory=lambda: Provenance(Source.SEED))
    reason: str | None = None
    normalized_key: str = ""

    def __post_init__(self):
        key = normalize_name(self.name)
        if not key:
            raise ValueError(f"entry name {self.name!r} normalizes to empty")
        if self.list_kind is ListKind.WHITELIST and not self.category:
            raise ValueError(f"whitelist entry {self.name!r} requires a category")
        object.__setattr__(self, "normalized_key", key)
        object.__setattr__(
            self,
            "synonyms",
            frozenset(s for s in self.synonyms if normalize_name(s) != key),
        )

    def synonym_keys(self) -> set[str]:
        return {normalize_name(s) for s in self.synonyms}


class MatchedVia(Enum):
    ENTRY_NAME = "entry_name"
    SYNONYM = "synonym"


@dataclass(frozen=True)
class LookupResult:
    entry: PolicyEntry
    matched_via: MatchedVia
    matched_text: str


class PolicyStore:
    """In-memory policy store; version increases by exactly 1 per mutation."""

    def __init__(self):
        self.accounts: dict[str, AccountPolicy] = {}
        # one entry per (list kind, normalized key)
        self.entries: dict[tuple[ListKind, str], PolicyEntry] = {}
        self.version = 0

    def account_policy(self, code: str) -> AccountPolicy | None:
        return self.accounts.get(code)

    def upsert_account(self, policy: AccountPolicy) -> None:
        self.accounts[policy.code] = policy
        self.version += 1

    def entries_on(self, kind: ListKind) -> list[PolicyEntry]:
        return sorted(
            (e for (k, _), e in self.entries.items() if k is kind),
            key=lambda e: e.normalized_key,
        )

    def lookup(self, raw_name: str) -> LookupResult | None:
        """Find the entry matching a raw item name, blacklist first.

        Within a list, an entry-name match beats a synonym match; remaining
        ties resolve by lexicographic normalized key.
        """
        key = normalize_name(raw_name)
        if not key:
            return None
        for kind in (ListKind.BLACKLIST, ListKind.WHITELIST):
            entry = self.entries.get((kind, key))
            if entry is not None:
                return LookupResult(entry, MatchedVia.ENTRY_NAME, entry.name)
            for candidate in self.entries_on(kind):
                for synonym in sorted(candidate.synonyms):
                    if normalize_name(synonym) == key:
                        return LookupResult(candidate, MatchedVia.SYNONYM, synonym)
        return None

    def upsert_entry(self, entry: PolicyEntry) -> PolicyEntry:
        """Insert the entry, or merge it into the existing entry that shares
        its normalized key and list (synonym union, newer provenance wins).

        Raises ConflictingCategory when the key exists on the same list with
        a different category; reviewer decisions must resolve that explicitly.
        """
        slot = (entry.list_kind, entry.normalized_key)
        existing = self.entries.get(slot)
        if existing is not None:
            if existing.category != entry.category:
                raise ConflictingCategory(
                    f"{entry.list_kind.value} entry {entry.normalized_key!r} already has "
                    f"category {existing.category!r}, refusing {entry.category!r}"
                )
            entry = replace(
                entry,
                synonyms=existing.synonyms | entry.synonyms,
                reason=entry.reason if entry.reason is not None else existing.reason,
            )
        self.entries[slot] = entry
        self.version += 1
        return entry

    def snapshot(self) -> dict:
        """Serializable image of the store (also the file schema)."""
        return {
            "version": self.version,
            "accounts": [
                account_to_dict(a)
                for a in sorted(self.accounts.values(), key=lambda a: a.code)
            ],
            "entries": [
                entry_to_dict(e)
                for e in sorted(
                    self.entries.values(), key=lambda e: (e.list_kind.value, e.normalized_key)
                )
            ],
        }


def account_to_dict(a: AccountPolicy) -> dict:
    return {
        "code": a.code,
        "name": a.name,
        "allowed_categories": sorted(a.allowed_categories),
        "routine": a.routine,
    }


def entry_to_dict(e: PolicyEntry) -> dict:
    return {
        "name": e.name,
        "normalized_key": e.normalized_key,
        "category": e.category,
        "list": e.list_kind.value,
        "synonyms": sorted(e.synonyms),
        "provenance": {
            "source": e.provenance.source.value,
            "reviewer": e.provenance.reviewer,
            "timestamp": e.provenance.timestamp.isoformat(),
        },
        "reason": e.reason,
    }


def entry_from_dict(raw: dict) -> PolicyEntry:
    prov = raw.get("provenance") or {}
    return PolicyEntry(
        name=raw["name"],
        category=raw.get("category"),
        list_kind=ListKind(raw["list"]),
        synonyms=frozenset(raw.get("synonyms", [])),
        provenance=Provenance(
            source=Source(prov.get("source", "seed")),
            reviewer=prov.get("reviewer"),
            timestamp=datetime.fromisoformat(prov["timestamp"]),
        ),
        reason=raw.get("reason"),
    )


def store_from_snapshot(data: dict) -> PolicyStore:
    """Rebuild a store from its serialized form; StoreCorrupt on violations."""
    store = PolicyStore()
    try:
        for raw in data["accounts"]:
            policy = AccountPolicy(
                code=raw["code"],
                name=raw["name"],
                allowed_categories=frozenset(raw.get("allowed_categories", [])),
                routine=bool(raw.get("routine", True)),
            )
            if policy.code in store.accounts:
                raise StoreCorrupt(f"duplicate account code {policy.code!r}")
            store.accounts[policy.code] = policy
        for raw in data["entries"]:
            entry = entry_from_dict(raw)
            slot = (entry.list_kind, entry.normalized_key)
            if slot in store.entries:
                raise StoreCorrupt(
                    f"two {entry.list_kind.value} entries normalize to "
                    f"{entry.normalized_key!r}"
                )
            store.entries[slot] = entry
        store.version = int(data["version"])
    except StoreCorrupt:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise StoreCorrupt(f"malformed store document: {exc}") from exc
    return store


def load_store(path: str) -> PolicyStore:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read policy store {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StoreCorrupt(f"policy store {path} is not valid JSON: {exc}") from exc
    return store_from_snapshot(data)


def save_store(store: PolicyStore, path: str) -> None:
    """Write the store atomically (temp file, then rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(store.snapshot(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write policy store {path}: {exc}") from exc


def seed_store() -> PolicyStore:
    """Fresh store loaded from the packaged seed fixture (version 1)."""
    data = json.loads(
        resources.files("expenseflow.data").joinpath(SEED_RESOURCE).read_text("utf-8")
    )
    return store_from_snapshot(data)
