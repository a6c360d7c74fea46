import json

import pytest

from expenseflow.errors import ConflictingCategory, IoFailure, StoreCorrupt
from expenseflow.policy import (
    AccountPolicy,
    ListKind,
    MatchedVia,
    PolicyEntry,
    PolicyStore,
    Provenance,
    Source,
    load_store,
    normalize_name,
    save_store,
    seed_store,
)


def white(name, category="Food", synonyms=(), reason=None):
    return PolicyEntry(
        name=name,
        category=category,
        list_kind=ListKind.WHITELIST,
        synonyms=frozenset(synonyms),
        reason=reason,
    )


def black(name, reason="not work-related"):
    return PolicyEntry(name=name, category=None, list_kind=ListKind.BLACKLIST, reason=reason)


class TestNormalize:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("  gift   CERTIFICATE ", "gift certificate"),
            ("", ""),
            ("Lotte) Canchotad", "lotte canchotad"),
            ("Simply-Black!", "simply black"),
            ("심플리블랙", "심플리블랙"),
            ("ＳＩＭＰＬＹ　ＢＬＡＣＫ", "simply black"),  # full-width compatibility forms
            ("café au lait", "café au lait"),
        ],
    )
    def test_examples(self, raw, expected):
        assert normalize_name(raw) == expected

    def test_idempotent_on_samples(self):
        for raw in ["  Gift Card ", "ß-Straße", "①②③", "ＡＢＣ·ｄｅｆ", "ẋ"]:
            once = normalize_name(raw)
            assert normalize_name(once) == once


class TestLookup:
    def test_seed_blacklist_hit_by_entry_name(self, store):
        hit = store.lookup("gift certificate")
        assert hit.entry.list_kind is ListKind.BLACKLIST
        assert hit.matched_via is MatchedVia.ENTRY_NAME
        assert hit.matched_text == "gift certificate"

    def test_empty_store_misses(self):
        assert PolicyStore().lookup("anything") is None

    def test_case_and_punctuation_variants_match(self, store):
        hit = store.lookup("SIMPLY SMOOTH BLACK")
        assert hit.entry.name == "Simply Smooth Black"
        assert hit.matched_via is MatchedVia.ENTRY_NAME

    def test_synonym_match_reports_synonym_text(self, store):
        hit = store.lookup("choco  chip -cookie")
        assert hit.entry.name == "Chocolate chip cookie"
        assert hit.matched_via is MatchedVia.SYNONYM
        assert hit.matched_text == "choco chip cookie"

    def test_blacklist_preferred_on_double_match(self, store):
        store.upsert_entry(white("gift certificate", category="Food"))
        hit = store.lookup("Gift Certificate")
        assert hit.entry.list_kind is ListKind.BLACKLIST

    def test_empty_name_misses(self, store):
        assert store.lookup("   ") is None


class TestUpsert:
    def test_insert_then_lookup_hits_and_version_bumps(self, store):
        version = store.version
        store.upsert_entry(white("Simply Black", synonyms={"Simply Smooth Black"}))
        assert store.version == version + 1
        assert store.lookup("Simply Black").entry.category == "Food"
        assert store.lookup("simply  black").entry.name == "Simply Black"

    def test_upsert_twice_content_stable_version_still_increments(self, store):
        entry = white("Simply Black")
        store.upsert_entry(entry)
        first = store.snapshot()["entries"]
        version = store.version
        store.upsert_entry(entry)
        assert store.snapshot()["entries"] == first
        assert store.version == version + 1

    def test_conflicting_category(self, store):
        store.upsert_entry(white("Simply Black", category="Food"))
        with pytest.raises(ConflictingCategory):
            store.upsert_entry(white("Simply Black", category="Beverage"))

    def test_merge_unions_synonyms_keeps_newer_provenance(self, store):
        store.upsert_entry(white("Simply Black", synonyms={"a"}))
        newer = PolicyEntry(
            name="Simply Black",
            category="Food",
            list_kind=ListKind.WHITELIST,
            synonyms=frozenset({"b"}),
            provenance=Provenance(Source.HITL, reviewer="hana"),
        )
        merged = store.upsert_entry(newer)
        assert merged.synonyms == frozenset({"a", "b"})
        assert merged.provenance.source is Source.HITL

    def test_same_key_on_other_list_untouched(self, store):
        store.upsert_entry(white("gold ring", category="Food"))
        assert store.entries[(ListKind.BLACKLIST, "gold ring")].reason is not None

    def test_self_synonym_dropped_at_construction(self):
        entry = white("Simply Black", synonyms={"SIMPLY BLACK", "other"})
        assert entry.synonyms == frozenset({"other"})

    def test_whitelist_requires_category(self):
        with pytest.raises(ValueError):
            PolicyEntry(name="x", category=None, list_kind=ListKind.WHITELIST)


class TestAccounts:
    def test_seeded_account(self, store):
        account = store.account_policy("53410198")
        assert account.name == "Organizational Activation Cost"
        assert "Food" in account.allowed_categories
        assert account.routine

    def test_unknown_code_absent(self, store):
        assert store.account_policy("000") is None

    def test_read_your_write(self, store):
        store.upsert_account(AccountPolicy("999", "Misc", frozenset({"consumables"}), False))
        assert store.account_policy("999").allowed_categories == frozenset({"consumables"})


class TestPersistence:
    def test_round_trip_structural_equality(self, store, tmp_path):
        store.upsert_entry(white("Simply Black", synonyms={"Simply Smooth Black"}))
        path = tmp_path / "s.policy.json"
        save_store(store, str(path))
        loaded = load_store(str(path))
        assert loaded.snapshot() == store.snapshot()
        assert loaded.version == store.version

    def test_atomic_write_leaves_no_temp_files(self, store, tmp_path):
        path = tmp_path / "s.policy.json"
        save_store(store, str(path))
        assert [p.name for p in tmp_path.iterdir()] == ["s.policy.json"]

    def test_duplicate_normalized_keys_rejected(self, store, tmp_path):
        data = store.snapshot()
        data["entries"].append(
            {
                "name": "SIMPLY  SMOOTH  BLACK",
                "normalized_key": "simply smooth black",
                "category": "Food",
                "list": "whitelist",
                "synonyms": [],
                "provenance": {"source": "seed", "reviewer": None, "timestamp": "2025-05-27T00:00:00+00:00"},
                "reason": None,
            }
        )
        path = tmp_path / "dup.policy.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(StoreCorrupt):
            load_store(str(path))

    def test_seed_fixture_contents(self):
        store = seed_store()
        assert store.version == 1
        assert len(store.accounts) >= 1
        assert len(store.entries_on(ListKind.WHITELIST)) >= 1
        assert len(store.entries_on(ListKind.BLACKLIST)) >= 1

    def test_missing_file_is_io_failure(self, tmp_path):
        with pytest.raises(IoFailure):
            load_store(str(tmp_path / "nope.policy.json"))

    def test_invalid_json_is_corrupt(self, tmp_path):
        path = tmp_path / "bad.policy.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(StoreCorrupt):
            load_store(str(path))

    def test_schema_violation_is_corrupt(self, tmp_path):
        path = tmp_path / "bad.policy.json"
        path.write_text(json.dumps({"version": 1, "accounts": [], "entries": [{"name": "x"}]}))
        with pytest.raises(StoreCorrupt):
            load_store(str(path))
