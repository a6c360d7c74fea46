import json
import subprocess
import sys

import pytest

from expenseflow.cli import main
from expenseflow.evaluation import read_labels

from conftest import receipt_text


@pytest.fixture
def workdir(tmp_path):
    config = {
        "store_path": str(tmp_path / "store.policy.json"),
        "event_log_path": str(tmp_path / "events.jsonl"),
        "export_sink_path": str(tmp_path / "exports.jsonl"),
        "notification_log_path": str(tmp_path / "notes.jsonl"),
    }
    config_path = tmp_path / "expenseflow.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    return tmp_path, str(config_path)


def run(config_path, *argv, capsys=None):
    code = main(["--config", config_path, *argv])
    out, err = capsys.readouterr()
    return code, out, err


def submission_payload(report_id, text, declared=None):
    if declared is None:
        declared = int(
            next(l for l in text.splitlines() if l.startswith("total=")).split("=")[1]
        )
    return {
        "report_id": report_id,
        "user": "hana",
        "account_code": "53410198",
        "description": "snacks",
        "declared_total": declared,
        "receipt_text": text,
    }


class TestSubmitAndAdvance:
    def test_whitelisted_submit_runs_to_exported(self, workdir, capsys):
        _, config = workdir
        text = receipt_text(items=[("Chocolate chip cookie", 3, 3000, 9000)], total=9000)
        code, out, _ = run(
            config, "submit", "--report", json.dumps(submission_payload("R1", text)),
            capsys=capsys,
        )
        assert code == 0
        assert json.loads(out) == {"report_id": "R1", "state": "Exported", "task_id": None}

    def test_submit_from_file_and_single_step_advance(self, workdir, capsys):
        tmp_path, config = workdir
        text = receipt_text(items=[("Chocolate chip cookie", 3, 3000, 9000)], total=9000)
        payload_path = tmp_path / "r2.json"
        payload = submission_payload("R2", text)
        # drive manually: advance one transition at a time
        code, out, _ = run(config, "submit", "--report", json.dumps(payload), capsys=capsys)
        assert code == 0

        path_payload = dict(payload, report_id="R3")
        payload_path.write_text(json.dumps(path_payload), encoding="utf-8")
        code, out, _ = run(config, "submit", "--report", f"@{payload_path}", capsys=capsys)
        assert code == 0
        assert json.loads(out)["report_id"] == "R3"

    def test_receipt_path_mode_missing_file_is_io_failure(self, workdir, capsys):
        tmp_path, config = workdir
        payload = {
            "report_id": "R1",
            "user": "hana",
            "account_code": "53410198",
            "declared_total": 9000,
            "receipt_path": str(tmp_path / "missing.rcpt"),
        }
        code, out, err = run(config, "submit", "--report", json.dumps(payload), capsys=capsys)
        assert code == 1
        assert json.loads(err)["code"] == "io_failure"
        # nothing was persisted
        code, out, _ = run(config, "tasks", "list", capsys=capsys)
        assert json.loads(out) == []

    def test_receipt_path_mode_reads_file(self, workdir, capsys):
        tmp_path, config = workdir
        rcpt = tmp_path / "r.rcpt"
        rcpt.write_text(
            receipt_text(items=[("Chocolate chip cookie", 3, 3000, 9000)], total=9000),
            encoding="utf-8",
        )
        payload = {
            "report_id": "R1",
            "user": "hana",
            "account_code": "53410198",
            "declared_total": 9000,
            "receipt_path": str(rcpt),
        }
        code, out, _ = run(config, "submit", "--report", json.dumps(payload), capsys=capsys)
        assert code == 0
        assert json.loads(out)["state"] == "Exported"

    def test_advance_all_on_unknown_report(self, workdir, capsys):
        _, config = workdir
        code, _, err = run(config, "advance", "NOPE", "--all", capsys=capsys)
        assert code == 1
        assert json.loads(err)["code"] == "report_not_found"


class TestTasksFlow:
    def seed_pending(self, config, capsys):
        text = receipt_text(items=[("Simply Black", 2, 1500, 3000)], total=3000)
        code, out, _ = run(
            config, "submit", "--report", json.dumps(submission_payload("R1", text)),
            capsys=capsys,
        )
        assert code == 0
        assert json.loads(out)["state"] == "PendingReview"
        return json.loads(out)["task_id"]

    def test_decide_approve_with_synonyms(self, workdir, capsys):
        _, config = workdir
        task_id = self.seed_pending(config, capsys)

        code, out, _ = run(config, "tasks", "list", "--state", "pending", capsys=capsys)
        assert [t["task_id"] for t in json.loads(out)] == [task_id]

        code, out, _ = run(config, "tasks", "show", task_id, capsys=capsys)
        detail = json.loads(out)
        assert detail["items"][0]["recommendation"]["matched_similar"] == "Simply Smooth Black"

        code, out, _ = run(
            config, "tasks", "decide", task_id,
            "--approve", "--category", "Food", "--save-synonyms",
            capsys=capsys,
        )
        assert code == 0
        result = json.loads(out)
        assert result["verdict"] == "Approve"
        assert result["final_state"] == "Exported"

        code, out, _ = run(config, "policy", "list", capsys=capsys)
        snapshot = json.loads(out)
        entry = next(e for e in snapshot["entries"] if e["normalized_key"] == "simply black")
        assert entry["synonyms"] == ["Simply Smooth Black"]
        assert entry["provenance"]["source"] == "hitl"

    def test_decide_unknown_task_exit_one(self, workdir, capsys):
        _, config = workdir
        code, _, err = run(config, "tasks", "decide", "NOPE", "--reject", capsys=capsys)
        assert code == 1
        assert json.loads(err)["code"] == "task_not_found"

    def test_decide_reject_with_comment(self, workdir, capsys):
        _, config = workdir
        task_id = self.seed_pending(config, capsys)
        code, out, _ = run(
            config, "tasks", "decide", task_id, "--reject", "--comment", "personal",
            capsys=capsys,
        )
        assert code == 0
        assert json.loads(out)["verdict"] == "Reject"


class TestPolicyCommands:
    def test_add_and_add_synonym(self, workdir, capsys):
        _, config = workdir
        code, out, _ = run(
            config, "policy", "add", "--list", "whitelist", "--name", "Paper cups",
            "--category", "consumables", capsys=capsys,
        )
        assert code == 0
        code, out, _ = run(
            config, "policy", "add-synonym", "--name", "Paper cups",
            "--synonym", "paper cup set", capsys=capsys,
        )
        assert code == 0
        code, out, _ = run(config, "policy", "list", capsys=capsys)
        entry = next(
            e for e in json.loads(out)["entries"] if e["normalized_key"] == "paper cups"
        )
        assert entry["synonyms"] == ["paper cup set"]

    def test_add_synonym_to_missing_entry_fails(self, workdir, capsys):
        _, config = workdir
        code, _, err = run(
            config, "policy", "add-synonym", "--name", "ghost", "--synonym", "x",
            capsys=capsys,
        )
        assert code == 1
        assert json.loads(err)["code"] == "invalid_spec"


class TestCorpusAndMetrics:
    def test_gen_corpus_writes_deterministic_fixture(self, workdir, capsys):
        tmp_path, config = workdir
        out_dir = tmp_path / "corpus"
        code, out, _ = run(
            config, "gen-corpus", "--count", "50", "--seed", "7", "--out", str(out_dir),
            capsys=capsys,
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["count"] == 50
        assert sum(summary["by_class"].values()) == 50
        labels_first = (out_dir / "labels.csv").read_bytes()
        corpus_first = (out_dir / "corpus.json").read_bytes()

        out_dir2 = tmp_path / "corpus2"
        run(config, "gen-corpus", "--count", "50", "--seed", "7", "--out", str(out_dir2), capsys=capsys)
        assert (out_dir2 / "labels.csv").read_bytes() == labels_first
        assert (out_dir2 / "corpus.json").read_bytes() == corpus_first
        assert len(read_labels(str(out_dir / "labels.csv"))) == 50

    def test_metrics_on_pilot_shaped_fixture(self, workdir, capsys):
        tmp_path, config = workdir
        # fabricate an export sink and labels shaped like the reported pilot counts
        sink = tmp_path / "exports.jsonl"
        labels = tmp_path / "labels.csv"
        rows = ["report_id,ground_truth"]
        with open(sink, "w", encoding="utf-8") as fh:
            seq = 0
            for truth, system, n in (
                ("approve", "Approve", 1073),
                ("reject", "Reject", 133),
                ("approve", "Reject", 242),
            ):
                for i in range(n):
                    seq += 1
                    rid = f"{truth}-{system}-{i}"
                    rows.append(f"{rid},{truth}")
                    record = {
                        "final": {
                            "report_id": rid,
                            "verdict": system,
                            "reasons": ["x"] if system == "Reject" else [],
                            "decided_by": {"kind": "system", "name": None},
                            "item_results": [],
                            "reason_class": "Policy" if system == "Reject" else None,
                        },
                        "exported_at": "2025-06-01T00:00:00+00:00",
                        "sequence": seq,
                    }
                    fh.write(json.dumps(record) + "\n")
        labels.write_text("\n".join(rows) + "\n", encoding="utf-8")

        code, out, _ = run(config, "metrics", "--labels", str(labels), capsys=capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["matrix"] == {"tp": 1073, "tn": 133, "fp": 0, "fn": 242}
        assert payload["accuracy"] == pytest.approx(0.8329, abs=5e-4)
        assert payload["precision"] == 1.0
        assert payload["recall"] == pytest.approx(0.8160, abs=5e-4)
        assert payload["f1"] == pytest.approx(0.8986, abs=5e-4)

    def test_metrics_without_labels(self, workdir, capsys):
        _, config = workdir
        code, _, err = run(config, "metrics", capsys=capsys)
        assert code == 1
        assert json.loads(err)["code"] == "invalid_spec"


class TestProcessContract:
    def test_usage_error_exits_two(self):
        result = subprocess.run(
            [sys.executable, "-m", "expenseflow.cli", "bogus-command"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 2

    def test_entry_point_domain_error_exits_one(self, workdir):
        _, config = workdir
        result = subprocess.run(
            [sys.executable, "-m", "expenseflow.cli", "--config", config, "advance", "X"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 1
        assert json.loads(result.stderr)["code"] == "report_not_found"

    def test_approve_requires_category(self, workdir):
        _, config = workdir
        result = subprocess.run(
            [
                sys.executable, "-m", "expenseflow.cli", "--config", config,
                "tasks", "decide", "T1", "--approve",
            ],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 2
