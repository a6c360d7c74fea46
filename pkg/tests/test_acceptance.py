"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to stream the lines.
"""

import functools
import subprocess
import sys
import time
from pathlib import Path

import pytest

from expenseflow.cli import main as cli_main
from expenseflow.evaluation import (
    ConfusionMatrix,
    build_confusion,
    compute_metrics,
    outcomes_from_exports,
    read_corpus,
    read_labels,
    run_corpus,
)
from expenseflow.config import Config
from expenseflow.pipeline import Engine, PipelineState, Verdict, ReasonClass
from expenseflow.hitl import DecisionAction, ItemResolution, ReviewDecision

from conftest import memory_config, receipt_text, submission

TESTS_DIR = Path(__file__).parent


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\nFAIL  {name}")
                raise
            print(f"\nPASS  {name}")

        return run

    return wrap


@criterion("metrics reproduction (tables 4-5)")
def test_metrics_reproduction():
    report = compute_metrics(ConfusionMatrix(tp=1073, tn=133, fp=0, fn=242))
    assert report.accuracy.value == pytest.approx(0.8329, abs=5e-4)
    assert report.precision.value == 1.0
    assert report.recall.value == pytest.approx(0.8160, abs=5e-4)
    assert report.f1.value == pytest.approx(0.8986, abs=5e-4)
    rounded = [round(m.value, 2) for m in (report.accuracy, report.precision, report.recall, report.f1)]
    assert rounded == [0.83, 1.0, 0.82, 0.90]


@criterion("virtuous cycle: escalate, learn, auto-approve (< 1 s)")
def test_virtuous_cycle():
    started = time.perf_counter()
    engine = Engine(memory_config())
    try:
        text = receipt_text(items=[("Simply Black", 2, 1500, 3000)], total=3000)
        engine.submit(submission("VC-1", text))
        state = engine.run_to_completion("VC-1")
        assert state is PipelineState.PENDING_REVIEW
        task = engine.queue.get(engine.get_report("VC-1").task_id)
        recommendation = task.items[0].recommendation
        assert recommendation.matched_similar == "Simply Smooth Black"

        version_before = engine.store.version
        engine.decide(
            task.task_id,
            ReviewDecision(
                action=DecisionAction.APPROVE,
                reviewer="hana",
                item_resolutions=(
                    ItemResolution(
                        "Simply Black",
                        "Food",
                        save_synonyms=True,
                        synonyms=frozenset({recommendation.matched_similar}),
                    ),
                ),
            ),
        )
        assert engine.store.version > version_before
        assert engine.store.lookup("Simply Black") is not None

        tasks_before = len(engine.queue.tasks)
        engine.submit(submission("VC-2", text))
        assert engine.run_to_completion("VC-2") is PipelineState.EXPORTED
        assert engine.get_report("VC-2").final.verdict is Verdict.APPROVE
        assert len(engine.queue.tasks) == tasks_before
    finally:
        engine.close()
    assert time.perf_counter() - started < 1.0


@criterion("confidence-gate boundary at 49/50")
def test_confidence_gate_boundary():
    engine = Engine(memory_config())
    try:
        low = receipt_text(
            items=[("Chocolate chip cookie", 1, 9000, 9000)], conf_lines=["conf total=49"]
        )
        engine.submit(submission("CG-49", low))
        assert engine.run_to_completion("CG-49") is PipelineState.EXPORTED
        final = engine.get_report("CG-49").final
        assert final.verdict is Verdict.REJECT
        assert final.reasons == ("defective receipt",)
        defect_notes = [
            n for n in engine.notifications.records if n["kind"] == "DefectiveReceipt"
        ]
        assert len(defect_notes) == 1
        assert "total" in defect_notes[0]["payload"]

        high = receipt_text(
            items=[("Chocolate chip cookie", 1, 9000, 9000)], conf_lines=["conf total=50"]
        )
        engine.submit(submission("CG-50", high))
        states = [engine.advance("CG-50"), engine.advance("CG-50")]
        assert states == [PipelineState.EXTRACTED, PipelineState.CLASSIFIED]
        assert len(
            [n for n in engine.notifications.records if n["kind"] == "DefectiveReceipt"]
        ) == 1
    finally:
        engine.close()


@criterion("blacklist rejection names the entry, class Policy")
def test_blacklist_rejection():
    engine = Engine(memory_config())
    try:
        text = receipt_text(items=[("gift certificate", 1, 50000, 50000)], total=50000)
        engine.submit(submission("BL-1", text))
        assert engine.run_to_completion("BL-1") is PipelineState.EXPORTED
        final = engine.get_report("BL-1").final
        assert final.verdict is Verdict.REJECT
        assert any("gift certificate" in reason for reason in final.reasons)
        assert final.reason_class is ReasonClass.POLICY
    finally:
        engine.close()


@criterion("property suite: >= 1000 generated cases, < 60 s")
def test_property_suite_budget_and_green():
    import test_properties

    budget = 0
    for name in dir(test_properties):
        fn = getattr(test_properties, name)
        settings = getattr(fn, "_hypothesis_internal_use_settings", None)
        if name.startswith("test_") and settings is not None:
            budget += settings.max_examples
    assert budget >= 1000, f"configured hypothesis budget is only {budget}"

    started = time.perf_counter()
    result = subprocess.run(
        [sys.executable, "-m", "pytest", str(TESTS_DIR / "test_properties.py"), "-q"],
        capture_output=True,
        text=True,
        cwd=str(TESTS_DIR.parent),
    )
    elapsed = time.perf_counter() - started
    assert result.returncode == 0, result.stdout + result.stderr
    assert elapsed < 60.0, f"property suite took {elapsed:.1f}s"


@criterion("desk-scale corpus: 1448 receipts, fp == 0, < 60 s")
def test_desk_scale_corpus_run(tmp_path):
    started = time.perf_counter()
    out_dir = tmp_path / "corpus"
    code = cli_main(
        [
            "--store", str(tmp_path / "store.policy.json"),
            "--event-log", str(tmp_path / "events.jsonl"),
            "--export-sink", str(tmp_path / "exports.jsonl"),
            "--notification-log", str(tmp_path / "notes.jsonl"),
            "gen-corpus", "--count", "1448", "--seed", "7", "--out", str(out_dir),
        ]
    )
    assert code == 0
    cases = read_corpus(str(out_dir))
    assert len(cases) == 1448

    config = Config(
        store_path=str(tmp_path / "store.policy.json"),
        event_log_path=str(tmp_path / "events.jsonl"),
        export_sink_path=str(tmp_path / "exports.jsonl"),
        notification_log_path=str(tmp_path / "notes.jsonl"),
    )
    engine = Engine(config)
    try:
        run_corpus(engine, cases)  # stub advisor + auto-reviewer oracle
        labels = read_labels(str(out_dir / "labels.csv"))
        outcomes = outcomes_from_exports(labels, engine.exports.records)
        matrix = build_confusion(outcomes)
        assert matrix.fp == 0
        assert matrix.total == 1448
    finally:
        engine.close()
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"corpus run took {elapsed:.1f}s"
