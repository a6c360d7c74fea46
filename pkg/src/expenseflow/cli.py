"""Command-line driver.

All informational output is JSON on stdout (one document per command); a
domain error prints one JSON line {code, message} on stderr and exits 1;
argparse usage errors exit 2.
"""

import argparse
import json
import os
import sys

from .api import create_app, task_detail_payload
from .config import Config, load_config
from .errors import ExpenseFlowError, InvalidSpec, IoFailure
from .evaluation import (
    CorpusSpec,
    build_confusion,
    compute_metrics,
    generate_corpus,
    outcomes_from_exports,
    read_labels,
    write_corpus,
)
from .hitl import DecisionAction, ItemResolution, ReviewDecision, TaskState
from .classify import VerdictStatus
from .pipeline import Engine, ExpenseSubmission
from .policy import ListKind, PolicyEntry, Provenance, Source, normalize_name
from .receipt import ReceiptDocument


def _emit(payload) -> None:
    print(json.dumps(payload, ensure_ascii=False, indent=2))


def _engine(config: Config) -> Engine:
    return Engine(config)


def _load_report_arg(raw: str) -> dict:
    """Accept inline JSON, @path, or a plain path to a JSON file."""
    if raw.startswith("@"):
        path = raw[1:]
    elif not raw.lstrip().startswith("{") and os.path.exists(raw):
        path = raw
    else:
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"--report is neither a file nor valid JSON: {exc}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read report file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"report file {path} is not valid JSON: {exc}")


def _submission_from_payload(payload: dict) -> ExpenseSubmission:
    for key in ("report_id", "user", "account_code", "declared_total"):
        if key not in payload:
            raise InvalidSpec(f"submission is missing {key!r}")
    if "receipt_path" in payload:
        path = payload["receipt_path"]
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise IoFailure(f"cannot read receipt {path}: {exc}") from exc
        receipt = ReceiptDocument(source_id=os.path.basename(path), raw_text=text)
    elif "receipt_text" in payload:
        receipt = ReceiptDocument(
            source_id=payload["report_id"], raw_text=payload["receipt_text"]
        )
    else:
        raise InvalidSpec("submission needs receipt_text or receipt_path")
    return ExpenseSubmission(
        report_id=payload["report_id"],
        user=payload["user"],
        account_code=payload["account_code"],
        description=payload.get("description", ""),
        declared_total=int(payload["declared_total"]),
        receipt=receipt,
    )


def cmd_serve(args, config: Config) -> int:
    import uvicorn

    host, _, port = config.listen.partition(":")
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8732), log_level="info")
    return 0


def cmd_submit(args, config: Config) -> int:
    submission = _submission_from_payload(_load_report_arg(args.report))
    engine = _engine(config)
    engine.submit(submission)
    state = engine.run_to_completion(submission.report_id)
    report = engine.get_report(submission.report_id)
    _emit(
        {
            "report_id": submission.report_id,
            "state": state.value,
            "task_id": report.task_id,
        }
    )
    return 0


def cmd_advance(args, config: Config) -> int:
    engine = _engine(config)
    if args.all:
        state = engine.run_to_completion(args.report_id)
    else:
        state = engine.advance(args.report_id)
    _emit({"report_id": args.report_id, "state": state.value})
    return 0


def cmd_tasks_list(args, config: Config) -> int:
    engine = _engine(config)
    state = TaskState(args.state.capitalize()) if args.state else None
    tasks = engine.queue.list_tasks(state=state)
    _emit(
        [
            {
                "task_id": t.task_id,
                "report_id": t.report_id,
                "created_at": t.created_at.isoformat(),
                "state": t.state.value,
                "item_count": len(t.items),
            }
            for t in tasks
        ]
    )
    return 0


def cmd_tasks_show(args, config: Config) -> int:
    engine = _engine(config)
    _emit(task_detail_payload(engine, args.task_id))
    return 0


def cmd_tasks_decide(args, config: Config) -> int:
    engine = _engine(config)
    task = engine.queue.get(args.task_id)
    if args.approve:
        resolutions = []
        for ti in task.items:
            if ti.verdict.status is not VerdictStatus.UNKNOWN:
                continue
            synonyms: frozenset[str] = frozenset()
            if args.save_synonyms and ti.recommendation and ti.recommendation.matched_similar:
                synonyms = frozenset({ti.recommendation.matched_similar})
            resolutions.append(
                ItemResolution(
                    original_name=ti.item.name,
                    category=args.category,
                    save_synonyms=bool(synonyms),
                    synonyms=synonyms,
                )
            )
        decision = ReviewDecision(
            action=DecisionAction.APPROVE,
            reviewer=args.reviewer,
            comment=args.comment,
            item_resolutions=tuple(resolutions),
        )
    else:
        decision = ReviewDecision(
            action=DecisionAction.REJECT, reviewer=args.reviewer, comment=args.comment
        )
    task, report = engine.decide(args.task_id, decision)
    _emit(
        {
            "task_id": task.task_id,
            "report_id": report.submission.report_id,
            "final_state": report.state.value,
            "verdict": report.final.verdict.value,
        }
    )
    return 0


def cmd_policy_list(args, config: Config) -> int:
    _emit(_engine(config).store.snapshot())
    return 0


def cmd_policy_add(args, config: Config) -> int:
    engine = _engine(config)
    entry = PolicyEntry(
        name=args.name,
        category=args.category,
        list_kind=ListKind(args.list),
        synonyms=frozenset(args.synonym or []),
        provenance=Provenance(Source.MANUAL, reviewer=args.reviewer),
        reason=args.reason,
    )
    engine.upsert_policy_entry(entry)
    _emit({"version": engine.store.version, "normalized_key": entry.normalized_key})
    return 0


def cmd_policy_add_synonym(args, config: Config) -> int:
    engine = _engine(config)
    kind = ListKind(args.list)
    key = normalize_name(args.name)
    existing = engine.store.entries.get((kind, key))
    if existing is None:
        raise InvalidSpec(f"no {kind.value} entry named {args.name!r}")
    entry = PolicyEntry(
        name=existing.name,
        category=existing.category,
        list_kind=kind,
        synonyms=existing.synonyms | {args.synonym},
        provenance=Provenance(Source.MANUAL, reviewer=args.reviewer),
        reason=existing.reason,
    )
    engine.upsert_policy_entry(entry)
    _emit({"version": engine.store.version, "normalized_key": key})
    return 0


def cmd_gen_corpus(args, config: Config) -> int:
    spec = CorpusSpec(
        count=args.count,
        fraction_whitelisted=args.fraction_whitelisted,
        fraction_blacklisted=args.fraction_blacklisted,
        fraction_unknown=args.fraction_unknown,
        fraction_defective=args.fraction_defective,
        seed=args.seed,
    )
    cases = generate_corpus(spec)
    os.makedirs(args.out, exist_ok=True)
    write_corpus(cases, args.out)
    by_class: dict[str, int] = {}
    for case in cases:
        by_class[case.label_class] = by_class.get(case.label_class, 0) + 1
    _emit(
        {
            "out": args.out,
            "count": len(cases),
            "labels": os.path.join(args.out, "labels.csv"),
            "by_class": by_class,
        }
    )
    return 0


def cmd_metrics(args, config: Config) -> int:
    labels_path = args.labels or config.labels_path
    if not labels_path:
        raise InvalidSpec("metrics needs --labels <csv> (or labels_path in config)")
    engine = _engine(config)
    outcomes = outcomes_from_exports(read_labels(labels_path), engine.exports.records)
    _emit(compute_metrics(build_confusion(outcomes)).to_dict())
    return 0


_CONFIG_FLAGS = {
    "store": "store_path",
    "event_log": "event_log_path",
    "export_sink": "export_sink_path",
    "notification_log": "notification_log_path",
    "listen": "listen",
    "confidence_threshold": "confidence_threshold",
    "tau_white": "tau_white",
    "tau_black": "tau_black",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expenseflow")
    parser.add_argument("--config", help="config file (else $EXPFLOW_CONFIG, else ./expenseflow.json)")
    parser.add_argument("--store", help="policy store path")
    parser.add_argument("--event-log", dest="event_log", help="audit event log path")
    parser.add_argument("--export-sink", dest="export_sink", help="export sink path")
    parser.add_argument(
        "--notification-log", dest="notification_log", help="notification log path"
    )
    parser.add_argument("--listen", help="host:port for serve")
    parser.add_argument("--confidence-threshold", dest="confidence_threshold", type=int)
    parser.add_argument("--tau-white", dest="tau_white", type=float)
    parser.add_argument("--tau-black", dest="tau_black", type=float)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("serve", help="run the HTTP API").set_defaults(func=cmd_serve)

    p = sub.add_parser("submit", help="submit an expense report")
    p.add_argument("--report", required=True, help="submission JSON (inline, @file, or path)")
    p.set_defaults(func=cmd_submit)

    p = sub.add_parser("advance", help="advance a report one transition")
    p.add_argument("report_id")
    p.add_argument("--all", action="store_true", help="run to exported or pending review")
    p.set_defaults(func=cmd_advance)

    tasks = sub.add_parser("tasks", help="review task queue")
    tsub = tasks.add_subparsers(dest="tasks_command", required=True)
    p = tsub.add_parser("list")
    p.add_argument("--state", choices=["pending", "decided"])
    p.set_defaults(func=cmd_tasks_list)
    p = tsub.add_parser("show")
    p.add_argument("task_id")
    p.set_defaults(func=cmd_tasks_show)
    p = tsub.add_parser("decide")
    p.add_argument("task_id")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--approve", action="store_true")
    mode.add_argument("--reject", action="store_true")
    p.add_argument("--category", help="category for every unknown item (approve)")
    p.add_argument("--save-synonyms", dest="save_synonyms", action="store_true")
    p.add_argument("--comment")
    p.add_argument("--reviewer", default="cli")
    p.set_defaults(func=cmd_tasks_decide)

    policy = sub.add_parser("policy", help="policy store administration")
    psub = policy.add_subparsers(dest="policy_command", required=True)
    psub.add_parser("list").set_defaults(func=cmd_policy_list)
    p = psub.add_parser("add")
    p.add_argument("--list", required=True, choices=["whitelist", "blacklist"])
    p.add_argument("--name", required=True)
    p.add_argument("--category")
    p.add_argument("--reason")
    p.add_argument("--synonym", action="append")
    p.add_argument("--reviewer", default="cli")
    p.set_defaults(func=cmd_policy_add)
    p = psub.add_parser("add-synonym")
    p.add_argument("--list", default="whitelist", choices=["whitelist", "blacklist"])
    p.add_argument("--name", required=True)
    p.add_argument("--synonym", required=True)
    p.add_argument("--reviewer", default="cli")
    p.set_defaults(func=cmd_policy_add_synonym)

    p = sub.add_parser("gen-corpus", help="generate a labeled synthetic corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--fraction-whitelisted", type=float, default=0.7)
    p.add_argument("--fraction-blacklisted", type=float, default=0.1)
    p.add_argument("--fraction-unknown", type=float, default=0.1)
    p.add_argument("--fraction-defective", type=float, default=0.1)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("metrics", help="confusion-matrix metrics over exports")
    p.add_argument("--labels", help="labels CSV (report_id,ground_truth)")
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "tasks" and getattr(args, "tasks_command", "") == "decide":
        if args.approve and not args.category:
            build_parser().error("--approve requires --category")
    try:
        overrides = {
            field: getattr(args, flag)
            for flag, field in _CONFIG_FLAGS.items()
            if getattr(args, flag, None) is not None
        }
        config = load_config(args.config, overrides=overrides)
        return args.func(args, config)
    except ExpenseFlowError as exc:
        print(
            json.dumps({"code": exc.code, "message": exc.message}, ensure_ascii=False),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
