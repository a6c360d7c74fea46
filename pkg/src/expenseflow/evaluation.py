"""Confusion-matrix evaluation and synthetic labeled corpora.

The positive class is approval: tp counts reports both the ground truth and
the system approve. Metrics with a zero denominator are Absent with a reason,
never a fabricated number.
"""

import csv
import json
import os
import random
from dataclasses import dataclass

from .errors import DuplicateReportId, InvalidLabels, InvalidSpec
from .pipeline import (
    Engine,
    ExpenseSubmission,
    PipelineState,
    ReasonClass,
    Verdict,
    submission_from_dict,
    submission_to_dict,
)
from .hitl import DecisionAction, ItemResolution, ReviewDecision
from .policy import ListKind, PolicyStore, normalize_name, seed_store
from .receipt import ReceiptDocument


@dataclass(frozen=True)
class LabeledOutcome:
    report_id: str
    ground_truth: Verdict
    system_verdict: Verdict
    rejection_reason_class: ReasonClass | None = None

    def __post_init__(self):
        if (self.system_verdict is Verdict.REJECT) != (
            self.rejection_reason_class is not None
        ):
            raise ValueError("reason class present iff the system rejected")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metric:
    """A ratio in [0, 1], or Absent with the zero-denominator reason."""

    value: float | None = None
    reason: str | None = None

    def __post_init__(self):
        if (self.value is None) == (self.reason is None):
            raise ValueError("exactly one of value and reason must be set")

    @property
    def defined(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class MetricsReport:
    matrix: ConfusionMatrix
    accuracy: Metric
    precision: Metric
    recall: Metric
    f1: Metric

    def to_dict(self) -> dict:
        out: dict = {
            "matrix": {
                "tp": self.matrix.tp,
                "tn": self.matrix.tn,
                "fp": self.matrix.fp,
                "fn": self.matrix.fn,
            }
        }
        for name in ("accuracy", "precision", "recall", "f1"):
            metric: Metric = getattr(self, name)
            out[name] = metric.value
            if metric.reason is not None:
                out[f"{name}_reason"] = metric.reason
        return out


def build_confusion(outcomes: list[LabeledOutcome]) -> ConfusionMatrix:
    """Count verdict agreement, approval as the positive class."""
    seen = set()
    tp = tn = fp = fn = 0
    for o in outcomes:
        if o.report_id in seen:
            raise DuplicateReportId(f"report {o.report_id!r} labeled twice")
        seen.add(o.report_id)
        if o.ground_truth is Verdict.APPROVE:
            if o.system_verdict is Verdict.APPROVE:
                tp += 1
            else:
                fn += 1
        else:
            if o.system_verdict is Verdict.APPROVE:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)


def _ratio(numerator: int, denominator: int, what: str) -> Metric:
    if denominator == 0:
        return Metric(reason=f"zero denominator ({what})")
    return Metric(value=numerator / denominator)


def compute_metrics(m: ConfusionMatrix) -> MetricsReport:
    accuracy = _ratio(m.tn + m.tp, m.total, "no labeled outcomes")
    precision = _ratio(m.tp, m.tp + m.fp, "tp+fp is 0")
    recall = _ratio(m.tp, m.tp + m.fn, "tp+fn is 0")
    if precision.defined and recall.defined and (precision.value + recall.value) > 0:
        f1 = Metric(
            value=2 * precision.value * recall.value / (precision.value + recall.value)
        )
    else:
        f1 = Metric(reason="precision+recall is 0 or undefined")
    return MetricsReport(
        matrix=m, accuracy=accuracy, precision=precision, recall=recall, f1=f1
    )


# -- labels file ------------------------------------------------------------

LABELS_HEADER = ["report_id", "ground_truth"]


def write_labels(rows: list[tuple[str, Verdict]], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABELS_HEADER)
        for report_id, verdict in rows:
            writer.writerow([report_id, verdict.value.lower()])


def read_labels(path: str) -> dict[str, Verdict]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != LABELS_HEADER:
                raise InvalidLabels(f"labels file must start with {','.join(LABELS_HEADER)}")
            labels: dict[str, Verdict] = {}
            for row in reader:
                if not row:
                    continue
                if len(row) != 2:
                    raise InvalidLabels(f"bad labels row: {row!r}")
                report_id, raw = row[0], row[1].strip().lower()
                if raw == "approve":
                    verdict = Verdict.APPROVE
                elif raw == "reject":
                    verdict = Verdict.REJECT
                else:
                    raise InvalidLabels(f"ground truth must be approve|reject, got {raw!r}")
                if report_id in labels:
                    raise InvalidLabels(f"report {report_id!r} labeled twice")
                labels[report_id] = verdict
            return labels
    except OSError as exc:
        raise InvalidLabels(f"cannot read labels {path}: {exc}") from exc


def outcomes_from_exports(
    labels: dict[str, Verdict], export_records: list[dict]
) -> list[LabeledOutcome]:
    """Join ground-truth labels with the export sink, strictly: every labeled
    report must have been exported."""
    by_report = {}
    for record in export_records:
        final = record["final"]
        by_report[final["report_id"]] = final
    missing = sorted(set(labels) - set(by_report))
    if missing:
        raise InvalidLabels(
            f"{len(missing)} labeled report(s) missing from the export sink, "
            f"e.g. {missing[:3]}"
        )
    outcomes = []
    for report_id, truth in labels.items():
        final = by_report[report_id]
        verdict = Verdict(final["verdict"])
        reason_class = (
            ReasonClass(final["reason_class"]) if final.get("reason_class") else None
        )
        outcomes.append(LabeledOutcome(report_id, truth, verdict, reason_class))
    return outcomes


# -- synthetic corpus --------------------------------------------------------

@dataclass(frozen=True)
class CorpusSpec:
    count: int
    fraction_whitelisted: float = 0.7
    fraction_blacklisted: float = 0.1
    fraction_unknown: float = 0.1
    fraction_defective: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise InvalidSpec("count must be >= 1")
        fractions = (
            self.fraction_whitelisted,
            self.fraction_blacklisted,
            self.fraction_unknown,
            self.fraction_defective,
        )
        for f in fractions:
            if not 0.0 <= f <= 1.0:
                raise InvalidSpec(f"fraction {f} outside [0, 1]")
        if sum(fractions) > 1.0 + 1e-9:
            raise InvalidSpec("fractions must sum to at most 1")


@dataclass(frozen=True)
class CorpusCase:
    submission: ExpenseSubmission
    ground_truth: Verdict
    label_class: str  # whitelisted | blacklisted | unknown | defective
    resolutions: tuple[tuple[str, str], ...] = ()  # (item name, category) for the oracle


_MERCHANTS = (
    "팝스토어잠실향군타워점",
    "Grand Mart Seocho",
    "Café Miro",
    "Office Plaza 21",
    "Jamsil Snack Corner",
)


def _receipt_text(
    rng: random.Random, items: list[tuple[str, int, int]], conf_line: str | None = None
) -> tuple[str, int]:
    """Render a consistent canonical receipt; returns (text, total)."""
    total = sum(qty * price for _, qty, price in items)
    supply = round(total / 1.1)
    tax = total - supply
    day = rng.randint(1, 28)
    lines = [
        "%RECEIPT 1",
        f"merchant={rng.choice(_MERCHANTS)}",
        f"biz_no={rng.randint(100, 999)}-{rng.randint(10, 99)}-{rng.randint(10000, 99999)}",
        f"date=2025-03-{day:02d}",
        f"approval_no={rng.randint(10_000_000, 99_999_999)}",
        f"supply={supply}",
        f"tax={tax}",
        f"total={total}",
    ]
    for name, qty, price in items:
        lines.append(f"item={name}|{qty}|{price}|{qty * price}")
    if conf_line:
        lines.append(conf_line)
    return "\n".join(lines) + "\n", total


def _mutate_name(rng: random.Random, name: str, taken_keys: set[str]) -> str:
    """Inject small edits until the result no longer matches any policy key."""
    for _ in range(100):
        chars = list(name)
        for _ in range(rng.randint(1, 2)):
            op = rng.choice(("drop", "dup", "swap", "insert"))
            pos = rng.randrange(len(chars))
            if op == "drop" and len(chars) > 3:
                del chars[pos]
            elif op == "dup":
                chars.insert(pos, chars[pos])
            elif op == "swap" and len(chars) > 1:
                j = min(pos + 1, len(chars) - 1)
                chars[pos], chars[j] = chars[j], chars[pos]
            else:
                chars.insert(pos, rng.choice("abcdefghijklmnopqrstuvwxyz"))
        candidate = "".join(chars)
        key = normalize_name(candidate)
        if key and key not in taken_keys:
            return candidate
    raise InvalidSpec(f"could not derive an unknown name from {name!r}")


def generate_corpus(spec: CorpusSpec, store: PolicyStore | None = None) -> list[CorpusCase]:
    """Deterministic labeled corpus drawn from the store's entries.

    Class sizes floor(count * fraction); the remainder goes to the
    whitelisted class. Ground truth is assigned by construction.
    """
    store = store or seed_store()
    rng = random.Random(spec.seed)
    whitelist = store.entries_on(ListKind.WHITELIST)
    blacklist = store.entries_on(ListKind.BLACKLIST)
    if not whitelist or not blacklist:
        raise InvalidSpec("corpus generation needs at least one entry on each list")
    account_codes = sorted(
        code for code, a in store.accounts.items() if a.routine and a.allowed_categories
    )
    if not account_codes:
        raise InvalidSpec("corpus generation needs a routine account with categories")
    taken_keys: set[str] = set()
    for entry in whitelist + blacklist:
        taken_keys.add(entry.normalized_key)
        taken_keys.update(entry.synonym_keys())

    def usable(entries, account):
        return [e for e in entries if e.category in account.allowed_categories]

    n_black = int(spec.count * spec.fraction_blacklisted)
    n_unknown = int(spec.count * spec.fraction_unknown)
    n_defective = int(spec.count * spec.fraction_defective)
    n_white = spec.count - n_black - n_unknown - n_defective
    classes = (
        ["whitelisted"] * n_white
        + ["blacklisted"] * n_black
        + ["unknown"] * n_unknown
        + ["defective"] * n_defective
    )
    rng.shuffle(classes)

    cases = []
    for i, label_class in enumerate(classes):
        account_code = rng.choice(account_codes)
        account = store.accounts[account_code]
        allowed = usable(whitelist, account)
        if not allowed:
            raise InvalidSpec(f"account {account_code} allows none of the whitelist")
        items = [
            (e.name, rng.randint(1, 3), rng.randint(5, 200) * 100)
            for e in rng.choices(allowed, k=rng.randint(1, 3))
        ]
        resolutions: tuple[tuple[str, str], ...] = ()
        conf_line = None
        if label_class == "blacklisted":
            entry = rng.choice(blacklist)
            items.append((entry.name, 1, rng.randint(5, 200) * 100))
            rng.shuffle(items)
            ground_truth = Verdict.REJECT
        elif label_class == "unknown":
            source = rng.choice(allowed)
            mutated = _mutate_name(rng, source.name, taken_keys)
            items.append((mutated, 1, rng.randint(5, 200) * 100))
            rng.shuffle(items)
            resolutions = ((mutated, source.category),)
            ground_truth = Verdict.APPROVE
        elif label_class == "defective":
            conf_line = f"conf total={rng.randint(0, 49)}"
            ground_truth = Verdict.REJECT
        else:
            ground_truth = Verdict.APPROVE

        text, total = _receipt_text(rng, items, conf_line)
        report_id = f"r{i:05d}"
        submission = ExpenseSubmission(
            report_id=report_id,
            user=f"user{rng.randint(1, 9)}",
            account_code=account_code,
            description="monthly team expenses",
            declared_total=total,
            receipt=ReceiptDocument(source_id=f"{report_id}.rcpt", raw_text=text),
        )
        cases.append(CorpusCase(submission, ground_truth, label_class, resolutions))
    return cases


def write_corpus(cases: list[CorpusCase], out_dir: str) -> None:
    """Materialize a corpus: .rcpt files, labels.csv, and a manifest."""
    receipts_dir = os.path.join(out_dir, "receipts")
    os.makedirs(receipts_dir, exist_ok=True)
    manifest = []
    for case in cases:
        sub = case.submission
        with open(
            os.path.join(receipts_dir, f"{sub.report_id}.rcpt"), "w", encoding="utf-8"
        ) as fh:
            fh.write(sub.receipt.raw_text)
        manifest.append(
            {
                "submission": submission_to_dict(sub),
                "ground_truth": case.ground_truth.value.lower(),
                "label_class": case.label_class,
                "resolutions": [list(r) for r in case.resolutions],
            }
        )
    write_labels(
        [(c.submission.report_id, c.ground_truth) for c in cases],
        os.path.join(out_dir, "labels.csv"),
    )
    with open(os.path.join(out_dir, "corpus.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def read_corpus(out_dir: str) -> list[CorpusCase]:
    with open(os.path.join(out_dir, "corpus.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    return [
        CorpusCase(
            submission=submission_from_dict(raw["submission"]),
            ground_truth=Verdict(raw["ground_truth"].capitalize()),
            label_class=raw["label_class"],
            resolutions=tuple((r[0], r[1]) for r in raw["resolutions"]),
        )
        for raw in manifest
    ]


def run_corpus(engine: Engine, cases: list[CorpusCase], reviewer: str = "oracle") -> None:
    """Drive every case through the pipeline; unknowns are decided by the
    auto-reviewer oracle using the corpus's constructed categories."""
    for case in cases:
        engine.submit(case.submission)
        state = engine.run_to_completion(case.submission.report_id)
        if state is PipelineState.PENDING_REVIEW:
            report = engine.get_report(case.submission.report_id)
            task = engine.queue.get(report.task_id)
            categories = dict(case.resolutions)
            resolutions = tuple(
                ItemResolution(original_name=name, category=categories[name])
                for name in sorted(
                    {ti.item.name for ti in task.items if ti.item.name in categories}
                )
            )
            engine.decide(
                task.task_id,
                ReviewDecision(
                    action=DecisionAction.APPROVE,
                    reviewer=reviewer,
                    item_resolutions=resolutions,
                ),
            )
