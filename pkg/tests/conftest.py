import pytest

from expenseflow.config import Config
from expenseflow.pipeline import Engine, ExpenseSubmission
from expenseflow.policy import seed_store
from expenseflow.receipt import ReceiptDocument


def memory_config(**overrides) -> Config:
    base = dict(
        store_path=None,
        event_log_path=None,
        export_sink_path=None,
        notification_log_path=None,
    )
    base.update(overrides)
    return Config(**base)


def receipt_text(
    items=(),
    merchant="팝스토어잠실향군타워점",
    date="2025-03-25",
    total=None,
    supply=None,
    tax=None,
    conf_lines=(),
):
    """Build a canonical receipt; total defaults to the item amount sum."""
    if total is None:
        total = sum(amount for *_ , amount in items) if items else 9000
    if supply is None:
        supply = round(total / 1.1)
    if tax is None:
        tax = total - supply
    lines = [
        "%RECEIPT 1",
        f"merchant={merchant}",
        f"date={date}",
        f"supply={supply}",
        f"tax={tax}",
        f"total={total}",
    ]
    for name, qty, price, amount in items:
        lines.append(f"item={name}|{qty}|{price}|{amount}")
    lines.extend(conf_lines)
    return "\n".join(lines) + "\n"


def submission(report_id, text, account="53410198", declared=None, user="hana"):
    if declared is None:
        for line in text.splitlines():
            if line.startswith("total="):
                declared = int(line.split("=", 1)[1])
                break
        else:
            declared = 0
    return ExpenseSubmission(
        report_id=report_id,
        user=user,
        account_code=account,
        description="team expenses",
        declared_total=declared,
        receipt=ReceiptDocument(f"{report_id}.rcpt", text),
    )


@pytest.fixture
def store():
    return seed_store()


@pytest.fixture
def engine():
    eng = Engine(memory_config())
    yield eng
    eng.close()
