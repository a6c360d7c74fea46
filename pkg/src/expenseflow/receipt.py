"""Parsing of canonical receipt documents and the confidence gate.

The canonical format is line oriented UTF-8: a ``%RECEIPT 1`` header line,
``key=value`` header fields, repeatable ``item=name|qty|unit_price|amount``
lines, repeatable ``conf field=0..100`` directives, plus blank and ``#``
comment lines.
"""

import re
from dataclasses import dataclass
from datetime import date, datetime
from enum import Enum

from .errors import InvalidDate, InvalidNumber, MalformedReceipt

HEADER_LINE = "%RECEIPT 1"
HEADER_FIELDS = ("merchant", "biz_no", "date", "approval_no", "supply", "tax", "total")
INT_FIELDS = frozenset({"supply", "tax", "total"})

# Additive identities (supply+tax vs total, item sum vs total) tolerate VAT rounding.
KRW_TOLERANCE = 1

_INT_RE = re.compile(r"^-?\d+$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DATETIME_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}$")


@dataclass(frozen=True)
class ReceiptDocument:
    """A submitted receipt in the canonical text format."""

    source_id: str
    raw_text: str

    def __post_init__(self):
        if not self.source_id:
            raise ValueError("source_id must be non-empty")


@dataclass(frozen=True)
class LineItem:
    """One purchased item; quantity and unit_price may be absent."""

    name: str
    quantity: int | None = None
    unit_price: int | None = None
    amount: int = 0


@dataclass(frozen=True)
class FieldExtraction:
    """A recognized header field with its recognition confidence (0-100)."""

    field_name: str
    value: str | int
    confidence: int = 100

    def __post_init__(self):
        if not 0 <= self.confidence <= 100:
            raise ValueError(f"confidence {self.confidence} outside [0, 100]")


@dataclass(frozen=True)
class ExtractionResult:
    """Structured output of parsing one receipt document."""

    fields: tuple[FieldExtraction, ...] = ()
    items: tuple[LineItem, ...] = ()
    warnings: tuple[str, ...] = ()

    def field(self, name: str) -> FieldExtraction | None:
        for f in self.fields:
            if f.field_name == name:
                return f
        return None

    def field_value(self, name: str) -> str | int | None:
        f = self.field(name)
        return None if f is None else f.value


class GateStatus(Enum):
    OK = "Ok"
    DEFECTIVE = "Defective"


@dataclass(frozen=True)
class ConfidenceVerdict:
    """Outcome of the confidence gate over the mandatory fields."""

    status: GateStatus
    defective_fields: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.status is GateStatus.DEFECTIVE) != bool(self.defective_fields):
            raise ValueError("status Defective iff defective_fields non-empty")


def _parse_int(raw: str, context: str) -> int:
    if not _INT_RE.match(raw):
        raise InvalidNumber(f"{context}: {raw!r} is not an integer")
    return int(raw)


def _validate_date(raw: str) -> str:
    if _DATE_RE.match(raw):
        try:
            date.fromisoformat(raw)
            return raw
        except ValueError:
            pass
    elif _DATETIME_RE.match(raw):
        try:
            datetime.strptime(raw, "%Y-%m-%dT%H:%M:%S")
            return raw
        except ValueError:
            pass
    raise InvalidDate(f"date {raw!r} is not ISO-8601 (YYYY-MM-DD or YYYY-MM-DDTHH:MM:SS)")


def _parse_item(value: str) -> LineItem:
    parts = value.split("|")
    if len(parts) != 4:
        raise MalformedReceipt(
            f"item line needs name|quantity|unit_price|amount, got {len(parts)} part(s)"
        )
    name, qty_raw, price_raw, amount_raw = (p.strip() for p in parts)
    if not name:
        raise MalformedReceipt("item name is empty")
    quantity = _parse_int(qty_raw, "item quantity") if qty_raw else None
    if quantity is not None and quantity < 0:
        raise InvalidNumber(f"item quantity {quantity} is negative")
    unit_price = _parse_int(price_raw, "item unit_price") if price_raw else None
    if not amount_raw:
        raise InvalidNumber(f"item {name!r} has no amount")
    amount = _parse_int(amount_raw, "item amount")
    return LineItem(name=name, quantity=quantity, unit_price=unit_price, amount=amount)


def parse_receipt(doc: ReceiptDocument) -> ExtractionResult:
    """Parse a canonical receipt document into structured fields and items.

    Unknown keys, duplicate fields, and confidence directives for absent
    fields are recorded as warnings, never errors. Raises MalformedReceipt,
    InvalidNumber, or InvalidDate for structural defects.
    """
    if not doc.raw_text:
        raise MalformedReceipt("empty document")
    lines = doc.raw_text.split("\n")
    if lines[0].rstrip("\r") != HEADER_LINE:
        raise MalformedReceipt(f"first line must be {HEADER_LINE!r}")

    values: dict[str, str | int] = {}
    confidences: dict[str, int] = {}
    items: list[LineItem] = []
    warnings: list[str] = []

    for lineno, raw_line in enumerate(lines[1:], start=2):
        line = raw_line.rstrip("\r")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("conf "):
            directive = stripped[len("conf "):].strip()
            if "=" not in directive:
                raise MalformedReceipt(f"line {lineno}: conf directive needs field=value")
            fname, _, conf_raw = directive.partition("=")
            fname = fname.strip()
            conf = _parse_int(conf_raw.strip(), f"confidence for {fname!r}")
            if not 0 <= conf <= 100:
                raise InvalidNumber(f"confidence {conf} for {fname!r} outside [0, 100]")
            if fname not in HEADER_FIELDS:
                warnings.append(f"confidence directive for unknown field {fname!r}")
                continue
            confidences[fname] = conf
            continue
        if "=" not in line:
            raise MalformedReceipt(f"line {lineno}: {stripped!r} is not key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key == "item":
            items.append(_parse_item(value))
        elif key in HEADER_FIELDS:
            value = value.strip()
            if not value:
                warnings.append(f"empty value for field {key!r}")
                continue
            if key in values:
                warnings.append(f"duplicate field {key!r}; last value wins")
            if key in INT_FIELDS:
                values[key] = _parse_int(value, key)
            elif key == "date":
                values[key] = _validate_date(value)
            else:
                values[key] = value
        else:
            warnings.append(f"unknown key {key!r}")

    for fname in confidences:
        if fname not in values:
            warnings.append(f"confidence directive for absent field {fname!r}")

    fields = tuple(
        FieldExtraction(name, values[name], confidences.get(name, 100))
        for name in HEADER_FIELDS
        if name in values
    )
    result = ExtractionResult(fields=fields, items=tuple(items), warnings=tuple(warnings))
    return ExtractionResult(
        fields=fields,
        items=tuple(items),
        warnings=tuple(warnings) + tuple(validate_arithmetic(result)),
    )


def validate_arithmetic(result: ExtractionResult) -> list[str]:
    """Check the additive identities of a parsed receipt; returns warnings.

    Checked: supply+tax vs total (±1 KRW), per-item amount vs qty×unit_price
    (exact), and item-amount sum vs total (±1 KRW, only when items exist).
    """
    warnings = []
    supply = result.field_value("supply")
    tax = result.field_value("tax")
    total = result.field_value("total")
    if supply is not None and tax is not None and total is not None:
        if abs(supply + tax - total) > KRW_TOLERANCE:
            warnings.append(f"supply {supply} + tax {tax} ≠ total {total}")
    for item in result.items:
        if item.quantity is not None and item.unit_price is not None:
            if item.amount != item.quantity * item.unit_price:
                warnings.append(
                    f"item {item.name!r} amount {item.amount} ≠ "
                    f"{item.quantity} × {item.unit_price}"
                )
    if result.items and total is not None:
        item_sum = sum(i.amount for i in result.items)
        if abs(item_sum - total) > KRW_TOLERANCE:
            warnings.append(f"item sum {item_sum} ≠ total {total}")
    return warnings


def gate_confidence(
    result: ExtractionResult, mandatory: set[str], threshold: int
) -> ConfidenceVerdict:
    """Flag the receipt defective when any mandatory field is absent or its
    confidence falls strictly below the threshold."""
    if not mandatory:
        raise ValueError("mandatory field set must be non-empty")
    if not 0 <= threshold <= 100:
        raise ValueError(f"threshold {threshold} outside [0, 100]")
    defective = []
    for name in sorted(mandatory):
        f = result.field(name)
        if f is None or f.confidence < threshold:
            defective.append(name)
    if defective:
        return ConfidenceVerdict(GateStatus.DEFECTIVE, tuple(defective))
    return ConfidenceVerdict(GateStatus.OK)


def serialize_receipt(result: ExtractionResult) -> str:
    """Render an extraction result back into the canonical text format.

    Parsing the rendered text reproduces the result (modulo warnings that
    only a non-canonical source can cause, e.g. unknown keys).
    """
    lines = [HEADER_LINE]
    for f in result.fields:
        lines.append(f"{f.field_name}={f.value}")
    for item in result.items:
        qty = "" if item.quantity is None else str(item.quantity)
        price = "" if item.unit_price is None else str(item.unit_price)
        lines.append(f"item={item.name}|{qty}|{price}|{item.amount}")
    for f in result.fields:
        if f.confidence != 100:
            lines.append(f"conf {f.field_name}={f.confidence}")
    return "\n".join(lines) + "\n"
