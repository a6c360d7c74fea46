"""expenseflow: confidence-gated receipt extraction, policy classification,
advisor-assisted exception handling, and human-in-the-loop learning."""

from .advisor import AdvisorQuery, AdvisorRecommendation, advise_stub, similarity
from .classify import classify_item, classify_report
from .config import Config, load_config
from .evaluation import build_confusion, compute_metrics, generate_corpus
from .pipeline import Engine, ExpenseSubmission
from .policy import PolicyStore, load_store, normalize_name, save_store, seed_store
from .receipt import ReceiptDocument, gate_confidence, parse_receipt

__all__ = [
    "AdvisorQuery",
    "AdvisorRecommendation",
    "Config",
    "Engine",
    "ExpenseSubmission",
    "PolicyStore",
    "ReceiptDocument",
    "advise_stub",
    "build_confusion",
    "classify_item",
    "classify_report",
    "compute_metrics",
    "gate_confidence",
    "generate_corpus",
    "load_config",
    "load_store",
    "normalize_name",
    "parse_receipt",
    "save_store",
    "seed_store",
    "similarity",
]
