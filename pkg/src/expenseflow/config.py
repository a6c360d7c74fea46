"""Runtime configuration.

Resolution order per field: CLI flag, then EXPFLOW_<FIELD> environment
variable, then the config file, then the built-in default. The config file
location itself comes from --config, then EXPFLOW_CONFIG, then
./expenseflow.json.
"""

import json
import os
from dataclasses import dataclass, field, replace

from .errors import InvalidSpec

DEFAULT_CONFIG_FILE = "expenseflow.json"
ENV_CONFIG = "EXPFLOW_CONFIG"
ENV_PREFIX = "EXPFLOW_"

DEFAULT_MANDATORY_FIELDS = frozenset({"merchant", "date", "total"})


@dataclass(frozen=True)
class AdvisorSettings:
    kind: str = "stub"  # stub | external
    url: str | None = None
    timeout_s: float = 30.0
    prompt_path: str | None = None


@dataclass(frozen=True)
class Config:
    # path fields set to None keep that log in memory only (test use)
    store_path: str | None = "expenseflow.policy.json"
    event_log_path: str | None = "events.jsonl"
    export_sink_path: str | None = "exports.jsonl"
    notification_log_path: str | None = "notifications.jsonl"
    confidence_threshold: int = 50
    mandatory_fields: frozenset[str] = DEFAULT_MANDATORY_FIELDS
    tau_white: float = 0.5
    tau_black: float = 0.5
    strict_category: bool = True
    advisor: AdvisorSettings = field(default_factory=AdvisorSettings)
    listen: str = "127.0.0.1:8732"
    ui_origin: str = "*"
    ui_dist: str | None = None
    webhook_url: str | None = None
    labels_path: str | None = None

    def __post_init__(self):
        if not 0 <= self.confidence_threshold <= 100:
            raise InvalidSpec(
                f"confidence_threshold {self.confidence_threshold} outside [0, 100]"
            )
        for name in ("tau_white", "tau_black"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidSpec(f"{name} {value} outside [0, 1]")
        object.__setattr__(self, "mandatory_fields", frozenset(self.mandatory_fields))


_SCALAR_FIELDS = {
    "store_path": str,
    "event_log_path": str,
    "export_sink_path": str,
    "notification_log_path": str,
    "confidence_threshold": int,
    "tau_white": float,
    "tau_black": float,
    "strict_category": None,  # parsed as bool below
    "listen": str,
    "ui_origin": str,
    "ui_dist": str,
    "webhook_url": str,
    "labels_path": str,
}


def _parse_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    return str(raw).strip().lower() in ("1", "true", "yes", "on")


def _coerce(name: str, raw):
    if name == "mandatory_fields":
        if isinstance(raw, str):
            raw = [p.strip() for p in raw.split(",") if p.strip()]
        return frozenset(raw)
    if name == "strict_category":
        return _parse_bool(raw)
    caster = _SCALAR_FIELDS[name]
    return caster(raw)


def _advisor_from(raw: dict) -> AdvisorSettings:
    return AdvisorSettings(
        kind=raw.get("kind", "stub"),
        url=raw.get("url"),
        timeout_s=float(raw.get("timeout_s", 30.0)),
        prompt_path=raw.get("prompt_path"),
    )


def load_config(
    path: str | None = None,
    env: dict | None = None,
    overrides: dict | None = None,
) -> Config:
    """Build the effective Config from file, environment, and overrides."""
    env = os.environ if env is None else env
    config_path = path or env.get(ENV_CONFIG) or DEFAULT_CONFIG_FILE
    file_data: dict = {}
    if path or env.get(ENV_CONFIG) or os.path.exists(config_path):
        try:
            with open(config_path, encoding="utf-8") as fh:
                file_data = json.load(fh)
        except FileNotFoundError:
            raise InvalidSpec(f"config file {config_path} not found")
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpec(f"config file {config_path} unreadable: {exc}")

    values: dict = {}
    advisor_raw = dict(file_data.get("advisor") or {})
    for name in list(_SCALAR_FIELDS) + ["mandatory_fields"]:
        if name in file_data:
            values[name] = _coerce(name, file_data[name])
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = _coerce(name, env[env_key])
    for part in ("kind", "url", "timeout_s", "prompt_path"):
        env_key = f"{ENV_PREFIX}ADVISOR_{part.upper()}"
        if env_key in env:
            advisor_raw[part] = env[env_key]
    values["advisor"] = _advisor_from(advisor_raw)

    config = Config(**values)
    if overrides:
        clean = {k: v for k, v in overrides.items() if v is not None}
        if clean:
            config = replace(config, **clean)
    return config
