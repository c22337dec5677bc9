"""Key-value config files and the override chain.

Format: one ``key = value`` per line, ``#`` comments.  Precedence when
building the effective pipeline configuration: CLI flag > config file >
checkpoint eps preset > hardcoded default (the preset lookup happens inside
``PipelineConfig.resolved_eps`` when eps is left unset).
"""

from __future__ import annotations

from pathlib import Path

from .errors import InvalidInput
from .pipeline import PipelineConfig
from .reranking import MaskStrategy

_INT_KEYS = {
    "max_keep",
    "window_size",
    "dedup_overlap_threshold",
    "min_pts",
    "one_token_k",
    "two_token_k",
    "beam",
    "head_k",
    "mask_count",
    "attention_masks",
    "seed",
}
_FLOAT_KEYS = {"eps", "edit_distance_threshold"}


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = _coerce(key.strip(), value.strip())
    return values


def _coerce(key: str, value: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key == "strategy":
            return MaskStrategy(value)
    except ValueError as exc:
        raise InvalidInput(f"config key {key}: {exc}") from exc
    return value


def load_pipeline_config(path: str | Path | None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, overlaid with the config file, overlaid with CLI overrides."""
    values: dict = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = _coerce(key, value) if isinstance(value, str) else value
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise InvalidInput(f"unknown config keys: {', '.join(sorted(unknown))}")
    return PipelineConfig(**values)
