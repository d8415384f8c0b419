"""Pipeline configuration (single JSON document, schema version 1)."""
from __future__ import annotations

import copy
import json
from pathlib import Path

from .decoder import DECODERS
from .errors import ValidationError
from .event_cloud import FORMATS, NORMALIZATIONS, SamplingConfig
from .lca import LcaParams

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "train": None,  # {"inputs": dir or manifest, "format": ...}
    "test": None,
    "sampling": {"num_windows": 8, "events_per_window": 256, "target_points": 1024, "seed": 0},
    "normalization": "isotropic",  # or "per-axis"
    "weights_path": None,
    "weights_seed": 0,
    "lca": {"lam": 0.2, "tau": 1000.0, "steps": 100, "dt": 1.0, "normalize_input": True},
    "decoder": "max-sum",
    "out": "run",
    "workers": 1,
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None) -> dict:
    """Defaults overlaid with a config file.  A run manifest is accepted too:
    its embedded config snapshot is used."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except ValueError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    if "config" in doc and "stages" in doc:
        doc = doc["config"]
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported config schema_version {version}")
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, doc)
    base = path.parent
    for split in ("train", "test"):
        if cfg[split] and not Path(cfg[split]["inputs"]).is_absolute():
            cfg[split]["inputs"] = str((base / cfg[split]["inputs"]).resolve())
    if cfg["weights_path"] and not Path(cfg["weights_path"]).is_absolute():
        cfg["weights_path"] = str((base / cfg["weights_path"]).resolve())
    return cfg


def validate_config(cfg: dict) -> None:
    sampling_config(cfg)
    lca_params(cfg)
    if cfg["normalization"] not in NORMALIZATIONS:
        raise ValidationError(f"normalization must be one of {NORMALIZATIONS}")
    if cfg["decoder"] not in DECODERS + ("both",):
        raise ValidationError(f"decoder must be one of {DECODERS + ('both',)}")
    for split in ("train", "test"):
        spec = cfg[split]
        if spec is None:
            continue
        if "inputs" not in spec:
            raise ValidationError(f"{split}.inputs is required")
        if spec.get("format", "canonical-binary") not in FORMATS:
            raise ValidationError(f"{split}.format must be one of {FORMATS}")
    if int(cfg["workers"]) < 1:
        raise ValidationError("workers must be >= 1")


def sampling_config(cfg) -> SamplingConfig:
    try:
        return SamplingConfig(**cfg["sampling"])
    except TypeError as exc:
        raise ValidationError(f"bad sampling section: {exc}") from None


def lca_params(cfg) -> LcaParams:
    try:
        return LcaParams(**cfg["lca"])
    except TypeError as exc:
        raise ValidationError(f"bad lca section: {exc}") from None
