"""Flat key-value configuration files with CLI overrides.

Files hold one ``section.key = value`` binding per line; ``#`` starts a
comment.  Values are parsed as bool/int/float where possible, otherwise kept
as strings; comma-separated values (optionally in square brackets) become
lists.  Custom index pairs use ``a:b`` band-tag syntax, e.g.::

    indices = ndvi, nir:green
    lwped.levels = 2
    space.dim = 32
    fusion.mode = adaptive
"""

from __future__ import annotations

from .errors import ContractError
from .model import ModelConfig
from .train import TrainConfig


def parse_value(text):
    text = text.strip().strip("[]").strip()
    if "," in text:
        return [parse_value(part) for part in text.split(",") if part.strip()]
    text = text.strip("\"'")
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_file(path):
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = parse_value(value)
    return out


def apply_overrides(cfg, assignments):
    for assignment in assignments or ():
        if "=" not in assignment:
            raise ContractError(f"override must look like key=value, got {assignment!r}")
        key, value = assignment.split("=", 1)
        cfg[key.strip()] = parse_value(value)
    return cfg


def _as_list(value):
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


def _index_specs(cfg):
    specs = []
    for entry in _as_list(cfg.get("indices", "ndvi")):
        entry = str(entry)
        if ":" in entry:
            a, b = entry.split(":", 1)
            specs.append((a.strip(), b.strip()))
        else:
            specs.append(entry.strip())
    return tuple(specs)


def model_config(cfg) -> ModelConfig:
    """Build a ModelConfig from a flat config dict (missing keys use defaults)."""
    return ModelConfig(
        n_classes=int(cfg.get("model.n_classes", 6)),
        in_channels=int(cfg.get("model.in_channels", 4)),
        tile=int(cfg.get("model.tile", 32)),
        levels=int(cfg.get("lwped.levels", 2)),
        pad=str(cfg.get("lwped.pad", "none")),
        detail_skip=str(cfg.get("lwped.detail_skip", "identity")),
        wave_blocks=int(cfg.get("wave.blocks", 2)),
        wave_dim=int(cfg.get("wave.dim", 16)),
        wave_phase=str(cfg.get("wave.phase", "content")),
        space_patch=int(cfg.get("space.patch", 4)),
        space_dim=int(cfg.get("space.dim", 32)),
        space_heads=int(cfg.get("space.heads", 2)),
        space_layers=int(cfg.get("space.layers", 2)),
        attn_reduction=int(cfg.get("attn.reduction", 4)),
        fusion_mode=str(cfg.get("fusion.mode", "adaptive")),
        indices=_index_specs(cfg),
        inverse_wave_block=bool(cfg.get("ablation.inverse_wave_block", True)),
        channel_attention=bool(cfg.get("ablation.channel_attention", True)),
        use_space=bool(cfg.get("branches.space", True)),
        use_wave=bool(cfg.get("branches.wave", True)),
        use_index=bool(cfg.get("branches.index", True)),
        dtype=str(cfg.get("model.dtype", "float32")),
    )


def train_config(cfg) -> TrainConfig:
    return TrainConfig(
        steps=int(cfg.get("train.steps", 2000)),
        batch=int(cfg.get("train.batch", 4)),
        lr=float(cfg.get("train.lr", 1e-3)),
        weight_decay=float(cfg.get("train.weight_decay", 0.01)),
        poly_power=float(cfg.get("train.poly_power", 0.9)),
        seed=int(cfg.get("train.seed", 0)),
        aux_weight=float(cfg.get("train.aux_weight", 0.4)),
    )


def dump_config(cfg, path):
    """Write a flat dict back out in the same file syntax."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(cfg):
            value = cfg[key]
            if isinstance(value, list):
                value = ", ".join(str(v) for v in value)
            fh.write(f"{key} = {value}\n")
