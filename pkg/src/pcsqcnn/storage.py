"""Run configuration, checkpoints and metrics files.

All three are JSON documents.  Python's ``json`` writes floats with ``repr``,
which round-trips IEEE doubles exactly, so a checkpoint reloads bit for bit.

Config (``schema: 1``)::

    {"schema": 1, "name": str, "seed": int,
     "model":   {"n_idx", "Q", "n_f", "n_classes", "mode", "basis", "rbc_seed"},
     "encoder": {"a", "b"},
     "train":   {"lr", "beta1", "beta2", "eps", "epochs", "batch_size",
                 "eval_batch_size", "eval_every"},
     "data":    DatasetSpec fields}

Checkpoint (``format: "pcsqcnn-checkpoint"``, ``version: 1``): ``model`` and
``encoder`` as above, ``seed``, ``theta`` (flat list in ``(layer, branch, kx,
ky, alpha)`` order), ``head.W`` (nested rows) and ``head.b``.  With
``sidecar=True`` the arrays go to ``<name>.npz`` and the JSON stores its file
name under ``"sidecar"`` instead.

Metrics: JSON lines, one object per row, each stamped ``"schema": 1`` and a
``run_id``.  Files are only ever appended to.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .encoding import EncoderConfig
from .head import HeadParams
from .layers import LayerStack, MultiplexerParams
from .state import build_layout
from .training import TrainConfig

CONFIG_SCHEMA = 1
CHECKPOINT_FORMAT = "pcsqcnn-checkpoint"
CHECKPOINT_VERSION = 1
METRICS_SCHEMA = 1

_BASE = {
    "schema": CONFIG_SCHEMA,
    "seed": 0,
    "model": {"n_idx": 5, "Q": 3, "n_f": 2, "n_classes": 10, "mode": "reduced", "basis": "fourier", "rbc_seed": 0},
    "encoder": {"a": 0.0, "b": float(np.pi)},
    "train": {
        "lr": 3e-2, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "epochs": 2000,
        "batch_size": 256, "eval_batch_size": 1600, "eval_every": 10,
    },
    "data": {"regime": "translated", "per_class": 1000, "resize": 16, "canvas": 32, "max_offset": 8},
}


def _preset(name: str, model: dict | None = None, data: dict | None = None, train: dict | None = None) -> dict:
    cfg = copy.deepcopy(_BASE)
    cfg["name"] = name
    cfg["model"].update(model or {})
    cfg["data"].update(data or {})
    cfg["train"].update(train or {})
    return cfg


PRESETS = {
    "q3nf2_canvas32": _preset("q3nf2_canvas32"),
    "q3nf2_canvas32_rbc": _preset("q3nf2_canvas32_rbc", {"mode": "explicit", "basis": "random"}),
    "q1nf1_canvas32": _preset("q1nf1_canvas32", {"Q": 1, "n_f": 1}),
    "q3nf3_canvas32": _preset("q3nf3_canvas32", {"n_f": 3}),
    "direct16": _preset(
        "direct16", {"n_idx": 4, "Q": 1, "n_f": 3},
        {"regime": "full", "per_class": None, "resize": 16, "canvas": 16},
        {"batch_size": 512, "eval_batch_size": 16000},
    ),
    "digits_canvas16": _preset(
        "digits_canvas16", {"n_idx": 4, "Q": 2, "n_f": 2},
        {"source": "sklearn-digits", "resize": 8, "canvas": 16, "max_offset": 4, "per_class": 100},
        {"epochs": 300, "batch_size": 100, "eval_batch_size": 1000, "eval_every": 25},
    ),
    "tiny": _preset(
        "tiny", {"n_idx": 3, "Q": 2, "n_f": 1},
        {"source": "sklearn-digits", "resize": 4, "canvas": 8, "max_offset": 2, "per_class": 10, "test_per_class": 10},
        {"epochs": 3, "batch_size": 50, "eval_batch_size": 100, "eval_every": 1},
    ),
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(ref: str | None) -> dict:
    """A preset name or a path to a JSON config (merged over the defaults)."""
    if ref is None:
        return copy.deepcopy(PRESETS["q3nf2_canvas32"])
    if ref in PRESETS:
        return copy.deepcopy(PRESETS[ref])
    path = Path(ref)
    if not path.exists():
        raise FileNotFoundError(f"no preset or config file named {ref!r}")
    doc = json.loads(path.read_text())
    if doc.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported config schema {doc.get('schema')!r}")
    base = PRESETS.get(doc.get("preset", "q3nf2_canvas32"))
    if base is None:
        raise ConfigError(f"unknown preset {doc['preset']!r}")
    cfg = _merge(base, {k: v for k, v in doc.items() if k != "preset"})
    cfg.setdefault("name", path.stem)
    return cfg


def save_config(cfg: dict, path) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def layout_from_config(cfg: dict):
    m = cfg["model"]
    return build_layout(m["n_idx"], m["Q"], m["n_f"], m.get("n_classes", 10))


def encoder_from_config(cfg: dict) -> EncoderConfig:
    return EncoderConfig(cfg["encoder"]["a"], cfg["encoder"]["b"], cfg["model"]["n_f"])


def train_config_from(cfg: dict, threads: int = 1) -> TrainConfig:
    return TrainConfig(**cfg["train"], seed=cfg["seed"], threads=threads, encoder=encoder_from_config(cfg))


# ----------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, stack: LayerStack, head: HeadParams, cfg: dict, sidecar: bool = False) -> None:
    path = Path(path)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": dict(cfg["model"]),
        "encoder": dict(cfg["encoder"]),
        "seed": cfg["seed"],
    }
    theta = stack.params.flatten()
    if sidecar:
        npz = path.with_suffix(".npz")
        np.savez(npz, theta=theta, W=head.W, b=head.b)
        doc["sidecar"] = npz.name
    else:
        doc["theta"] = theta.tolist()
        doc["head"] = {"W": head.W.tolist(), "b": head.b.tolist()}
    path.write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path) -> tuple[LayerStack, HeadParams, dict]:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path} is not a checkpoint (format={doc.get('format')!r})")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')!r}")
    cfg = {"model": doc["model"], "encoder": doc["encoder"], "seed": doc["seed"]}
    layout = layout_from_config(cfg)
    if "sidecar" in doc:
        with np.load(path.parent / doc["sidecar"]) as z:
            theta, W, b = z["theta"], z["W"], z["b"]
    else:
        theta = np.array(doc["theta"], dtype=float)
        W = np.array(doc["head"]["W"], dtype=float)
        b = np.array(doc["head"]["b"], dtype=float)
    m = doc["model"]
    stack = LayerStack(layout, MultiplexerParams.from_flat(layout, theta), m["mode"], m["basis"], m["rbc_seed"])
    return stack, HeadParams(W, b), cfg


# ----------------------------------------------------------------------------
# metrics


class MetricsWriter:
    """Append-only JSON-lines metrics sink."""

    def __init__(self, path, run_id: str):
        self.path = Path(path)
        self.run_id = run_id

    def write(self, **row) -> None:
        rec = {"schema": METRICS_SCHEMA, "run_id": self.run_id}
        rec.update(row)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_metrics(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def encoder_dict(enc: EncoderConfig) -> dict:
    d = asdict(enc)
    d.pop("n_f")
    return d
