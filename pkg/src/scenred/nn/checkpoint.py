"""Checkpoints as versioned JSON text.

Floats are written with ``repr`` precision so a save/load cycle is bit-exact,
and the file bytes depend only on the parameters and the config echo.
"""
import json
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument
from .policy import NetConfig, PolicyParams, param_shapes

FORMAT_TAG = "scenred-checkpoint"
FORMAT_VERSION = 1


def checkpoint_text(params, config_echo=None, meta=None):
    entries = [{"name": k, "shape": list(params[k].shape),
                "values": [float(v) for v in params[k].ravel()]} for k in params.names()]
    doc = {"format": FORMAT_TAG, "version": FORMAT_VERSION, "net": params.config.to_dict(),
           "config": config_echo or {}, "meta": meta or {}, "params": entries}
    return json.dumps(doc, allow_nan=False, separators=(",", ":")) + "\n"


def save_checkpoint(path, params, config_echo=None, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(checkpoint_text(params, config_echo, meta))
    tmp.replace(path)


def load_checkpoint(path, expect=None):
    """Return ``(params, config_echo, meta)``.

    With ``expect`` (a NetConfig), a width mismatch raises naming the first
    offending parameter.
    """
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT_TAG or doc.get("version") != FORMAT_VERSION:
        raise InvalidArgument(f"{path}: not a version-{FORMAT_VERSION} checkpoint")
    cfg = NetConfig(**doc["net"])
    stored = {e["name"]: np.array(e["values"], dtype=float).reshape(e["shape"]) for e in doc["params"]}
    if expect is not None and expect != cfg:
        want = param_shapes(expect)
        for k, shp in want.items():
            if k not in stored or stored[k].shape != shp:
                got = stored[k].shape if k in stored else None
                raise InvalidArgument(f"checkpoint parameter {k} has shape {got}, config expects {shp}")
        raise InvalidArgument(f"checkpoint network config {cfg} differs from {expect}")
    return PolicyParams(cfg, stored), doc.get("config", {}), doc.get("meta", {})
