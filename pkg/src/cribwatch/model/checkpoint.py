"""BBCK checkpoint files.

Layout: magic "BBCK", u32 LE version, u32 LE header length, JSON header
(ordered parameter records with name/shape/frozen, class list, variant tag),
then each parameter as little-endian float64 in header order. Round trips
are bit-identical.
"""

import json
import struct

import numpy as np

from .variants import VariantModel

MAGIC = b"BBCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(model, path, param_filter=None):
    """Write model parameters; param_filter(name) selects a subset (e.g. trunk only)."""
    names = [n for n in model.params if param_filter is None or param_filter(n)]
    frozen = model.frozen_param_names()
    header = {
        "params": [
            {"name": n, "shape": list(model.params[n].shape), "frozen": n in frozen}
            for n in names
        ],
        "classes": model.class_names,
        "variant": model.tag,
        "input_shape": list(model.input_shape),
    }
    blob = json.dumps(header, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes())


def read_header(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        payload_at = fh.tell()
    return header, payload_at


def _read_arrays(path, header, payload_at):
    arrays = {}
    with open(path, "rb") as fh:
        fh.seek(payload_at)
        for rec in header["params"]:
            shape = tuple(rec["shape"])
            n = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * n)
            if len(raw) != 8 * n:
                raise CheckpointError(f"truncated payload for parameter {rec['name']}")
            arrays[rec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise CheckpointError("trailing bytes after final parameter")
    return arrays


def load_checkpoint(path, freeze=(), classes=None, variant=None, seed=0):
    """Rebuild a model from a checkpoint.

    With `classes` differing from the stored class list (or a partial
    checkpoint, e.g. trunk-only), stored parameters are reused where the
    name and shape match and the rest are freshly initialized: that is the
    transfer path. `freeze` is a set of parameter-name prefixes.
    """
    header, payload_at = read_header(path)
    arrays = _read_arrays(path, header, payload_at)

    tag = variant or header.get("variant") or "I"
    class_names = list(classes) if classes is not None else header["classes"]
    model = VariantModel(tag, class_names, tuple(header.get("input_shape", (3, 40, 64, 64))), seed=seed)

    loaded = set()
    for name, arr in arrays.items():
        if name in model.params:
            if model.params[name].shape != arr.shape:
                if classes is None and variant is None:
                    raise CheckpointError(
                        f"shape mismatch for {name}: header {arr.shape} vs model {model.params[name].shape}"
                    )
                continue  # reinitialized (head swap)
            model.params[name][...] = arr
            loaded.add(name)
    model._sync_cell()

    stored_frozen = {rec["name"] for rec in header["params"] if rec.get("frozen")}
    model.frozen = set(freeze) | (stored_frozen & loaded)
    return model, loaded
