"""Binary weight file format.

Layout, bit-exact:

    magic bytes  "BIRRW001"                               (8 bytes)
    header_len   little-endian u32                        (4 bytes)
    header       UTF-8 JSON, space-padded to 4 bytes:
                 {"config": {...}, "tensors": [{"name", "shape", "trainable",
                  "offset", "nbytes"}, ...]}
    blob         raw little-endian float32 data; every tensor offset is a
                 multiple of 4 relative to the blob start

A save -> load round trip is bitwise identical, including batch-norm running
statistics and per-layer trainable flags.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import (ConfigError, WeightMagicError, WeightShapeError,
                     WeightTruncationError)
from .model import Model, ModelConfig, build_model
from .rng import make_rng

MAGIC = b"BIRRW001"
_HEADER_LEN_FMT = "<I"


def save_weights(model: Model, path) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr, layer in model.named_tensors():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "trainable": bool(layer.trainable),
            "offset": offset,
            "nbytes": len(data),
        })
        blobs.append(data)
        offset += len(data)

    header = {
        "config": asdict(model.config),
        # parameterless layers carry no tensors, so the freeze policy is also
        # recorded per layer
        "layers": [{"name": layer.name, "trainable": bool(layer.trainable)}
                   for layer in model.layers],
        "tensors": entries,
    }
    encoded = json.dumps(header, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    if len(encoded) % 4:
        encoded += b" " * (4 - len(encoded) % 4)

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(_HEADER_LEN_FMT, len(encoded)))
        fh.write(encoded)
        for blob in blobs:
            fh.write(blob)


def read_header(path) -> dict:
    """Parse and validate the header; raises the same errors as load_weights."""
    data = Path(path).read_bytes()
    return _parse_header(data)[0]


def _parse_header(data: bytes):
    if len(data) < len(MAGIC):
        raise WeightTruncationError(
            f"file is {len(data)} bytes, shorter than the magic prefix")
    if data[:len(MAGIC)] != MAGIC:
        raise WeightMagicError(
            f"bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}")
    if len(data) < len(MAGIC) + 4:
        raise WeightTruncationError("file ends inside the header length field")
    (header_len,) = struct.unpack_from(_HEADER_LEN_FMT, data, len(MAGIC))
    body_start = len(MAGIC) + 4
    if len(data) < body_start + header_len:
        raise WeightTruncationError(
            f"header declares {header_len} bytes but only "
            f"{len(data) - body_start} are present")
    try:
        header = json.loads(data[body_start:body_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightShapeError(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "config" not in header or "tensors" not in header:
        raise WeightShapeError("header is missing 'config' or 'tensors'")
    return header, data[body_start + header_len:]


def load_weights(config: ModelConfig, path) -> Model:
    """Rebuild a model for ``config`` and fill it from ``path``.

    Raises WeightMagicError, WeightShapeError, or WeightTruncationError; on
    any failure no model is returned.
    """
    data = Path(path).read_bytes()
    header, blob = _parse_header(data)

    try:
        echo = ModelConfig(**header["config"])
    except (TypeError, ConfigError) as exc:
        raise WeightShapeError(f"stored config is invalid: {exc}") from exc
    if echo != config:
        raise ConfigError(
            f"stored config {header['config']} does not match requested {asdict(config)}")

    model = build_model(config, make_rng(0))
    expected = list(model.named_tensors())
    stored = header["tensors"]
    if len(stored) != len(expected):
        raise WeightShapeError(
            f"file holds {len(stored)} tensors, model needs {len(expected)}")

    # validate everything before touching the model: no partial fills
    views = []
    for entry, (name, arr, layer) in zip(stored, expected):
        if entry["name"] != name:
            raise WeightShapeError(
                f"tensor order mismatch: file has {entry['name']!r} where the "
                f"model expects {name!r}")
        if tuple(entry["shape"]) != arr.shape:
            raise WeightShapeError(
                f"tensor {name!r}: stored shape {tuple(entry['shape'])} does not "
                f"match model shape {arr.shape}")
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        if entry["nbytes"] != count * 4:
            raise WeightShapeError(
                f"tensor {name!r}: nbytes {entry['nbytes']} inconsistent with "
                f"shape {entry['shape']}")
        if entry["offset"] % 4:
            raise WeightShapeError(f"tensor {name!r}: offset not 4-byte aligned")
        end = entry["offset"] + entry["nbytes"]
        if end > len(blob):
            raise WeightTruncationError(
                f"tensor {name!r} needs blob bytes up to {end}, file has {len(blob)}")
        values = np.frombuffer(blob, dtype="<f4", count=count,
                               offset=entry["offset"]).reshape(arr.shape)
        views.append((arr, values, layer, bool(entry["trainable"])))

    layer_flags = header.get("layers", [])
    if layer_flags:
        if len(layer_flags) != len(model.layers):
            raise WeightShapeError(
                f"file records {len(layer_flags)} layers, model has "
                f"{len(model.layers)}")
        for record, layer in zip(layer_flags, model.layers):
            if record["name"] != layer.name:
                raise WeightShapeError(
                    f"layer order mismatch: file has {record['name']!r} where "
                    f"the model expects {layer.name!r}")

    for arr, values, layer, trainable in views:
        arr[...] = values
        layer.trainable = trainable
    for record, layer in zip(layer_flags, model.layers):
        layer.trainable = bool(record["trainable"])
    return model


def load_model(path) -> Model:
    """Load a model using the config echoed in the file header."""
    header = read_header(path)
    try:
        config = ModelConfig(**header["config"])
    except (TypeError, ConfigError) as exc:
        raise WeightShapeError(f"stored config is invalid: {exc}") from exc
    return load_weights(config, path)


def model_digest(path) -> str:
    """Content digest of a weight file, used as the served model identity."""
    h = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"sha256:{h[:16]}"
