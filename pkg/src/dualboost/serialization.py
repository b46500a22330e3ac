"""Exact, checksummed array encoding for model artifacts."""

from __future__ import annotations

import base64
import hashlib
import json

import numpy as np

SCHEMA_VERSION = 1


class ArtifactError(ValueError):
    """A model artifact is malformed or corrupted."""


class SchemaVersionError(ArtifactError):
    def __init__(self, found, expected=SCHEMA_VERSION):
        super().__init__(f"artifact schema version {found!r} is not supported (expected {expected})")
        self.found = found
        self.expected = expected


def encode_array(a) -> dict:
    a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
    raw = a.tobytes()
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(raw).decode("ascii"),
        "sha256": hashlib.sha256(raw).hexdigest(),
    }


def decode_array(block: dict) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in block["shape"])
        raw = base64.b64decode(block["data"], validate=True)
        digest = block["sha256"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"malformed weight block: {exc}") from exc
    if hashlib.sha256(raw).hexdigest() != digest:
        raise ArtifactError("weight block checksum mismatch")
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise ArtifactError(f"weight block holds {len(raw)} bytes, shape {shape} needs {expected}")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, repr floats, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"
