"""Model artifact directories.

Layout::

    model.json     schema version, kind, config echo, serialized model
    manifest.json  seed, config hash, library versions
    history.csv    per-iteration (or per-epoch) training trace incl. wall-clock

``model.json`` and ``manifest.json`` are byte-identical across runs with the
same config; ``history.csv`` is not, because it records elapsed seconds.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..boost2wl import TwoWlModel
from ..fusionnet import FusionModel
from ..gbm import GbmModel
from ..serialization import SCHEMA_VERSION, ArtifactError, SchemaVersionError, dumps
from .config import ExperimentConfig
from .experiment import ModelArtifact

MODEL_FILE = "model.json"
MANIFEST_FILE = "manifest.json"
HISTORY_FILE = "history.csv"


def _model_class(kind: str):
    if kind in ("baseline", "bfvdnn"):
        return FusionModel
    if kind == "gbm_only":
        return GbmModel
    return TwoWlModel


def serialize_model(artifact: ModelArtifact) -> str:
    return dumps({
        "schema_version": SCHEMA_VERSION,
        "kind": artifact.kind,
        "config": artifact.config.to_flat(),
        "model": artifact.model.to_dict(),
    })


def manifest(artifact: ModelArtifact) -> dict:
    return {
        "seed": artifact.config.seed,
        "config_sha256": artifact.config.digest(),
        "kind": artifact.kind,
        "versions": {
            "dualboost": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def write_history(path, rows: list, fields: list[str]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fields})


@contextmanager
def staged_dir(final: Path):
    """Yield a scratch directory that replaces ``final`` only if the block succeeds."""
    final = Path(final)
    final.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{final.name}.", dir=final.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def write_artifact(artifact: ModelArtifact, directory: Path):
    directory = Path(directory)
    (directory / MODEL_FILE).write_text(serialize_model(artifact))
    (directory / MANIFEST_FILE).write_text(dumps(manifest(artifact)))
    write_history(directory / HISTORY_FILE, artifact.history, artifact.history_fields)


def save_artifact(artifact: ModelArtifact, out_dir) -> Path:
    out_dir = Path(out_dir)
    with staged_dir(out_dir) as tmp:
        write_artifact(artifact, tmp)
    return out_dir


def deserialize_model(text: str) -> ModelArtifact:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ArtifactError("model file must hold a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(doc.get("schema_version"))
    try:
        kind = doc["kind"]
        config = ExperimentConfig.from_flat(doc["config"])
        model = _model_class(kind).from_dict(doc["model"])
    except ArtifactError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"malformed model artifact: {exc!r}") from exc
    history = model.history if hasattr(model, "history") else []
    return ModelArtifact(kind, model, config, history)


def load_artifact(directory) -> ModelArtifact:
    path = Path(directory) / MODEL_FILE
    if not path.is_file():
        raise FileNotFoundError(f"no {MODEL_FILE} in {directory}")
    return deserialize_model(path.read_text())
