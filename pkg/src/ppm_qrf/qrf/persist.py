"""Versioned JSON persistence for fitted forests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..event_log import FeatureEncoder
from .forest import Hyperparameters, QrfModel, RegressionTree

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


class SchemaHashMismatch(ModelFormatError):
    pass


def model_to_dict(model: QrfModel) -> dict:
    trees = []
    for tree in model.forest:
        trees.append({
            "tree_seed": str(tree.tree_seed),
            "feature": tree.feature.tolist(),
            "threshold": tree.threshold.tolist(),
            "left": tree.left.tolist(),
            "right": tree.right.tolist(),
            "leaf_members": [[leaf, tree.leaf_members[leaf].tolist()] for leaf in tree.leaves],
        })
    hp = model.hyperparameters.to_dict()
    hp["seed"] = str(hp["seed"])
    return {
        "version": FORMAT_VERSION,
        "hyperparameters": hp,
        "weight_basis": model.weight_basis,
        "schema_hash": model.encoder.schema_hash() if model.encoder is not None else None,
        "schema": model.encoder.to_dict() if model.encoder is not None else None,
        "trees": trees,
        "train_targets": model.train_targets.tolist(),
    }


def model_from_dict(doc: dict, expected_schema_hash: str | None = None) -> QrfModel:
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('version')!r}")
    encoder = FeatureEncoder.from_dict(doc["schema"]) if doc.get("schema") is not None else None
    stored = doc.get("schema_hash")
    if encoder is not None and encoder.schema_hash() != stored:
        raise SchemaHashMismatch("embedded schema does not match its recorded hash")
    if expected_schema_hash is not None and stored != expected_schema_hash:
        raise SchemaHashMismatch(f"model schema hash {stored} != expected {expected_schema_hash}")
    hp = doc["hyperparameters"]
    hp = Hyperparameters(int(hp["mtry"]), int(hp["trees"]), int(hp["min_n"]), int(hp["seed"]))
    trees = []
    for t in doc["trees"]:
        trees.append(RegressionTree(
            np.asarray(t["feature"], dtype=np.int64),
            np.asarray(t["threshold"], dtype=float),
            np.asarray(t["left"], dtype=np.int64),
            np.asarray(t["right"], dtype=np.int64),
            {int(leaf): np.asarray(m, dtype=np.int64) for leaf, m in t["leaf_members"]},
            int(t["tree_seed"]),
        ))
    return QrfModel(tuple(trees), np.asarray(doc["train_targets"], dtype=float), hp, encoder,
                    doc.get("weight_basis", "full"))


def save_model(model: QrfModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), separators=(",", ":")), encoding="utf-8")


def load_model(path, expected_schema_hash: str | None = None) -> QrfModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), expected_schema_hash)
