"""Versioned JSON model documents.

One file carries everything scoring needs: encoder blocks by name, the head
in primal or dual form, the config echo, the training trace, and the
normalization stats fitted on the training data.
"""

import json
import os
from dataclasses import asdict

import numpy as np

from . import rnn
from .data import NormalizationStats
from .errors import DataError
from .ocsvm import HyperplaneModel
from .svdd import SphereModel
from .trainer import DualHyperplaneHead, DualSphereHead, TrainConfig, TrainedDetector

FORMAT_NAME = "seqsvm-model"
FORMAT_VERSION = 1


def _config_to_dict(cfg: TrainConfig) -> dict:
    doc = asdict(cfg)
    doc["lambda"] = doc.pop("lam")
    return doc


def _config_from_dict(doc: dict) -> TrainConfig:
    doc = dict(doc)
    doc["lam"] = doc.pop("lambda")
    return TrainConfig(**doc)


def _encoder_to_dict(params: rnn.RnnParams) -> dict:
    blocks = {}
    for g, name in enumerate(params.block_names):
        block = {"w_in": params.w_in[g].tolist(), "w_rec": params.w_rec[g].tolist()}
        if params.bias is not None:
            block["bias"] = params.bias[g].tolist()
        blocks[name] = block
    return {"cell": params.cell, "m": params.m, "p": params.p, "blocks": blocks}


def _encoder_from_dict(doc: dict) -> rnn.RnnParams:
    cell = doc["cell"]
    names = rnn.LSTM_BLOCKS if cell == rnn.LSTM else rnn.GRU_BLOCKS
    w_in = np.asarray([doc["blocks"][name]["w_in"] for name in names], dtype=float)
    w_rec = np.asarray([doc["blocks"][name]["w_rec"] for name in names], dtype=float)
    bias = (np.asarray([doc["blocks"][name]["bias"] for name in names], dtype=float)
            if cell == rnn.LSTM else None)
    return rnn.RnnParams(cell, w_in, w_rec, bias)


def _head_to_dict(head) -> dict:
    if isinstance(head, HyperplaneModel):
        return {"kind": "hyperplane", "w": head.w.tolist(), "rho": head.rho}
    if isinstance(head, SphereModel):
        return {"kind": "sphere", "center": head.center.tolist(),
                "r_squared": head.r_squared}
    if isinstance(head, DualHyperplaneHead):
        return {"kind": "dual_hyperplane", "alpha": head.alpha.tolist(),
                "lambda": head.lam, "rho": head.rho, "support": head.support.tolist()}
    if isinstance(head, DualSphereHead):
        return {"kind": "dual_sphere", "alpha": head.alpha.tolist(),
                "lambda": head.lam, "r_squared": head.r_squared,
                "support": head.support.tolist()}
    raise TypeError(f"unknown head type: {type(head).__name__}")


def _head_from_dict(doc: dict):
    kind = doc["kind"]
    if kind == "hyperplane":
        return HyperplaneModel(np.asarray(doc["w"], dtype=float), doc["rho"])
    if kind == "sphere":
        return SphereModel(np.asarray(doc["center"], dtype=float), doc["r_squared"])
    if kind == "dual_hyperplane":
        return DualHyperplaneHead(np.asarray(doc["alpha"], dtype=float), doc["lambda"],
                                  doc["rho"], np.asarray(doc["support"], dtype=float))
    if kind == "dual_sphere":
        return DualSphereHead(np.asarray(doc["alpha"], dtype=float), doc["lambda"],
                              doc["r_squared"], np.asarray(doc["support"], dtype=float))
    raise DataError(f"unknown head kind: {kind!r}")


def model_to_dict(detector: TrainedDetector,
                  stats: NormalizationStats | None = None) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "encoder": _encoder_to_dict(detector.params),
        "head": _head_to_dict(detector.head),
        "config": _config_to_dict(detector.config),
        "trace": [float(v) for v in detector.trace],
        "converged": detector.converged,
        "warnings": list(detector.warnings),
        "normalization": stats.to_dict() if stats is not None else None,
    }


def model_from_dict(doc: dict):
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise DataError("not a seqsvm model document")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model version: {doc.get('version')!r}")
    try:
        detector = TrainedDetector(
            params=_encoder_from_dict(doc["encoder"]),
            head=_head_from_dict(doc["head"]),
            config=_config_from_dict(doc["config"]),
            trace=[float(v) for v in doc["trace"]],
            converged=bool(doc["converged"]),
            warnings=list(doc.get("warnings", [])))
        stats = (NormalizationStats.from_dict(doc["normalization"])
                 if doc.get("normalization") is not None else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model document: {exc}") from exc
    return detector, stats


def save_model(path, detector: TrainedDetector,
               stats: NormalizationStats | None = None) -> None:
    text = json.dumps(model_to_dict(detector, stats), sort_keys=True, indent=2) + "\n"
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"model file not found: {path}") from exc
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    return model_from_dict(doc)
