"""Versioned JSON container for trained models.

Every serializable type registers a codec; files carry a top-level
format_version. Floats go through json's repr-based rendering, which
round-trips exactly and keeps serialized bytes deterministic.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import DataError
from ..features import Scaler
from .forest import ForestCls, ForestReg, Tree
from .hmm import DiagGmm, HmmModel
from .kernels import KernelSpec
from .kmeans import Codebook
from .svm import PairMachine, SvmModel

FORMAT_VERSION = 1

_TO: dict[type, tuple[str, callable]] = {}
_FROM: dict[str, callable] = {}


def register(name: str, cls: type, to_dict, from_dict) -> None:
    _TO[cls] = (name, to_dict)
    _FROM[name] = from_dict


def _arr(a: np.ndarray) -> dict:
    a = np.asarray(a)
    kind = "i" if a.dtype.kind in "iu" else "f"
    return {"__array__": kind, "shape": list(a.shape), "data": a.ravel().tolist()}


def _unarr(d: dict) -> np.ndarray:
    dtype = np.int64 if d["__array__"] == "i" else np.float64
    return np.array(d["data"], dtype=dtype).reshape(d["shape"])


def encode(obj):
    """Recursively convert an object tree into JSON-compatible values."""
    if isinstance(obj, np.ndarray):
        return _arr(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {k: encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    for cls, (name, to_dict) in _TO.items():
        if type(obj) is cls:
            return {"__type__": name, **encode(to_dict(obj))}
    return obj


def decode(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return _unarr(obj)
        if "__type__" in obj:
            name = obj["__type__"]
            if name not in _FROM:
                raise DataError(f"unknown serialized type {name!r}")
            body = {k: decode(v) for k, v in obj.items() if k != "__type__"}
            return _FROM[name](body)
        return {k: decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    return obj


def dumps(obj) -> str:
    doc = {"format_version": FORMAT_VERSION, "model": encode(obj)}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def loads(text: str):
    doc = json.loads(text)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported format_version {version!r}")
    return decode(doc["model"])


def save_model(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj) + "\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


register(
    "codebook",
    Codebook,
    lambda c: {"centroids": c.centroids},
    lambda d: Codebook(centroids=d["centroids"]),
)

register(
    "kernel",
    KernelSpec,
    lambda k: {
        "kind": k.kind,
        "gamma": k.gamma,
        "bandwidths": list(k.bandwidths) if k.bandwidths else None,
    },
    lambda d: KernelSpec(
        kind=d["kind"],
        gamma=d["gamma"],
        bandwidths=tuple(d["bandwidths"]) if d["bandwidths"] else None,
    ),
)

register(
    "pair_machine",
    PairMachine,
    lambda m: {
        "pos": m.pos,
        "neg": m.neg,
        "sv_index": m.sv_index,
        "coef": m.coef,
        "bias": m.bias,
    },
    lambda d: PairMachine(
        pos=d["pos"], neg=d["neg"], sv_index=d["sv_index"], coef=d["coef"], bias=d["bias"]
    ),
)

register(
    "svm",
    SvmModel,
    lambda s: {
        "classes": s.classes,
        "kernel": s.kernel,
        "vectors": s.vectors,
        "machines": s.machines,
        "multi_channel": isinstance(s.vectors, list),
    },
    lambda d: SvmModel(
        classes=d["classes"],
        kernel=d["kernel"],
        vectors=d["vectors"] if d.get("multi_channel") else d["vectors"],
        machines=d["machines"],
    ),
)

register(
    "tree",
    Tree,
    lambda t: {
        "feature": t.feature,
        "threshold": t.threshold,
        "left": t.left,
        "right": t.right,
        "value": t.value,
    },
    lambda d: Tree(
        feature=d["feature"],
        threshold=d["threshold"],
        left=d["left"],
        right=d["right"],
        value=d["value"],
    ),
)

register(
    "forest_cls",
    ForestCls,
    lambda f: {"classes": f.classes, "trees": f.trees},
    lambda d: ForestCls(classes=d["classes"], trees=d["trees"]),
)

register(
    "forest_reg",
    ForestReg,
    lambda f: {"trees": f.trees},
    lambda d: ForestReg(trees=d["trees"]),
)

register(
    "diag_gmm",
    DiagGmm,
    lambda g: {"weights": g.weights, "means": g.means, "variances": g.variances},
    lambda d: DiagGmm(weights=d["weights"], means=d["means"], variances=d["variances"]),
)

register(
    "hmm",
    HmmModel,
    lambda h: {"gmms": h.gmms, "trans": h.trans, "ll_history": list(h.ll_history)},
    lambda d: HmmModel(gmms=d["gmms"], trans=d["trans"], ll_history=d["ll_history"]),
)

register(
    "scaler",
    Scaler,
    lambda s: {"mean": s.mean, "std": s.std},
    lambda d: Scaler(mean=d["mean"], std=d["std"]),
)
