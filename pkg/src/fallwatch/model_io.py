"""Versioned JSON model files (extension ``.fwm.json``).

The format stores architecture metadata, every parameter tensor as nested
decimal arrays, the frozen normalization statistics, the preprocessing
settings, an optional prune mask, and a training fingerprint.  Floats are
written with shortest round-trip repr, keys are sorted and indentation is
fixed, so save -> load -> save is byte-identical.
"""

import hashlib
import json

import numpy as np

from .errors import ModelCorruptError, ModelDimensionError, ModelVersionError
from .network import DenseParams, LstmLayerParams, LstmModel, model_params
from .signals import NormParams, PreprocessConfig

FORMAT_VERSION = 1
MODEL_SUFFIX = ".fwm.json"


def model_hash(model: LstmModel) -> str:
    """SHA-256 over the parameter tensors (architecture-tagged)."""
    digest = hashlib.sha256()
    digest.update(f"{model.window_len}:{model.features}:{model.units}".encode())
    params = model_params(model)
    for key in sorted(params):
        digest.update(key.encode())
        digest.update(np.ascontiguousarray(params[key]).tobytes())
    return digest.hexdigest()


def _layer_dict(layer: LstmLayerParams) -> dict:
    return {"w": layer.w.tolist(), "u": layer.u.tolist(), "b": layer.b.tolist()}


def save_model(model: LstmModel, path, *, mask=None, fingerprint: dict | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "architecture": {
            "window": model.window_len,
            "features": model.features,
            "units": list(model.units),
            "classes": 2,
        },
        "dropout_rate": model.dropout_rate,
        "sample_rate_hz": model.sample_rate_hz,
        "normalization": None if model.norm_params is None else model.norm_params.to_dict(),
        "preprocess": None if model.preprocess is None else model.preprocess.to_dict(),
        "parameters": {
            "layer1": _layer_dict(model.layer1),
            "layer2": _layer_dict(model.layer2),
            "head": {"w": model.head.w.tolist(), "b": model.head.b.tolist()},
        },
        "prune_mask": None
        if mask is None
        else {k: m.astype(int).tolist() for k, m in mask.keep.items()},
        "fingerprint": fingerprint,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_doc(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelCorruptError(f"cannot read model file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelCorruptError(f"model file {path} is not a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")
    return doc


def _check_layer(name, layer: LstmLayerParams, expected_in: int, expected_hidden: int):
    if layer.input_size != expected_in or layer.hidden != expected_hidden:
        raise ModelDimensionError(
            f"{name} tensors are {layer.input_size}->{layer.hidden}, metadata says "
            f"{expected_in}->{expected_hidden}"
        )


def load_model(path) -> LstmModel:
    """Parse and validate a model file; raises a distinct error per failure mode."""
    doc = _read_doc(path)
    try:
        arch = doc["architecture"]
        window = int(arch["window"])
        features = int(arch["features"])
        units = [int(u) for u in arch["units"]]
        classes = int(arch["classes"])
        params = doc["parameters"]
        layer1 = LstmLayerParams(
            w=np.asarray(params["layer1"]["w"], dtype=np.float64),
            u=np.asarray(params["layer1"]["u"], dtype=np.float64),
            b=np.asarray(params["layer1"]["b"], dtype=np.float64),
        )
        layer2 = LstmLayerParams(
            w=np.asarray(params["layer2"]["w"], dtype=np.float64),
            u=np.asarray(params["layer2"]["u"], dtype=np.float64),
            b=np.asarray(params["layer2"]["b"], dtype=np.float64),
        )
        head = DenseParams(
            w=np.asarray(params["head"]["w"], dtype=np.float64),
            b=np.asarray(params["head"]["b"], dtype=np.float64),
        )
        dropout = float(doc["dropout_rate"])
        sample_rate = float(doc.get("sample_rate_hz", 50.0))
        norm = doc.get("normalization")
        preprocess = doc.get("preprocess")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelCorruptError(f"model file {path} is structurally invalid: {exc}") from None

    if len(units) != 2:
        raise ModelDimensionError(f"expected two LSTM layers, metadata lists {units}")
    if classes != 2:
        raise ModelDimensionError(f"expected a 2-class head, metadata says {classes}")
    _check_layer("layer1", layer1, features, units[0])
    _check_layer("layer2", layer2, units[0], units[1])
    if head.w.shape != (classes, units[1]):
        raise ModelDimensionError(
            f"head weights are {head.w.shape}, metadata implies ({classes}, {units[1]})"
        )
    try:
        return LstmModel(
            layer1=layer1,
            layer2=layer2,
            head=head,
            dropout_rate=dropout,
            norm_params=None if norm is None else NormParams.from_dict(norm),
            preprocess=None if preprocess is None else PreprocessConfig.from_dict(preprocess),
            sample_rate_hz=sample_rate,
            window_len=window,
            features=features,
        )
    except Exception as exc:
        raise ModelDimensionError(f"model file {path} fails validation: {exc}") from None


def load_mask(path):
    """The keep-mask stored in a model file, or None. Returned as bool arrays."""
    doc = _read_doc(path)
    raw = doc.get("prune_mask")
    if raw is None:
        return None
    return {k: np.asarray(v, dtype=bool) for k, v in raw.items()}


def load_fingerprint(path) -> dict | None:
    return _read_doc(path).get("fingerprint")
