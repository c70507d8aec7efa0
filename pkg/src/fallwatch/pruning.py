"""Post-training magnitude pruning and mask-preserving fine-tuning.

Weights are ranked globally by absolute value across every prunable tensor
(all LSTM input/recurrent matrices plus the dense head matrix; biases are
never pruned) and the smallest ceil(target * N) are zeroed.  A per-tensor
mode is available for ablations.
"""

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .errors import InvalidSpecError
from .model_io import model_hash
from .network import LstmModel, model_params, with_params
from .optim import TrainConfig, train

PRUNABLE_KEYS = ("layer1.w", "layer1.u", "layer2.w", "layer2.u", "head.w")
MAX_SPARSITY = 0.9


@dataclass(frozen=True)
class PruneMask:
    """Boolean keep-masks, one per prunable tensor. True = weight stays active."""

    keep: dict
    target_sparsity: float

    def n_total(self) -> int:
        return sum(int(m.size) for m in self.keep.values())

    def n_pruned(self) -> int:
        return sum(int((~m).sum()) for m in self.keep.values())

    def achieved_sparsity(self) -> float:
        return self.n_pruned() / self.n_total()


@dataclass(frozen=True)
class CompressedModel:
    model: LstmModel
    mask: PruneMask
    source_hash: str


def _as_model(m) -> LstmModel:
    return m.model if isinstance(m, CompressedModel) else m


def global_magnitude_keep(tensors: dict, target_sparsity: float) -> dict:
    """Keep-masks zeroing the globally smallest ceil(target * N) magnitudes.

    Ties break deterministically by tensor order, then flat index.
    """
    if not 0.0 <= target_sparsity <= MAX_SPARSITY:
        raise InvalidSpecError(
            f"target sparsity must be in [0, {MAX_SPARSITY}], got {target_sparsity}"
        )
    names = list(tensors.keys())
    sizes = [tensors[k].size for k in names]
    total = sum(sizes)
    n_prune = math.ceil(target_sparsity * total)
    keep = {k: np.ones(tensors[k].shape, dtype=bool) for k in names}
    if n_prune == 0:
        return keep
    mags = np.concatenate([np.abs(tensors[k]).ravel() for k in names])
    tensor_idx = np.concatenate([np.full(s, i) for i, s in enumerate(sizes)])
    flat_idx = np.concatenate([np.arange(s) for s in sizes])
    order = np.lexsort((flat_idx, tensor_idx, mags))
    for pos in order[:n_prune]:
        keep[names[tensor_idx[pos]]].ravel()[flat_idx[pos]] = False
    return keep


def per_tensor_magnitude_keep(tensors: dict, target_sparsity: float) -> dict:
    """Ablation variant: each tensor independently loses its smallest fraction."""
    return {
        k: global_magnitude_keep({k: t}, target_sparsity)[k] for k, t in tensors.items()
    }


def magnitude_prune(model: LstmModel, target_sparsity: float, *, per_tensor: bool = False) -> CompressedModel:
    """Zero the least-significant weights; non-masked values are untouched."""
    params = {k: a.copy() for k, a in model_params(model).items()}
    prunable = {k: params[k] for k in PRUNABLE_KEYS}
    rank = per_tensor_magnitude_keep if per_tensor else global_magnitude_keep
    keep = rank(prunable, target_sparsity)
    for k in PRUNABLE_KEYS:
        params[k] = np.where(keep[k], params[k], 0.0)
    return CompressedModel(
        model=with_params(model, params),
        mask=PruneMask(keep=keep, target_sparsity=target_sparsity),
        source_hash=model_hash(model),
    )


def sparsity(model_or_compressed) -> float:
    """Fraction of prunable weights that are exactly zero."""
    params = model_params(_as_model(model_or_compressed))
    total = sum(params[k].size for k in PRUNABLE_KEYS)
    zeros = sum(int((params[k] == 0.0).sum()) for k in PRUNABLE_KEYS)
    return zeros / total


def finetune(compressed: CompressedModel, split, config: TrainConfig):
    """Continue training with pruned positions frozen at zero.

    Returns (compressed model with fine-tuned weights, history).
    """
    trained, history = train(compressed.model, split, config, keep_mask=compressed.mask.keep)
    return dc_replace(compressed, model=trained), history


def mac_count(model_or_compressed, *, skip_masked: bool = False) -> int:
    """Multiply-accumulates for one window forward pass (weight multiplies only)."""
    model = _as_model(model_or_compressed)
    params = model_params(model)
    steps = model.window_len
    total = 0
    for key in PRUNABLE_KEYS:
        weights = params[key]
        n = int(np.count_nonzero(weights)) if skip_masked else weights.size
        total += n if key == "head.w" else n * steps
    return total


def mac_fraction(model_or_compressed) -> float:
    return mac_count(model_or_compressed, skip_masked=True) / mac_count(model_or_compressed)
