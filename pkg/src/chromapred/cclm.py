"""Linear-model chroma predictor used as comparison baseline and oracle.

A single affine model per chroma channel is fit by ordinary least squares
on the boundary luma/chroma pairs, then applied to the (down-sampled)
luma block.  This is deliberately the strongest deterministic linear
baseline rather than a codec-specific two-point rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import BlockSample, pool_luma_boundary


@dataclass
class LinearModel:
    alpha: float  # slope, dimensionless
    beta: float   # offset, normalized sample units


def derive_lm(luma_bound: np.ndarray, chroma_bound: np.ndarray) -> LinearModel:
    """Least-squares fit of chroma on luma boundary samples.

    Degenerate (near-constant) luma boundaries fall back to alpha = 0 and
    beta = mean(chroma).
    """
    luma = np.asarray(luma_bound, dtype=np.float64)
    chroma = np.asarray(chroma_bound, dtype=np.float64)
    if luma.shape != chroma.shape:
        raise ValueError(f"length mismatch {luma.shape} vs {chroma.shape}")
    if luma.ndim != 1 or luma.size < 2:
        raise ValueError("need at least two boundary samples")
    lm = luma.mean()
    cm = chroma.mean()
    var = np.mean((luma - lm) ** 2)
    if var < 1e-12:
        return LinearModel(alpha=0.0, beta=float(cm))
    cov = np.mean((luma - lm) * (chroma - cm))
    alpha = cov / var
    return LinearModel(alpha=float(alpha), beta=float(cm - alpha * lm))


def predict_lm(model: LinearModel, luma_block: np.ndarray) -> np.ndarray:
    """Apply the affine model, clamped to the valid [0, 1] range."""
    return np.clip(model.alpha * np.asarray(luma_block, dtype=np.float64)
                   + model.beta, 0.0, 1.0)


def _mean_pool_2x2(block: np.ndarray) -> np.ndarray:
    h, w = block.shape
    return block.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def predict_block(sample: BlockSample) -> tuple[np.ndarray, np.ndarray]:
    """Linear-model Cb and Cr predictions for one extracted sample.

    Under 4:2:0 the luma boundary is average-pooled to chroma resolution
    and the luma block is 2x2 mean down-sampled; under 4:4:4 both already
    align with the chroma geometry.  Boundary pairs are matched index-wise.
    """
    if sample.chroma_format == 420:
        luma_bound = pool_luma_boundary(sample.b_y.values)
        luma_block = _mean_pool_2x2(sample.luma_block)
    else:
        luma_bound = sample.b_y.values
        luma_block = sample.luma_block
    pred_cb = predict_lm(derive_lm(luma_bound, sample.b_cb.values), luma_block)
    pred_cr = predict_lm(derive_lm(luma_bound, sample.b_cr.values), luma_block)
    return pred_cb, pred_cr
