"""Attention-based chroma prediction network.

Three variants share one topology: a boundary branch (two 1-D convs over
the reference line), a luma branch (two 3x3 convs over the collocated
block), scaled dot-product attention fusing boundary features into every
block position, and a 1x1-conv prediction head emitting Cb and Cr.

- ``baseline``:  boundary volume (3, 2N+1), luma block NxN.
- ``scheme_a``:  4:2:0 inputs; a learned stride-2 3x3 conv + ReLU
  down-samples the 2Nx2N luma block to NxN before the luma branch.
- ``scheme_b``:  4:4:4 inputs merged with location maps, giving a
  (5, 2N+1) boundary volume and an NxNx3 luma stack.

Branches are convolutional and the attention is size-agnostic, so one
parameter set serves every supported block size.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import ops
from .optim import Params

VARIANTS = ("baseline", "scheme_a", "scheme_b")

CHECKPOINT_MAGIC = b"CKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    d1: int = 32        # down-sampling conv output channels (scheme_a)
    c_branch: int = 32  # per-branch feature width
    d_attn: int = 16    # attention key/query width
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, "
                             f"expected one of {VARIANTS}")
        if min(self.d1, self.c_branch, self.d_attn) < 1:
            raise ValueError("all widths must be at least 1")

    @property
    def boundary_channels(self) -> int:
        return 5 if self.variant == "scheme_b" else 3

    @property
    def luma_channels(self) -> int:
        return 3 if self.variant == "scheme_b" else 1


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape table, fixed solely by the config."""
    c, d = config.c_branch, config.d_attn
    shapes: dict[str, tuple[int, ...]] = {}
    if config.variant == "scheme_a":
        shapes["down_w"] = (3, 3, 1, config.d1)
        shapes["down_b"] = (config.d1,)
        luma_in = config.d1
    else:
        luma_in = config.luma_channels
    shapes["bound1_w"] = (3, config.boundary_channels, c)
    shapes["bound1_b"] = (c,)
    shapes["bound2_w"] = (3, c, c)
    shapes["bound2_b"] = (c,)
    shapes["luma1_w"] = (3, 3, luma_in, c)
    shapes["luma1_b"] = (c,)
    shapes["luma2_w"] = (3, 3, c, c)
    shapes["luma2_b"] = (c,)
    shapes["query_w"] = (c, d)
    shapes["query_b"] = (d,)
    # No key bias: shifting every key equally adds a per-row constant to
    # the attention logits, which the softmax cancels exactly.
    shapes["key_w"] = (c, d)
    shapes["value_w"] = (c, c)
    shapes["value_b"] = (c,)
    shapes["head1_w"] = (1, 1, 2 * c, c)
    shapes["head1_b"] = (c,)
    shapes["head2_w"] = (1, 1, c, 2)
    shapes["head2_b"] = (2,)
    return shapes


def init_params(config: ModelConfig, dtype=np.float32) -> Params:
    """He-uniform fan-in weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(config.seed)
    params: Params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[:-1]))
            limit = math.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return params


def _check_inputs(config: ModelConfig, s: np.ndarray, x: np.ndarray) -> int:
    """Validate assembled inputs against the variant; return the block side."""
    if s.ndim != 2 or s.shape[0] != config.boundary_channels:
        raise ValueError(
            f"boundary volume shape {s.shape} does not match variant "
            f"{config.variant!r} (expected {config.boundary_channels} channels)"
        )
    if config.variant == "scheme_b":
        if x.ndim != 3 or x.shape[2] != 3 or x.shape[0] != x.shape[1]:
            raise ValueError(f"luma stack shape {x.shape} is not NxNx3")
        n = x.shape[0]
    else:
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise ValueError(f"luma block shape {x.shape} is not square")
        side = x.shape[0]
        if config.variant == "scheme_a":
            if side % 2:
                raise ValueError(f"luma side {side} must be even (2N)")
            n = side // 2
        else:
            n = side
    if s.shape[1] != 2 * n + 1:
        raise ValueError(
            f"boundary length {s.shape[1]} does not match block side {n}"
        )
    return n


def _forward(params: Params, config: ModelConfig, s: np.ndarray, x: np.ndarray):
    """Run the forward schedule; returns (prediction, cache-for-backward)."""
    n = _check_inputs(config, s, x)
    c = config.c_branch
    scale = 1.0 / math.sqrt(config.d_attn)

    # Boundary branch: per-position features along the reference line.
    h1, c_b1 = ops.conv1d(s.T, params["bound1_w"], params["bound1_b"])
    a1, c_b1r = ops.relu(h1)
    h2, c_b2 = ops.conv1d(a1, params["bound2_w"], params["bound2_b"])
    bound, c_b2r = ops.relu(h2)

    # Luma branch, with the learned down-sampling layer for scheme_a.
    xin = x if x.ndim == 3 else x[:, :, None]
    c_d = c_dr = None
    if config.variant == "scheme_a":
        z, c_d = ops.conv2d(xin, params["down_w"], params["down_b"], stride=2)
        xin, c_dr = ops.relu(z)
    g1, c_l1 = ops.conv2d(xin, params["luma1_w"], params["luma1_b"])
    r1, c_l1r = ops.relu(g1)
    g2, c_l2 = ops.conv2d(r1, params["luma2_w"], params["luma2_b"])
    luma, c_l2r = ops.relu(g2)

    # Attention fusion: every block position attends over boundary positions.
    lf = luma.reshape(n * n, c)
    q, c_q = ops.dense(lf, params["query_w"], params["query_b"])
    k, c_k = ops.dense(bound, params["key_w"],
                       np.zeros(config.d_attn, dtype=bound.dtype))
    v, c_v = ops.dense(bound, params["value_w"], params["value_b"])
    scores = (q @ k.T) * scale
    att, c_sm = ops.softmax_rows(scores)
    ctx = att @ v
    fused, c_cat = ops.concat_channels(luma, ctx.reshape(n, n, c), axis=2)

    # Prediction head: 1x1 convs down to the two chroma channels.
    p1, c_h1 = ops.conv2d(fused, params["head1_w"], params["head1_b"])
    p2, c_h1r = ops.relu(p1)
    pred, c_h2 = ops.conv2d(p2, params["head2_w"], params["head2_b"])

    pre_acts = [h1, h2, g1, g2, p1] + ([z] if c_d is not None else [])
    cache = {
        "n": n, "scale": scale, "q": q, "k": k, "v": v, "att": att,
        "c_b1": c_b1, "c_b1r": c_b1r, "c_b2": c_b2, "c_b2r": c_b2r,
        "c_d": c_d, "c_dr": c_dr,
        "c_l1": c_l1, "c_l1r": c_l1r, "c_l2": c_l2, "c_l2r": c_l2r,
        "c_q": c_q, "c_k": c_k, "c_v": c_v, "c_sm": c_sm, "c_cat": c_cat,
        "c_h1": c_h1, "c_h1r": c_h1r, "c_h2": c_h2,
        # Distance of the closest pre-activation to the ReLU kink; finite
        # differencing is only trustworthy when this is well above eps.
        "relu_margin": float(min(np.abs(a).min() for a in pre_acts)),
    }
    return pred, cache


def _backward(params: Params, config: ModelConfig, cache, dpred: np.ndarray) -> Params:
    """Unwind the forward schedule; returns gradients per parameter."""
    n, scale = cache["n"], cache["scale"]
    c = config.c_branch
    grads: Params = {}

    dp2, grads["head2_w"], grads["head2_b"] = ops.conv2d_backward(cache["c_h2"], dpred)
    dp1 = ops.relu_backward(cache["c_h1r"], dp2)
    dfused, grads["head1_w"], grads["head1_b"] = ops.conv2d_backward(cache["c_h1"], dp1)

    dluma, dctx3 = ops.concat_channels_backward(cache["c_cat"], dfused)
    dctx = dctx3.reshape(n * n, c)
    # Attention contractions (ctx = att @ v, scores = q @ k.T * scale) are
    # the only pieces not covered by an op pair; their gradients are the
    # plain matmul transposes.
    datt = dctx @ cache["v"].T
    dv = cache["att"].T @ dctx
    dscores = ops.softmax_rows_backward(cache["c_sm"], datt)
    dq = (dscores @ cache["k"]) * scale
    dk = (dscores.T @ cache["q"]) * scale
    dbound_v, grads["value_w"], grads["value_b"] = ops.dense_backward(cache["c_v"], dv)
    dbound_k, grads["key_w"], _ = ops.dense_backward(cache["c_k"], dk)
    dlf, grads["query_w"], grads["query_b"] = ops.dense_backward(cache["c_q"], dq)
    dluma = dluma + dlf.reshape(n, n, c)
    dbound = dbound_v + dbound_k

    dg2 = ops.relu_backward(cache["c_l2r"], dluma)
    dr1, grads["luma2_w"], grads["luma2_b"] = ops.conv2d_backward(cache["c_l2"], dg2)
    dg1 = ops.relu_backward(cache["c_l1r"], dr1)
    dxin, grads["luma1_w"], grads["luma1_b"] = ops.conv2d_backward(cache["c_l1"], dg1)
    if config.variant == "scheme_a":
        dz = ops.relu_backward(cache["c_dr"], dxin)
        _, grads["down_w"], grads["down_b"] = ops.conv2d_backward(cache["c_d"], dz)

    dh2 = ops.relu_backward(cache["c_b2r"], dbound)
    da1, grads["bound2_w"], grads["bound2_b"] = ops.conv1d_backward(cache["c_b2"], dh2)
    dh1 = ops.relu_backward(cache["c_b1r"], da1)
    _, grads["bound1_w"], grads["bound1_b"] = ops.conv1d_backward(cache["c_b1"], dh1)
    return grads


def forward(params: Params, config: ModelConfig, s: np.ndarray, x: np.ndarray,
            clamp: bool = False) -> np.ndarray:
    """Predict an NxNx2 (Cb, Cr) block.

    Training leaves outputs unclamped; pass ``clamp=True`` for inference,
    which clips predictions to the valid [0, 1] sample range.
    """
    pred, _ = _forward(params, config, s, x)
    if clamp:
        pred = np.clip(pred, 0.0, 1.0)
    return pred


def relu_margin(params: Params, config: ModelConfig, s: np.ndarray,
                x: np.ndarray) -> float:
    """Smallest |pre-activation| feeding any ReLU in one forward pass."""
    _, cache = _forward(params, config, s, x)
    return cache["relu_margin"]


def downsampled_luma(params: Params, config: ModelConfig, x: np.ndarray) -> np.ndarray:
    """Output of scheme_a's learned stride-2 down-sampling layer (with ReLU)."""
    if config.variant != "scheme_a":
        raise ValueError("only scheme_a has a down-sampling layer")
    xin = x[:, :, None] if x.ndim == 2 else x
    z, _ = ops.conv2d(xin, params["down_w"], params["down_b"], stride=2)
    out, _ = ops.relu(z)
    return out


def loss_and_grads(params: Params, config: ModelConfig,
                   batch: list[tuple[np.ndarray, np.ndarray, np.ndarray]]):
    """MSE loss and exact gradients over a uniform-size batch.

    `batch` holds (boundary volume, luma input, NxNx2 target) triples; the
    loss is the mean over batch, pixels and both chroma channels.
    """
    if not batch:
        raise ValueError("empty batch")
    target_shape = batch[0][2].shape
    if any(t.shape != target_shape for _, _, t in batch):
        raise ValueError("batch mixes block sizes")
    inv = 1.0 / len(batch)
    total = 0.0
    grads: Params = {}
    for s, x, target in batch:
        pred, cache = _forward(params, config, s, x)
        loss, c_mse = ops.mse_loss(pred, target)
        total += loss
        dpred = ops.mse_loss_backward(c_mse, inv)
        g = _backward(params, config, cache, dpred)
        if grads:
            for name in grads:
                grads[name] += g[name]
        else:
            grads = g
    return total * inv, grads


def save_checkpoint(params: Params, config: ModelConfig, path) -> None:
    """JSON metadata plus a raw little-endian float32 blob."""
    tensors = [{"name": name, "shape": list(arr.shape)}
               for name, arr in params.items()]
    meta = json.dumps({
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "tensors": tensors,
    }).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(meta)))
        f.write(meta)
        for arr in params.values():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[Params, ModelConfig]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (meta_len,) = struct.unpack_from("<I", data, 4)
    meta_end = 8 + meta_len
    if meta_end > len(data):
        raise ValueError(f"{path}: truncated checkpoint metadata")
    meta = json.loads(data[8:meta_end])
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version "
                         f"{meta.get('format_version')}")
    config = ModelConfig(**meta["config"])
    blob = data[meta_end:]
    expected = sum(int(np.prod(t["shape"])) for t in meta["tensors"]) * 4
    if len(blob) != expected:
        raise ValueError(f"{path}: parameter blob is {len(blob)} bytes, "
                         f"expected {expected}")
    params: Params = {}
    offset = 0
    for t in meta["tensors"]:
        shape = tuple(t["shape"])
        count = int(np.prod(shape))
        params[t["name"]] = np.frombuffer(
            blob, dtype="<f4", count=count, offset=offset
        ).reshape(shape).copy()
        offset += count * 4
    expected_shapes = param_shapes(config)
    actual_shapes = {k: v.shape for k, v in params.items()}
    if actual_shapes != expected_shapes:
        raise ValueError(f"{path}: tensor table does not match config")
    return params, config
