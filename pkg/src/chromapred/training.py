"""Deterministic training loop with periodic validation.

Batches are uniform in block size, cycling through the sizes present in
the training set so every size contributes.  All randomness (parameter
init and shuffling) flows from the single seed in the config, so a rerun
with identical inputs reproduces the loss curve bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockSample, assemble_inputs, required_chroma_format
from .model import ModelConfig, forward, init_params, loss_and_grads
from .optim import Params, adam_init, adam_step

Assembled = tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass
class TrainConfig:
    variant: str
    batch_size: int = 16
    learning_rate: float = 1e-4
    max_steps: int = 2000
    seed: int = 0
    val_interval: int = 200
    train_path: str | None = None  # provenance only, recorded in logs
    val_path: str | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.val_interval < 1:
            raise ValueError("val_interval must be at least 1")


@dataclass
class TrainResult:
    params: Params             # best-validation parameters
    model_config: ModelConfig
    log: list[dict] = field(default_factory=list)
    final_params: Params = field(default_factory=dict)
    best_step: int = 0
    best_val_loss: float | None = None


def _assemble_set(samples: list[BlockSample], variant: str) -> dict[int, list[Assembled]]:
    groups: dict[int, list[Assembled]] = {}
    for sample in samples:
        s, x = assemble_inputs(sample, variant)
        target = np.stack([sample.target_cb, sample.target_cr], axis=-1)
        groups.setdefault(sample.n, []).append((s, x, target))
    return groups


def _check_format(samples: list[BlockSample], variant: str, what: str) -> None:
    fmt = required_chroma_format(variant)
    bad = {s.chroma_format for s in samples} - {fmt}
    if bad:
        raise ValueError(
            f"{what} set holds {sorted(bad)} samples but variant "
            f"{variant!r} consumes {fmt}"
        )


class _Shuffler:
    """Endless deterministic stream of indices, reshuffled per pass."""

    def __init__(self, count: int, rng: np.random.Generator):
        self.count = count
        self.rng = rng
        self.order = rng.permutation(count)
        self.pos = 0

    def draw(self, k: int) -> list[int]:
        out: list[int] = []
        while len(out) < k:
            if self.pos == self.count:
                self.order = self.rng.permutation(self.count)
                self.pos = 0
            out.append(int(self.order[self.pos]))
            self.pos += 1
        return out


def validation_loss(params: Params, config: ModelConfig,
                    assembled: list[Assembled]) -> float:
    """Mean MSE across both chroma channels, inference mode (clamped)."""
    if not assembled:
        raise ValueError("empty validation set")
    total = 0.0
    for s, x, target in assembled:
        pred = forward(params, config, s, x, clamp=True)
        total += float(np.mean((pred - target) ** 2, dtype=np.float64))
    return total / len(assembled)


def train(config: TrainConfig, train_samples: list[BlockSample],
          val_samples: list[BlockSample]) -> TrainResult:
    """Run the optimizer; returns best-validation params and the step log.

    The log holds one record per step ({"step", "loss"}), extended with
    "val_loss" at every validation.  Without any validation samples the
    best checkpoint is simply the final parameter state.
    """
    if not train_samples:
        raise ValueError("empty training set")
    _check_format(train_samples, config.variant, "training")
    _check_format(val_samples, config.variant, "validation")

    model_config = ModelConfig(variant=config.variant, seed=config.seed)
    params = init_params(model_config)
    state = adam_init(params, lr=config.learning_rate)

    groups = _assemble_set(train_samples, config.variant)
    val_assembled = [t for g in _assemble_set(val_samples, config.variant).values()
                     for t in g]
    sizes = sorted(groups)
    rng = np.random.default_rng(config.seed)
    shufflers = {n: _Shuffler(len(groups[n]), rng) for n in sizes}

    best_params = {k: v.copy() for k, v in params.items()}
    best_val: float | None = None
    best_step = 0
    validated = False
    log: list[dict] = []

    for step in range(1, config.max_steps + 1):
        n = sizes[(step - 1) % len(sizes)]
        batch = [groups[n][i] for i in shufflers[n].draw(config.batch_size)]
        loss, grads = loss_and_grads(params, model_config, batch)
        params, state = adam_step(params, grads, state)
        record: dict = {"step": step, "loss": float(loss)}
        if val_assembled and (step % config.val_interval == 0
                              or step == config.max_steps):
            val = validation_loss(params, model_config, val_assembled)
            record["val_loss"] = val
            validated = True
            if best_val is None or val < best_val:
                best_val = val
                best_step = step
                best_params = {k: v.copy() for k, v in params.items()}
        log.append(record)

    if not validated:
        best_params = {k: v.copy() for k, v in params.items()}
        best_step = config.max_steps
    return TrainResult(
        params=best_params,
        model_config=model_config,
        log=log,
        final_params=params,
        best_step=best_step,
        best_val_loss=best_val,
    )
