"""Training loop: cross-entropy on the fused distribution, adaptive-moment
optimizer with decoupled weight decay, polynomial learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .raster import LabelMap
from .tensor import Tensor

LOG_EPS = 1e-12


@dataclass
class TrainConfig:
    steps: int = 2000
    batch: int = 4
    lr: float = 1e-3
    weight_decay: float = 0.01
    poly_power: float = 0.9
    seed: int = 0
    aux_weight: float = 0.4

    def __post_init__(self):
        if self.lr <= 0:
            raise ContractError(f"learning rate must be positive, got {self.lr}")
        if self.steps < 0:
            raise ContractError(f"steps must be non-negative, got {self.steps}")

    def lr_at(self, step):
        """Polynomial decay: lr * (1 - step/steps) ** power."""
        return self.lr * (1.0 - step / self.steps) ** self.poly_power


class AdamW:
    """Adaptive moments with decoupled weight decay."""

    def __init__(self, params, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            update = m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data
            p.data = np.ascontiguousarray((p.data - lr * update).astype(p.data.dtype))


def one_hot(labels: LabelMap, n_classes, dtype) -> np.ndarray:
    eye = np.eye(n_classes, dtype=dtype)
    return np.ascontiguousarray(eye[labels.labels].transpose(2, 0, 1))


def cross_entropy(probs: Tensor, labels: LabelMap, n_classes) -> Tensor:
    """Mean pixelwise negative log-likelihood of a probability map."""
    if probs.shape[1:] != labels.labels.shape:
        raise ContractError(
            f"probability extents {probs.shape} do not match labels {labels.labels.shape}"
        )
    mask = Tensor(one_hot(labels, n_classes, probs.dtype))
    picked = (probs * mask).sum(axis=0)
    n_pixels = picked.size
    return -((picked + LOG_EPS).log().sum() * (1.0 / n_pixels))


def train(model, data, tcfg: TrainConfig, aux=True, on_step=None):
    """Optimize ``model`` in place; returns the per-step loss curve.

    Deterministic for a fixed seed: batch order, every forward pass, and the
    optimizer state depend only on the seed and configs.
    """
    if tcfg.steps == 0:
        return []
    if not data:
        raise ContractError("training needs a non-empty dataset")
    rng = np.random.default_rng(tcfg.seed)
    optimizer = AdamW(model.parameters(), weight_decay=tcfg.weight_decay)
    k = model.config.n_classes
    losses = []
    order = []
    for step in range(tcfg.steps):
        batch = []
        for _ in range(min(tcfg.batch, len(data))):
            if not order:
                order = list(rng.permutation(len(data)))
            batch.append(data[order.pop()])

        model.zero_grad()
        total = None
        for raster, labels in batch:
            result = model.forward(raster)
            loss = cross_entropy(result.fused_soft, labels, k)
            if aux and tcfg.aux_weight:
                for probs in result.domain_probs:
                    loss = loss + tcfg.aux_weight * cross_entropy(probs, labels, k)
            total = loss if total is None else total + loss
        total = total * (1.0 / len(batch))
        value = total.item()
        if not np.isfinite(value):
            raise RuntimeError(f"non-finite training loss at step {step}")
        total.backward()
        optimizer.step(tcfg.lr_at(step))
        losses.append(value)
        if on_step is not None:
            on_step(step, value)
    return losses
