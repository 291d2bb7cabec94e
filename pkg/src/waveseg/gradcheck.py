"""Central finite-difference verification of analytic gradients.

Every check builds a scalar loss from a block in float64, reads the analytic
gradients off the tape, then re-evaluates the loss with each leaf entry
nudged by +/-h.  The comparison metric is
max |g_analytic - g_fd| / max(1, |g_fd|).
"""

from __future__ import annotations

import numpy as np

from .data import synth_dataset
from .fusion import ChannelAttention, FusionState, superpose_soft
from .indices import index_logits, make_index_head
from .model import Model, ModelConfig
from .space import AttentionBlock
from .tensor import Tensor
from .train import TrainConfig, cross_entropy
from .wave import WaveBlock

FD_STEP = 1e-4
TOLERANCE = 1e-4


def fd_gradient(fn, arr, h=FD_STEP):
    """Central finite differences of scalar ``fn`` wrt every entry of ``arr``."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        hi = fn()
        flat[i] = keep - h
        lo = fn()
        flat[i] = keep
        gflat[i] = (hi - lo) / (2 * h)
    return grad


def max_relative_error(analytic, numeric):
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def check_leaves(loss_fn, leaves):
    """Compare tape gradients against finite differences for every leaf.

    ``loss_fn`` must rebuild the forward pass from the leaves' current buffers
    and return the loss Tensor.
    """
    for leaf in leaves:
        leaf.zero_grad()
    loss_fn().backward()
    analytic = [np.array(leaf.grad) for leaf in leaves]
    worst = 0.0
    for leaf, g_tape in zip(leaves, analytic):
        g_fd = fd_gradient(lambda: loss_fn().item(), leaf.data)
        worst = max(worst, max_relative_error(g_tape, g_fd))
    return worst


def _weighted(out: Tensor, rng):
    """Project a tensor to a scalar with a fixed random weighting."""
    w = Tensor(rng.standard_normal(out.shape))
    return (out * w).sum()


def check_wave_block(seed=0):
    rng = np.random.default_rng(seed)
    block = WaveBlock("blk", n_tokens=4, dim=3, rng=rng, dtype=np.float64)
    # Move off the zero-phase init so the phase path is actually exercised.
    block.phase_proj.weight.data = 0.3 * rng.standard_normal((3, 3))
    x = Tensor(rng.standard_normal((4, 3)), requires_grad=True, dtype=np.float64)
    leaves = [x] + block.parameters()
    return check_leaves(lambda: _weighted(block(x), np.random.default_rng(seed + 2)), leaves)


def check_attention_block(seed=0):
    rng = np.random.default_rng(seed)
    block = AttentionBlock("blk", dim=8, heads=2, rng=rng, dtype=np.float64)
    x = Tensor(rng.standard_normal((4, 8)), requires_grad=True, dtype=np.float64)
    leaves = [x] + block.parameters()
    return check_leaves(lambda: _weighted(block(x), np.random.default_rng(seed + 2)), leaves)


def check_channel_attention(seed=0):
    rng = np.random.default_rng(seed)
    gate = ChannelAttention("ca", channels=4, reduction=2, rng=rng, dtype=np.float64)
    x = Tensor(rng.standard_normal((4, 5, 5)), requires_grad=True, dtype=np.float64)
    leaves = [x] + gate.parameters()
    return check_leaves(lambda: _weighted(gate(x), np.random.default_rng(seed + 2)), leaves)


def check_superpose_soft(seed=0):
    from .tensor import Parameter

    rng = np.random.default_rng(seed)
    raw = [
        Tensor(rng.standard_normal((3, 4, 4)), requires_grad=True, dtype=np.float64)
        for _ in range(3)
    ]
    logits = Parameter("vote", rng.standard_normal(3), dtype=np.float64)

    def loss():
        state = FusionState(
            domain_probs=[r.softmax(axis=0) for r in raw], vote_logits=logits
        )
        return _weighted(superpose_soft(state), np.random.default_rng(seed + 2))

    return check_leaves(loss, raw + [logits])


def check_index_logits(seed=0):
    rng = np.random.default_rng(seed)
    head = make_index_head("head", n_classes=4, rng=rng, dtype=np.float64)
    values = rng.uniform(-1, 1, size=(6, 6))
    return check_leaves(
        lambda: _weighted(index_logits(values, head), np.random.default_rng(seed + 2)),
        head.parameters(),
    )


def small_model_config():
    """A full wiring at reduced width: every branch, 16x16 input."""
    return ModelConfig(
        n_classes=3,
        tile=16,
        levels=2,
        wave_blocks=1,
        wave_dim=8,
        space_patch=4,
        space_dim=8,
        space_heads=1,
        space_layers=1,
        attn_reduction=4,
        dtype="float64",
    )


def check_full_model(seed=0):
    model = Model(small_model_config(), seed=seed)
    data = synth_dataset(seed + 1, 1, 16, n_classes=3)
    raster, labels = data[0]
    tcfg = TrainConfig(seed=seed)

    def loss():
        result = model.forward(raster)
        total = cross_entropy(result.fused_soft, labels, 3)
        for probs in result.domain_probs:
            total = total + tcfg.aux_weight * cross_entropy(probs, labels, 3)
        return total

    return check_leaves(loss, model.parameters())


ALL_CHECKS = (
    ("wave_block", check_wave_block),
    ("attention_block", check_attention_block),
    ("channel_attention", check_channel_attention),
    ("superpose_soft", check_superpose_soft),
    ("index_logits", check_index_logits),
    ("full_model", check_full_model),
)


def run_all(seed=0):
    """[(name, max relative error)] for every block check."""
    return [(name, fn(seed)) for name, fn in ALL_CHECKS]
