"""End-to-end model: index, space, and wave branches fused by adaptive voting.

Wiring per forward pass:

1. The raster feeds two routes: remote-sensing index maps at full
   resolution, and a wavelet pyramid whose coarsest approximation feeds both
   the wave-token blocks and the patch-attention encoder.
2. Channel attention gates each branch's feature map immediately before its
   class head; index heads are per-class affine maps of the (gated) scalar
   index.
3. The wave/space coarse class logits are restored to full resolution
   through the inverse wavelet path, injecting the pyramid's stored detail
   coefficients through zero-initialized learnable channel adapters; the
   ablated variant uses plain nearest-neighbor upsampling instead.
4. Per-domain softmax, then the voting head superposes the probability maps
   with adaptive convex weights (or uniform/majority baselines).
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import apply_checkpoint, load_checkpoint, save_checkpoint
from .errors import ContractError
from .fusion import (
    ChannelAttention,
    FusionState,
    superpose,
    superpose_soft,
    vote_average,
    vote_majority,
)
from .indices import compute_index, index_logits, make_index_head
from .nn import Linear
from .raster import Raster
from .space import SpaceEncoder
from .tensor import Parameter, Tensor
from .wave import WaveBlock
from .wavelet import WaveletLevel, encode_pyramid, idwt2

FUSION_MODES = ("adaptive", "average", "majority")


@dataclass
class ModelConfig:
    n_classes: int = 6
    in_channels: int = 4
    tile: int = 32
    levels: int = 2
    pad: str = "none"
    detail_skip: str = "identity"
    wave_blocks: int = 2
    wave_dim: int = 16
    wave_phase: str = "content"
    space_patch: int = 4
    space_dim: int = 32
    space_heads: int = 2
    space_layers: int = 2
    attn_reduction: int = 4
    fusion_mode: str = "adaptive"
    indices: tuple = ("ndvi",)
    inverse_wave_block: bool = True
    channel_attention: bool = True
    use_space: bool = True
    use_wave: bool = True
    use_index: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if not (self.use_space or self.use_wave or (self.use_index and self.indices)):
            raise ContractError("at least one domain branch must be enabled")
        if self.fusion_mode not in FUSION_MODES:
            raise ContractError(f"unknown fusion mode {self.fusion_mode!r}")
        # Token-mixing weights are sized by the coarse grid, so the model
        # always demands dyadic tiles; reflect padding only serves the
        # standalone wavelet API.
        if self.tile % (1 << self.levels):
            raise ContractError(f"tile {self.tile} not divisible by 2^{self.levels}")
        coarse = self.tile >> self.levels
        if self.use_space and coarse % self.space_patch:
            raise ContractError(
                f"coarse grid {coarse} not divisible by patch {self.space_patch}"
            )
        if self.space_dim % self.space_heads:
            raise ContractError(
                f"space dim {self.space_dim} not divisible by heads {self.space_heads}"
            )
        if self.use_index and not self.indices:
            raise ContractError("index branch enabled but no indices configured")
        if self.detail_skip not in ("identity", "learned"):
            raise ContractError(f"unknown detail skip mode {self.detail_skip!r}")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype in ("float64", "f64") else np.float32

    @property
    def coarse(self):
        return self.tile >> self.levels

    def domain_names(self):
        names = []
        if self.use_space:
            names.append("space")
        if self.use_wave:
            names.append("wave")
        if self.use_index:
            names += [f"index:{spec if isinstance(spec, str) else ':'.join(spec)}"
                      for spec in self.indices]
        return names


@dataclass
class ForwardResult:
    state: FusionState
    fused_soft: Tensor
    coarse_logits: dict = field(default_factory=dict)
    full_logits: dict = field(default_factory=dict)

    @property
    def domain_probs(self):
        return self.state.domain_probs


def _grid_to_tokens(grid: Tensor) -> Tensor:
    c, h, w = grid.shape
    return grid.reshape(c, h * w).transpose()


def _tokens_to_grid(tokens: Tensor, h, w) -> Tensor:
    n, c = tokens.shape
    return tokens.transpose().reshape(c, h, w)


def _reduction_for(channels, preferred):
    return preferred if channels % preferred == 0 else 1


class Model:
    """Built branches plus the fusion head; see ``build_model``."""

    def __init__(self, config: ModelConfig, seed=0):
        self.config = config
        cfg = config
        dtype = cfg.np_dtype
        rng = np.random.default_rng(seed)
        coarse = cfg.coarse
        n_wave_tokens = coarse * coarse

        self.space_encoder = None
        self.space_gate = None
        self.space_head = None
        if cfg.use_space:
            self.space_encoder = SpaceEncoder(
                "space", cfg.in_channels, cfg.space_patch, cfg.space_dim,
                cfg.space_heads, cfg.space_layers, coarse, coarse, rng, dtype,
            )
            if cfg.channel_attention:
                self.space_gate = ChannelAttention(
                    "space.ca", cfg.space_dim,
                    _reduction_for(cfg.space_dim, cfg.attn_reduction), rng, dtype,
                )
            self.space_head = Linear("space.head", cfg.space_dim, cfg.n_classes, rng, dtype)

        self.wave_embed = None
        self.wave_blocks = []
        self.wave_gate = None
        self.wave_head = None
        if cfg.use_wave:
            self.wave_embed = Linear("wave.embed", cfg.in_channels, cfg.wave_dim, rng, dtype)
            self.wave_blocks = [
                WaveBlock(f"wave.block{i}", n_wave_tokens, cfg.wave_dim, rng, dtype,
                          phase_mode=cfg.wave_phase)
                for i in range(cfg.wave_blocks)
            ]
            if cfg.channel_attention:
                self.wave_gate = ChannelAttention(
                    "wave.ca", cfg.wave_dim,
                    _reduction_for(cfg.wave_dim, cfg.attn_reduction), rng, dtype,
                )
            self.wave_head = Linear("wave.head", cfg.wave_dim, cfg.n_classes, rng, dtype)

        self.index_gates = []
        self.index_heads = []
        if cfg.use_index:
            for spec in cfg.indices:
                tag = spec if isinstance(spec, str) else "_".join(spec)
                if cfg.channel_attention:
                    self.index_gates.append(
                        ChannelAttention(f"index.{tag}.ca", 1, 1, rng, dtype)
                    )
                else:
                    self.index_gates.append(None)
                self.index_heads.append(
                    make_index_head(f"index.{tag}.head", cfg.n_classes, rng, dtype)
                )

        # Zero-initialized adapters and identity-initialized detail maps draw
        # nothing from the rng, so the upsampling ablation leaves every other
        # weight bit-identical.
        self.detail_maps = None
        if cfg.inverse_wave_block and cfg.detail_skip == "learned":
            self.detail_maps = [
                Parameter(f"lwped.detail{lvl}", np.eye(cfg.in_channels), dtype=dtype)
                for lvl in range(cfg.levels)
            ]
        self.space_skips = []
        self.wave_skips = []
        if cfg.inverse_wave_block:
            for lvl in range(cfg.levels):
                if cfg.use_space:
                    self.space_skips.append(Parameter(
                        f"space.skip{lvl}",
                        np.zeros((cfg.in_channels, cfg.n_classes)), dtype=dtype,
                    ))
                if cfg.use_wave:
                    self.wave_skips.append(Parameter(
                        f"wave.skip{lvl}",
                        np.zeros((cfg.in_channels, cfg.n_classes)), dtype=dtype,
                    ))

        self.vote_logits = None
        if cfg.fusion_mode == "adaptive":
            self.vote_logits = Parameter(
                "fusion.vote_logits", np.zeros(len(cfg.domain_names())), dtype=dtype
            )

        names = [p.name for p in self.parameters()]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ContractError(f"duplicate parameter names: {dupes}")

    # -- parameter plumbing -------------------------------------------------

    def parameters(self):
        params = []
        if self.space_encoder is not None:
            params += self.space_encoder.parameters()
            if self.space_gate is not None:
                params += self.space_gate.parameters()
            params += self.space_head.parameters()
        if self.wave_embed is not None:
            params += self.wave_embed.parameters()
            for block in self.wave_blocks:
                params += block.parameters()
            if self.wave_gate is not None:
                params += self.wave_gate.parameters()
            params += self.wave_head.parameters()
        for gate, head in zip(self.index_gates, self.index_heads):
            if gate is not None:
                params += gate.parameters()
            params += head.parameters()
        params += self.space_skips + self.wave_skips
        if self.detail_maps is not None:
            params += self.detail_maps
        if self.vote_logits is not None:
            params.append(self.vote_logits)
        return params

    def state_dict(self):
        return OrderedDict((p.name, p.data) for p in self.parameters())

    def save(self, path):
        save_checkpoint(self.state_dict(), path)

    def load(self, source):
        state = load_checkpoint(source) if not isinstance(source, dict) else source
        apply_checkpoint(self.parameters(), state)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    # -- forward --------------------------------------------------------------

    def _check_input(self, raster: Raster):
        cfg = self.config
        if raster.height != cfg.tile or raster.width != cfg.tile:
            raise ContractError(
                f"model was built for {cfg.tile}x{cfg.tile} tiles, "
                f"got {raster.height}x{raster.width}"
            )
        if raster.n_bands != cfg.in_channels:
            raise ContractError(
                f"model expects {cfg.in_channels} bands, raster has {raster.n_bands}"
            )

    def _restore(self, coarse_logits: Tensor, pyramid, adapters) -> Tensor:
        """Coarse class logits -> full resolution, with or without detail injection."""
        cfg = self.config
        if cfg.inverse_wave_block:
            current = coarse_logits
            n_levels = len(pyramid.levels)
            for i, (level, adapter, pads) in enumerate(zip(
                reversed(pyramid.levels), reversed(adapters), reversed(pyramid.pads)
            )):
                details = []
                for band in (level.lh, level.hl, level.hh):
                    c, h, w = band.shape
                    tokens = _grid_to_tokens(band)
                    if self.detail_maps is not None:
                        tokens = tokens @ self.detail_maps[n_levels - 1 - i]
                    details.append(_tokens_to_grid(tokens @ adapter, h, w))
                current = idwt2(WaveletLevel(current, *details))
                if pads[0]:
                    current = current[:, :-1, :]
                if pads[1]:
                    current = current[:, :, :-1]
            return current
        out = coarse_logits.repeat_pixels(1 << cfg.levels)
        h, w = pyramid.original_extents
        if out.shape[1] != h or out.shape[2] != w:
            out = out[:, :h, :w]
        return out

    def _space_coarse(self, ll: Tensor) -> Tensor:
        cfg = self.config
        tokens = self.space_encoder(ll)
        grid_h = cfg.coarse // cfg.space_patch
        grid = _tokens_to_grid(tokens, grid_h, grid_h)
        if self.space_gate is not None:
            grid = self.space_gate(grid)
        logits = self.space_head(_grid_to_tokens(grid))
        return _tokens_to_grid(logits, grid_h, grid_h).repeat_pixels(cfg.space_patch)

    def _wave_coarse(self, ll: Tensor) -> Tensor:
        cfg = self.config
        tokens = self.wave_embed(_grid_to_tokens(ll))
        for block in self.wave_blocks:
            tokens = block(tokens)
        grid = _tokens_to_grid(tokens, cfg.coarse, cfg.coarse)
        if self.wave_gate is not None:
            grid = self.wave_gate(grid)
        logits = self.wave_head(_grid_to_tokens(grid))
        return _tokens_to_grid(logits, cfg.coarse, cfg.coarse)

    def index_maps(self, raster: Raster):
        """Index values per configured spec; overridable for corruption studies."""
        return [compute_index(raster, spec).values for spec in self.config.indices]

    def _index_logits(self, values, gate, head, dtype) -> Tensor:
        gated = Tensor(values[None, :, :], dtype=dtype)
        if gate is not None:
            gated = gate(gated)
        return index_logits(gated[0], head)

    def forward(self, raster: Raster) -> ForwardResult:
        self._check_input(raster)
        cfg = self.config
        dtype = cfg.np_dtype
        x = Tensor(raster.data.transpose(2, 0, 1), dtype=dtype)
        pyramid = encode_pyramid(x, cfg.levels, pad=cfg.pad)
        ll = pyramid.coarsest_ll

        probs = []
        names = []
        coarse_logits = {}
        full_logits = {}

        if cfg.use_space:
            coarse = self._space_coarse(ll)
            coarse_logits["space"] = coarse
            full = self._restore(coarse, pyramid, self.space_skips)
            full_logits["space"] = full
            probs.append(full.softmax(axis=0))
            names.append("space")

        if cfg.use_wave:
            coarse = self._wave_coarse(ll)
            coarse_logits["wave"] = coarse
            full = self._restore(coarse, pyramid, self.wave_skips)
            full_logits["wave"] = full
            probs.append(full.softmax(axis=0))
            names.append("wave")

        if cfg.use_index:
            for spec, values, gate, head in zip(
                cfg.indices, self.index_maps(raster), self.index_gates, self.index_heads
            ):
                name = f"index:{spec if isinstance(spec, str) else ':'.join(spec)}"
                full = self._index_logits(np.asarray(values, dtype=dtype), gate, head, dtype)
                full_logits[name] = full
                probs.append(full.softmax(axis=0))
                names.append(name)

        state = FusionState(
            domain_probs=probs,
            vote_logits=self.vote_logits,
            domain_names=names,
        )
        return ForwardResult(
            state=state,
            fused_soft=superpose_soft(state),
            coarse_logits=coarse_logits,
            full_logits=full_logits,
        )

    def predict(self, raster: Raster):
        result = self.forward(raster)
        mode = self.config.fusion_mode
        if mode == "majority":
            return vote_majority(result.state, n_classes=self.config.n_classes)
        if mode == "average":
            return vote_average(result.state, n_classes=self.config.n_classes)
        return superpose(result.state, n_classes=self.config.n_classes)


def build_model(config: ModelConfig, seed=0) -> Model:
    return Model(config, seed=seed)
