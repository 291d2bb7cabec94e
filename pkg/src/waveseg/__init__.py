"""Multi-branch multispectral segmentation with a lossless wavelet pyramid."""

from .errors import ContractError, DimensionError, FormatError
from .model import Model, ModelConfig, build_model
from .raster import BandTag, LabelMap, Raster, TileSpec
from .tensor import Parameter, Tensor
from .train import TrainConfig

__all__ = [
    "BandTag",
    "ContractError",
    "DimensionError",
    "FormatError",
    "LabelMap",
    "Model",
    "ModelConfig",
    "Parameter",
    "Raster",
    "Tensor",
    "TileSpec",
    "TrainConfig",
    "build_model",
]

__version__ = "0.1.0"
