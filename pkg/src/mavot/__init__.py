"""Memory-augmented visual object tracking with foreground/background memories."""
from .errors import (ConfigError, ContractError, InitError, MavotError, StateError,
                     WeightFormatError)
from .features import ConvStackExtractor, Extractor, SurrogateExtractor, gaussian_mask
from .geometry import BoundingBox, RoiTransform, crop_resize
from .memory import MemoryConfig, MemoryModule, Skipped, Written
from .tracker import Heatmap, Tracker, TrackerConfig
from .weights import ExtractorWeights, load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "ConfigError", "ContractError", "ConvStackExtractor", "Extractor",
    "ExtractorWeights", "Heatmap", "InitError", "MavotError", "MemoryConfig", "MemoryModule",
    "RoiTransform", "Skipped", "StateError", "SurrogateExtractor", "Tracker", "TrackerConfig",
    "WeightFormatError", "Written", "crop_resize", "gaussian_mask", "load_weights", "save_weights",
]
