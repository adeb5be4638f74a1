"""Reference producer of prediction files for the pagewise engine."""

from .formats import AdapterError, read_manifest, write_predictions
from .produce import PREDICTORS, AdapterConfig, load_hook, produce

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "PREDICTORS",
    "load_hook",
    "produce",
    "read_manifest",
    "write_predictions",
]
