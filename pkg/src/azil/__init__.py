"""Acoustic zones of interest from head orientation.

Gyroscope integration, a seated-conversation simulator, zone targets,
rule-based and neural zone localizers, speaker counting, evaluation metrics
and a small beamformer steering study.
"""

from .config import RunConfig, load_config, parse_config, save_config
from .errors import ConfigError, DataError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "RunConfig", "load_config", "parse_config", "save_config", "__version__"]
