"""Discrete-event simulation of ISP traffic shaping in shared access networks.

Simulates a broadband access network (access switch with per-subscriber
token bucket filters in front of a shared feeder link) loaded with
behavioral HTTP/FTP sources and trace-driven video streams, measures
user-perceived performance at the session layer, and compares shaped
against unshaped configurations with multivariate non-inferiority tests.
"""

__version__ = "0.1.0"

from .engine import Simulator, derive_stream
from .config import ExperimentConfig, parse_config, load_preset, preset_names

__all__ = [
    "Simulator",
    "derive_stream",
    "ExperimentConfig",
    "parse_config",
    "load_preset",
    "preset_names",
    "__version__",
]
