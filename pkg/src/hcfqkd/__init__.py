"""Single-photon QKD over dual-band hollow-core fiber: channel model, event
simulator, photon-statistics analysis, BB84 processing and GLLP key rates."""

from .bb84 import ReceiverSpec
from .config import RunConfig, load_config
from .fiber import FiberSpec, channel_loss
from .keyrate import KeyRateParams, gllp_rate
from .link import CoPropagationSpec, DetectorSpec, TimeTagStream
from .scenarios import ResultBundle, compare_runs, run_scenario
from .source import SourceSpec

__version__ = "0.1.0"

__all__ = [
    "CoPropagationSpec",
    "DetectorSpec",
    "FiberSpec",
    "KeyRateParams",
    "ReceiverSpec",
    "ResultBundle",
    "RunConfig",
    "SourceSpec",
    "TimeTagStream",
    "channel_loss",
    "compare_runs",
    "gllp_rate",
    "load_config",
    "run_scenario",
]
