"""Simulator for teleportation- and key-exchange-based control of a pair of robots."""

from .channel import ChannelConfig, ClassicalChannel, ClassicalMessage, RobotId
from .config import ScenarioConfig, parse_config, serialize_config
from .optics import CoincidenceWindow, DetectorConfig, PhotonRecord, SourceConfig
from .quantum_core import BellOutcome, MeasurementBasis, StateVector, Unitary2
from .scenario import ScenarioReport, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BellOutcome",
    "ChannelConfig",
    "ClassicalChannel",
    "ClassicalMessage",
    "CoincidenceWindow",
    "DetectorConfig",
    "MeasurementBasis",
    "PhotonRecord",
    "RobotId",
    "ScenarioConfig",
    "ScenarioReport",
    "SourceConfig",
    "StateVector",
    "Unitary2",
    "parse_config",
    "run_scenario",
    "serialize_config",
]
