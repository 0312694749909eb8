"""Simulated optical bench for entangled-pair distribution.

A pump source drives down-conversion into polarization-entangled pairs.
Arm A goes to the Alice robot and arm B to the Bob robot. Each arm may
cross a polarizer, then a polarizing beamsplitter: horizontal photons are
transmitted, vertical ones reflected. Each beamsplitter port has a
single-photon counter. A coincidence counter pairs detections across the
two arms whose timestamps fall within a short window.

Polarizers only produce conditional collapse of the joint state. The
correlation they induce can be seen only after coincidence post-selection.
No signaling path exists between the arms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ValidationError
from .quantum_core import (
    BellOutcome,
    MeasurementBasis,
    StateVector,
    bell_state,
    measure_qubit,
)


class Arm(str, enum.Enum):
    A = "A"
    B = "B"


class Port(str, enum.Enum):
    transmitted = "transmitted"
    reflected = "reflected"

    @property
    def bit(self) -> int:
        return 0 if self is Port.transmitted else 1

    @classmethod
    def from_bit(cls, bit: int) -> Port:
        return cls.transmitted if bit == 0 else cls.reflected


@dataclass(frozen=True)
class SourceConfig:
    pair_rate_hz: float = 1e6
    duration_ns: int = 1_000_000
    pump_wavelength_nm: float = 405.0
    down_converted_wavelength_nm: float = 810.0
    emitted_bell_state: BellOutcome = BellOutcome.PsiMinus

    def __post_init__(self):
        if isinstance(self.emitted_bell_state, str):
            object.__setattr__(self, "emitted_bell_state", _parse_bell(self.emitted_bell_state))
        if not self.pair_rate_hz > 0:
            raise ValidationError("must be > 0", "source.pair_rate_hz")
        if isinstance(self.duration_ns, bool) or int(self.duration_ns) != self.duration_ns:
            raise ValidationError("must be an integer", "source.duration_ns")
        if not self.duration_ns > 0:
            raise ValidationError("must be > 0", "source.duration_ns")
        if not (self.pump_wavelength_nm > 0 and self.down_converted_wavelength_nm > 0):
            raise ValidationError("wavelengths must be > 0", "source")
        # degenerate down-conversion: each daughter photon carries half the pump energy
        if abs(self.down_converted_wavelength_nm - 2 * self.pump_wavelength_nm) > 0.1:
            raise ValidationError(
                "must equal 2 x pump_wavelength_nm within 0.1 nm",
                "source.down_converted_wavelength_nm",
            )
        object.__setattr__(self, "duration_ns", int(self.duration_ns))


def _parse_bell(name: str) -> BellOutcome:
    try:
        return BellOutcome[name]
    except KeyError:
        try:
            return BellOutcome(name)
        except ValueError:
            raise ValidationError(
                f"unknown Bell state {name!r}; expected one of "
                f"{[o.name for o in BellOutcome]}",
                "source.emitted_bell_state",
            ) from None


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 1.0
    jitter_sigma_ns: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValidationError("must lie in [0, 1]", "detectors.efficiency")
        if not self.jitter_sigma_ns >= 0.0:
            raise ValidationError("must be >= 0", "detectors.jitter_sigma_ns")


@dataclass(frozen=True)
class CoincidenceWindow:
    window_ns: float = 10.0

    def __post_init__(self):
        if not self.window_ns > 0:
            raise ValidationError("must be > 0", "window.window_ns")


@dataclass(frozen=True)
class PairEmission:
    pair_id: int
    emission_time_ns: float
    joint_state: StateVector


@dataclass(frozen=True)
class PhotonRecord:
    pair_id: int
    arm: Arm
    timestamp_ns: float
    detector_id: str
    port: Port

    @property
    def bit(self) -> int:
        return self.port.bit

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "arm": self.arm.value,
            "timestamp_ns": self.timestamp_ns,
            "detector_id": self.detector_id,
            "port": self.port.value,
            "bit": self.bit,
        }


class PassResult(NamedTuple):
    passed: bool
    state: StateVector


def spdc_emit(cfg: SourceConfig, rng: np.random.Generator) -> list[PairEmission]:
    """Emit pairs as a homogeneous Poisson process over ``[0, duration_ns)``."""
    mean_gap_ns = 1e9 / cfg.pair_rate_hz
    joint = bell_state(cfg.emitted_bell_state)
    pairs = []
    t = 0.0
    while True:
        t += float(rng.exponential(mean_gap_ns))
        if t >= cfg.duration_ns:
            break
        pairs.append(PairEmission(len(pairs), t, joint))
    return pairs


def polarizer_pass(joint: StateVector, target: int, angle_deg: float, rng) -> PassResult:
    """Send qubit ``target`` through an absorbing polarizer at ``angle_deg``.

    On absorption the returned state is the joint state conditioned on the
    orthogonal outcome, which is what the partner photon is left in.
    """
    bit, state = measure_qubit(joint, target, MeasurementBasis(angle_deg), rng)
    return PassResult(bit == 0, state)


def pbs_route(joint: StateVector, target: int, rng) -> tuple[Port, StateVector]:
    """Polarizing beamsplitter: H is transmitted, V is reflected."""
    bit, state = measure_qubit(joint, target, MeasurementBasis(0.0), rng)
    return Port.from_bit(bit), state


def detector_id(arm: Arm | str, port: Port) -> str:
    return f"SPC-{Arm(arm).value}-{'H' if port is Port.transmitted else 'V'}"


def detect(
    arm: Arm | str,
    pair_id: int,
    true_time_ns: float,
    port: Port,
    cfg: DetectorConfig,
    rng: np.random.Generator,
) -> Optional[PhotonRecord]:
    """Single-photon counter: lossy, with optional Gaussian timing jitter.

    Draws exactly one uniform (efficiency) plus one normal when jitter is
    enabled and the photon is registered, so the stream stays aligned.
    """
    if not rng.random() < cfg.efficiency:
        return None
    t = float(true_time_ns)
    if cfg.jitter_sigma_ns > 0:
        t += float(rng.normal(0.0, cfg.jitter_sigma_ns))
    arm = Arm(arm)
    return PhotonRecord(pair_id, arm, t, detector_id(arm, port), port)


def coincidence_match(records_a, records_b, w: CoincidenceWindow | float):
    """Greedy earliest-first pairing of detections within the window.

    Both streams are scanned in time order and the earliest mutually
    unmatched records with ``|dt| <= window_ns`` are paired. On a line
    this greedy scan attains the maximum matching cardinality.
    """
    window = w.window_ns if isinstance(w, CoincidenceWindow) else float(w)
    a = sorted(records_a, key=lambda r: r.timestamp_ns)
    b = sorted(records_b, key=lambda r: r.timestamp_ns)
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        ta, tb = a[i].timestamp_ns, b[j].timestamp_ns
        if abs(ta - tb) <= window:
            out.append((a[i], b[j]))
            i += 1
            j += 1
        elif ta < tb:
            i += 1
        else:
            j += 1
    # already in order of the earlier timestamp: both indices only advance
    return out


def measure_pair(
    emission: PairEmission,
    detectors: DetectorConfig,
    rng: np.random.Generator,
    polarizer_deg: float | None = None,
):
    """Run one emitted pair through both arms of the bench.

    Arm A (qubit 0) optionally crosses a polarizer first; an absorbed
    photon yields no arm-A record. Returns ``(record_a, record_b)``; either
    may be ``None``.
    """
    state = emission.joint_state
    rec_a = None
    a_alive = True
    if polarizer_deg is not None:
        a_alive, state = polarizer_pass(state, 0, polarizer_deg, rng)
    if a_alive:
        port_a, state = pbs_route(state, 0, rng)
    port_b, state = pbs_route(state, 1, rng)
    if a_alive:
        rec_a = detect(Arm.A, emission.pair_id, emission.emission_time_ns, port_a, detectors, rng)
    rec_b = detect(Arm.B, emission.pair_id, emission.emission_time_ns, port_b, detectors, rng)
    return rec_a, rec_b


def malus_probability(polarization_deg: float, analyzer_deg: float) -> float:
    return math.cos(math.radians(polarization_deg - analyzer_deg)) ** 2
