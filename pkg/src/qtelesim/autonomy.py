"""The Alice and Bob robots.

Detector polarizations become digital bits (H -> 0, V -> 1). Bits are read
in pairs as opcodes into a command table. Commands drive explicit-Euler
unicycle kinematics. Coincidences can also act as a trigger that starts
the key exchange.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .channel import RobotId
from .errors import IncompleteTranscript, ValidationError
from .optics import Port, PhotonRecord
from .quantum_core import HV, measure_qubit

OPCODES = ("00", "01", "10", "11")
DEFAULT_DT_S = 0.01


@dataclass(frozen=True)
class RobotPose:
    x_m: float = 0.0
    y_m: float = 0.0
    heading_rad: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading_rad", wrap_angle(self.heading_rad))


def wrap_angle(theta: float) -> float:
    """Map an angle onto (-pi, pi]."""
    wrapped = math.remainder(theta, 2 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


@dataclass(frozen=True)
class MotionCommand:
    linear_velocity_mps: float
    angular_velocity_radps: float
    duration_s: float

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValidationError("duration_s must be > 0", "command_table")

    def to_dict(self):
        return {"linear_velocity_mps": self.linear_velocity_mps,
                "angular_velocity_radps": self.angular_velocity_radps,
                "duration_s": self.duration_s}


FORWARD = MotionCommand(0.2, 0.0, 1.0)
TURN_LEFT = MotionCommand(0.0, math.pi / 4, 1.0)
TURN_RIGHT = MotionCommand(0.0, -math.pi / 4, 1.0)
STOP = MotionCommand(0.0, 0.0, 1.0)


def default_command_table() -> dict[str, MotionCommand]:
    return {"00": FORWARD, "01": TURN_LEFT, "10": TURN_RIGHT, "11": STOP}


def make_command_table(entries: Mapping) -> dict[str, MotionCommand]:
    """Validate a table mapping every 2-bit opcode to a command."""
    table = {}
    for key, cmd in entries.items():
        key = _opcode(key)
        table[key] = cmd if isinstance(cmd, MotionCommand) else MotionCommand(**cmd)
    missing = [op for op in OPCODES if op not in table]
    if missing:
        raise ValidationError(f"missing opcodes {missing}", "command_table")
    return table


@dataclass(frozen=True)
class TriggerConfig:
    min_coincidences: int = 5
    interval_ns: float = 10_000.0

    def __post_init__(self):
        if isinstance(self.min_coincidences, bool) or int(self.min_coincidences) != self.min_coincidences:
            raise ValidationError("must be an integer", "trigger.min_coincidences")
        if not self.min_coincidences > 0:
            raise ValidationError("must be > 0", "trigger.min_coincidences")
        if not self.interval_ns > 0:
            raise ValidationError("must be > 0", "trigger.interval_ns")


def _opcode(bits) -> str:
    s = bits if isinstance(bits, str) else "".join(str(int(b)) for b in bits)
    if s not in OPCODES:
        raise ValueError(f"not a 2-bit opcode: {bits!r}")
    return s


def bits_from_polarization(source) -> int:
    """H / transmitted -> 0, V / reflected -> 1."""
    if isinstance(source, PhotonRecord):
        return source.bit
    if isinstance(source, Port):
        return source.bit
    if source in ("H", "h", Port.transmitted.value):
        return 0
    if source in ("V", "v", Port.reflected.value):
        return 1
    if source in (0, 1):
        return int(source)
    raise ValueError(f"cannot read a polarization from {source!r}")


def bit_stream(sources: Iterable) -> list[int]:
    return [bits_from_polarization(s) for s in sources]


def bits_from_teleport(transcript, rng: np.random.Generator) -> int:
    """Read Bob's corrected photon in the H/V basis."""
    if not transcript.delivered or transcript.bob_state_after is None:
        raise IncompleteTranscript("Bob never received the correction bits")
    bit, _ = measure_qubit(transcript.bob_state_after, 0, HV, rng)
    return bit


def opcodes(bits: Iterable[int]) -> list[str]:
    """Group a bit stream into 2-bit opcodes; an odd trailing bit is dropped."""
    bits = list(bits)
    return [f"{bits[i]}{bits[i + 1]}" for i in range(0, len(bits) - 1, 2)]


def command_lookup(table: Mapping[str, MotionCommand], bits) -> MotionCommand:
    return table[_opcode(bits)]


def apply_command(pose: RobotPose, cmd: MotionCommand, dt_s: float) -> RobotPose:
    """One explicit-Euler unicycle step, heading updated first."""
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")
    heading = pose.heading_rad + cmd.angular_velocity_radps * dt_s
    return RobotPose(
        pose.x_m + cmd.linear_velocity_mps * math.cos(heading) * dt_s,
        pose.y_m + cmd.linear_velocity_mps * math.sin(heading) * dt_s,
        heading,
    )


def _pair_time(pair) -> float:
    if isinstance(pair, (int, float)):
        return float(pair)
    return max(r.timestamp_ns for r in pair)


def entanglement_trigger(matched_pairs, cfg: TriggerConfig) -> Optional[float]:
    """Earliest time at which the last ``interval_ns`` held enough coincidences.

    A coincidence is registered when its later photon arrives.
    """
    times = sorted(_pair_time(p) for p in matched_pairs)
    k = cfg.min_coincidences
    for end in range(k - 1, len(times)):
        if times[end] - times[end - k + 1] <= cfg.interval_ns:
            return times[end]
    return None


@dataclass
class Robot:
    """A robot advanced by its own clock; records every integration step."""

    robot_id: RobotId
    command_table: dict = field(default_factory=default_command_table)
    pose: RobotPose = field(default_factory=RobotPose)
    dt_s: float = DEFAULT_DT_S
    t_s: float = 0.0
    trajectory: list = field(default_factory=list)

    def __post_init__(self):
        self.robot_id = RobotId(self.robot_id)
        if not self.trajectory:
            self.trajectory.append((self.t_s, self.pose))

    def execute(self, cmd: MotionCommand):
        steps = max(1, round(cmd.duration_s / self.dt_s))
        dt = cmd.duration_s / steps
        for _ in range(steps):
            self.pose = apply_command(self.pose, cmd, dt)
            self.t_s += dt
            self.trajectory.append((self.t_s, self.pose))

    def run_bits(self, bits: Iterable[int], max_commands: int | None = None) -> list[str]:
        done = []
        for op in opcodes(bits):
            if max_commands is not None and len(done) >= max_commands:
                break
            self.execute(command_lookup(self.command_table, op))
            done.append(op)
        return done

    def trajectory_rows(self):
        for t, p in self.trajectory:
            yield (t, self.robot_id.value, p.x_m, p.y_m, p.heading_rad)
