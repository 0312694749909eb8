"""Classical inter-robot channel with fixed latency and send-time loss."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .errors import ValidationError


class RobotId(str, enum.Enum):
    Alice = "Alice"
    Bob = "Bob"


@dataclass(frozen=True)
class BellOutcomeBits:
    bits: str

    def __post_init__(self):
        if len(self.bits) != 2 or set(self.bits) - {"0", "1"}:
            raise ValueError(f"expected a 2-bit string, got {self.bits!r}")

    def to_dict(self):
        return {"type": "bell_outcome_bits", "bits": self.bits}


@dataclass(frozen=True)
class KeyBits:
    bits: str
    purpose: str = "key"

    def __post_init__(self):
        if set(self.bits) - {"0", "1"}:
            raise ValueError("key payload must be a bit string")

    def to_dict(self):
        return {"type": "key_bits", "purpose": self.purpose, "bits": self.bits}


@dataclass(frozen=True)
class TriggerSignal:
    reason: str = "entanglement"

    def to_dict(self):
        return {"type": "trigger", "reason": self.reason}


Payload = Union[BellOutcomeBits, KeyBits, TriggerSignal]


@dataclass(frozen=True)
class ClassicalMessage:
    msg_id: int
    sender: RobotId
    recipient: RobotId
    sent_at_ns: float
    payload: Payload

    def __post_init__(self):
        if not self.sent_at_ns >= 0:
            raise ValueError("sent_at_ns must be non-negative")

    def to_dict(self):
        return {
            "msg_id": self.msg_id,
            "sender": RobotId(self.sender).value,
            "recipient": RobotId(self.recipient).value,
            "sent_at_ns": self.sent_at_ns,
            "payload": self.payload.to_dict(),
        }


@dataclass(frozen=True)
class ChannelConfig:
    latency_ns: float = 50.0
    loss_probability: float = 0.0

    def __post_init__(self):
        if not self.latency_ns >= 0:
            raise ValidationError("must be >= 0", "channel.latency_ns")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValidationError("must lie in [0, 1]", "channel.loss_probability")


class DeliveryReceipt(NamedTuple):
    delivered: bool
    deliver_at_ns: float


@dataclass
class ClassicalChannel:
    """Single-owner message queue.

    Loss is decided once per message at send time. Latency is constant, so
    messages from one sender arrive in the order of their send times.
    """

    config: ChannelConfig = field(default_factory=ChannelConfig)
    _queue: list = field(default_factory=list, repr=False)
    _used_ids: set = field(default_factory=set, repr=False)
    _next_id: int = 0

    def message(self, sender, recipient, sent_at_ns, payload) -> ClassicalMessage:
        """Build a message carrying the next free id on this channel."""
        while self._next_id in self._used_ids:
            self._next_id += 1
        msg = ClassicalMessage(self._next_id, RobotId(sender), RobotId(recipient), sent_at_ns, payload)
        self._next_id += 1
        return msg

    def send(self, msg: ClassicalMessage, rng: np.random.Generator) -> DeliveryReceipt:
        if msg.msg_id in self._used_ids:
            raise ValueError(f"duplicate msg_id {msg.msg_id}")
        self._used_ids.add(msg.msg_id)
        deliver_at = msg.sent_at_ns + self.config.latency_ns
        if rng.random() < self.config.loss_probability:
            return DeliveryReceipt(False, deliver_at)
        self._queue.append((deliver_at, msg.msg_id, msg))
        return DeliveryReceipt(True, deliver_at)

    def poll(self, recipient, now_ns: float) -> list[ClassicalMessage]:
        """Remove and return messages for ``recipient`` deliverable by ``now_ns``."""
        recipient = RobotId(recipient)
        ready = [e for e in self._queue if e[2].recipient is recipient and e[0] <= now_ns]
        if ready:
            taken = {id(e) for e in ready}
            self._queue = [e for e in self._queue if id(e) not in taken]
        ready.sort(key=lambda e: (e[0], e[1]))
        return [e[2] for e in ready]

    def pending(self) -> int:
        return len(self._queue)
