"""Teleportation of one polarization qubit from the Alice robot to the Bob robot.

Particle 1 is Alice's unknown input. Particles 2 and 3 come from one
singlet pair: 2 goes to Alice and 3 to Bob. Alice Bell-measures (1, 2) and
ships the two-bit outcome over the classical channel. Bob then applies
the matching correction unitary to particle 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .channel import BellOutcomeBits, ClassicalChannel, RobotId
from .errors import DimensionMismatch, MessageLost
from .optics import SourceConfig
from .quantum_core import (
    BellOutcome,
    HV,
    StateVector,
    apply_unitary,
    bell_branches,
    bell_measure,
    bell_state,
    correction_unitary,
    fidelity,
    measure_qubit,
    normalize,
    tensor,
)


class BellBranch(NamedTuple):
    outcome: BellOutcome
    amplitude: complex
    bob_state: StateVector


@dataclass
class TeleportationTranscript:
    input_state: StateVector
    bell_outcome: BellOutcome
    bob_state_before: StateVector
    bob_state_after: Optional[StateVector]
    fidelity: float
    pair_emitted_ns: float
    measured_ns: float
    message_sent_ns: float
    corrected_ns: Optional[float]
    delivered: bool = True

    @property
    def classical_bits(self) -> str:
        return self.bell_outcome.value

    def to_dict(self) -> dict:
        return {
            "input_state": self.input_state.to_pairs(),
            "bell_outcome": self.bell_outcome.name,
            "classical_bits": self.classical_bits,
            "bob_state_before": self.bob_state_before.to_pairs(),
            "bob_state_after": self.bob_state_after.to_pairs() if self.bob_state_after else None,
            "fidelity": self.fidelity,
            "delivered": self.delivered,
            "timestamps": {
                "pair_emitted_ns": self.pair_emitted_ns,
                "measured_ns": self.measured_ns,
                "message_sent_ns": self.message_sent_ns,
                "corrected_ns": self.corrected_ns,
            },
        }


def alice_prepare(a: complex, b: complex) -> StateVector:
    """``a|0> + b|1>`` scaled to unit norm."""
    return normalize([a, b])


def haar_random_state(rng: np.random.Generator) -> StateVector:
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    return normalize(z)


def decompose_in_bell_basis(joint: StateVector) -> list[BellBranch]:
    """Write a 3-qubit state as ``sum_o amp_o |Bell(o)>_12 (x) bob_o``.

    ``amp_o`` is the branch norm, so ``|amp_o|^2`` is the probability of
    outcome ``o``. A branch with zero weight gets ``|0>`` as placeholder.
    """
    if joint.num_qubits != 3:
        raise DimensionMismatch(f"expected a 3-qubit state, got {joint.num_qubits}")
    out = []
    for outcome, vec in bell_branches(joint, 0, 1):
        amp = float(np.linalg.norm(vec))
        bob = normalize(vec) if amp > 1e-15 else StateVector([1, 0])
        out.append(BellBranch(outcome, complex(amp), bob))
    return out


def bob_correct(bob_state: StateVector, o: BellOutcome) -> StateVector:
    return apply_unitary(bob_state, correction_unitary(o), 0)


def run_teleportation(
    input_state: StateVector,
    optics_cfg: SourceConfig,
    ch: ClassicalChannel,
    rng: np.random.Generator,
    start_ns: float = 0.0,
) -> TeleportationTranscript:
    """Run one full protocol round and return its transcript.

    The channel should be owned by this round: Bob consumes the first
    two-bit message delivered to him. Raises :class:`MessageLost` (with the
    uncorrected transcript attached) if the channel drops the message.
    """
    if optics_cfg.emitted_bell_state is not BellOutcome.PsiMinus:
        raise ValueError("teleportation corrections assume a PsiMinus resource pair")
    if input_state.num_qubits != 1:
        raise DimensionMismatch("only single-qubit payloads can be teleported")

    pair_emitted_ns = start_ns + float(rng.exponential(1e9 / optics_cfg.pair_rate_hz))
    joint = tensor(input_state, bell_state(BellOutcome.PsiMinus))
    measured_ns = pair_emitted_ns
    outcome, bob_before = bell_measure(joint, 0, 1, rng)

    msg = ch.message(RobotId.Alice, RobotId.Bob, measured_ns, BellOutcomeBits(outcome.value))
    receipt = ch.send(msg, rng)
    transcript = TeleportationTranscript(
        input_state=input_state,
        bell_outcome=outcome,
        bob_state_before=bob_before,
        bob_state_after=None,
        fidelity=fidelity(bob_before, input_state),
        pair_emitted_ns=pair_emitted_ns,
        measured_ns=measured_ns,
        message_sent_ns=measured_ns,
        corrected_ns=None,
        delivered=False,
    )
    if not receipt.delivered:
        raise MessageLost("correction bits were lost on the classical channel", transcript)

    # Bob acts on the received bits only, never on the simulator's outcome
    received = next(
        m for m in ch.poll(RobotId.Bob, receipt.deliver_at_ns)
        if isinstance(m.payload, BellOutcomeBits)
    )
    decoded = BellOutcome.from_bits(received.payload.bits)
    bob_after = bob_correct(bob_before, decoded)
    transcript.bob_state_after = bob_after
    transcript.fidelity = fidelity(bob_after, input_state)
    transcript.corrected_ns = receipt.deliver_at_ns
    transcript.delivered = True
    return transcript


def alice_particle_bit(transcript: TeleportationTranscript, rng, basis=HV) -> int:
    """Measure Alice's particle 1 after her Bell measurement.

    After projection, particles 1 and 2 are left in the measured Bell
    state, so this bit is independent of the teleported amplitudes.
    """
    post = tensor(bell_state(transcript.bell_outcome), transcript.bob_state_before)
    bit, _ = measure_qubit(post, 0, basis, rng)
    return bit
