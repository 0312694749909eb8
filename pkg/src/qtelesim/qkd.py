"""Polarization key exchange between the Alice and Bob robots.

Alice's polarizer encodes each bit at one of four angles. Bob's analyzer
sits at 0 or 45 degrees ahead of a two-detector beamsplitter. The
detector for the analyzer-aligned component reports 0 and the
orthogonal detector reports 1. Bases are announced publicly for sifting.
A sample of the sifted key is then sacrificed to estimate the error rate.

The eavesdropper is a plain intercept-resend attacker using the same two
analyzer settings as Bob.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyKey, LengthMismatch
from .quantum_core import MeasurementBasis, StateVector, measure_qubit, polarization_state

DETECTION_THRESHOLD = 0.125
BOB_ANGLES = (0, 45)


class Basis(str, enum.Enum):
    Rectilinear = "Rectilinear"
    Diagonal = "Diagonal"

    @property
    def angle_deg(self) -> int:
        """Analyzer setting that reads this basis."""
        return 0 if self is Basis.Rectilinear else 45


ENCODING = {
    (Basis.Rectilinear, 0): 0,
    (Basis.Rectilinear, 1): 90,
    (Basis.Diagonal, 0): 45,
    (Basis.Diagonal, 1): -45,
}


@dataclass(frozen=True)
class AliceEmission:
    index: int
    bit: int
    basis: Basis
    angle_deg: int
    state: StateVector

    @classmethod
    def encode(cls, index: int, bit: int, basis: Basis) -> AliceEmission:
        angle = ENCODING[(basis, bit)]
        return cls(index, bit, basis, angle, polarization_state(angle))

    def to_dict(self):
        return {"index": self.index, "bit": self.bit, "basis": self.basis.value,
                "angle_deg": self.angle_deg}


@dataclass(frozen=True)
class BobMeasurement:
    index: int
    basis_angle_deg: int
    bit: int

    def __post_init__(self):
        if self.basis_angle_deg not in BOB_ANGLES:
            raise ValueError(f"Bob's analyzer only supports {BOB_ANGLES}, got {self.basis_angle_deg}")

    def to_dict(self):
        return {"index": self.index, "basis_angle_deg": self.basis_angle_deg, "bit": self.bit}


@dataclass(frozen=True)
class SiftedKey:
    indices: tuple[int, ...]
    alice_bits: str
    bob_bits: str

    def __post_init__(self):
        if not len(self.indices) == len(self.alice_bits) == len(self.bob_bits):
            raise LengthMismatch("indices and key strings differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class QberReport:
    sample_size: int
    error_count: int
    qber: float
    eve_detected: bool

    def to_dict(self):
        return {"sample_size": self.sample_size, "error_count": self.error_count,
                "qber": self.qber, "eve_detected": self.eve_detected}


def alice_send(n: int, rng: np.random.Generator) -> list[AliceEmission]:
    if n <= 0:
        raise ValueError("n must be positive")
    bits = rng.integers(0, 2, size=n)
    bases = rng.integers(0, 2, size=n)
    return [
        AliceEmission.encode(i, int(bit), Basis.Diagonal if basis else Basis.Rectilinear)
        for i, (bit, basis) in enumerate(zip(bits, bases))
    ]


def bob_measure(em: AliceEmission | StateVector, rng: np.random.Generator, index: int | None = None):
    """Measure one incoming photon with a uniformly chosen analyzer setting.

    ``em`` may be Alice's emission or a (possibly tampered) bare state, in
    which case ``index`` must be given.
    """
    if isinstance(em, AliceEmission):
        state = em.state
        index = em.index if index is None else index
    else:
        state = em
        if index is None:
            raise ValueError("index is required when measuring a bare state")
    angle = BOB_ANGLES[int(rng.integers(0, 2))]
    bit, _ = measure_qubit(state, 0, MeasurementBasis(angle), rng)
    return BobMeasurement(index, angle, bit)


def eve_intercept_resend(emissions, rng: np.random.Generator) -> list[StateVector]:
    """Measure each photon in a random {0, 45} basis and resend the eigenstate seen."""
    out = []
    for em in emissions:
        state = em.state if isinstance(em, AliceEmission) else em
        angle = BOB_ANGLES[int(rng.integers(0, 2))]
        bit, _ = measure_qubit(state, 0, MeasurementBasis(angle), rng)
        out.append(polarization_state(angle + 90 * bit))
    return out


def sift(emissions, measurements) -> SiftedKey:
    """Keep only rounds in which Alice and Bob used matching bases."""
    if len(emissions) != len(measurements):
        raise LengthMismatch(f"{len(emissions)} emissions vs {len(measurements)} measurements")
    idx, a_bits, b_bits = [], [], []
    for em, m in zip(emissions, measurements):
        if em.index != m.index:
            raise LengthMismatch(f"index mismatch: {em.index} vs {m.index}")
        if em.basis.angle_deg == m.basis_angle_deg:
            idx.append(em.index)
            a_bits.append(str(em.bit))
            b_bits.append(str(m.bit))
    return SiftedKey(tuple(idx), "".join(a_bits), "".join(b_bits))


def estimate_qber(key: SiftedKey, sample_fraction: float, rng: np.random.Generator):
    """Disclose a random sample of the sifted key and measure its error rate.

    Returns ``(report, remaining_key)``. The disclosed positions are
    removed from the remaining key.
    """
    if not 0 < sample_fraction <= 1:
        raise ValueError("sample_fraction must lie in (0, 1]")
    n = len(key)
    if n == 0:
        raise EmptyKey("cannot estimate QBER on an empty key")
    k = min(n, math.ceil(sample_fraction * n))
    sampled = set(int(i) for i in rng.choice(n, size=k, replace=False))
    errors = sum(key.alice_bits[i] != key.bob_bits[i] for i in sampled)
    qber = errors / k
    keep = [i for i in range(n) if i not in sampled]
    remaining = SiftedKey(
        tuple(key.indices[i] for i in keep),
        "".join(key.alice_bits[i] for i in keep),
        "".join(key.bob_bits[i] for i in keep),
    )
    return QberReport(k, errors, qber, qber > DETECTION_THRESHOLD), remaining


def bits_to_hex(bits: str) -> str:
    """Hex encoding of a bit string, zero-padded on the right to a nibble."""
    if not bits:
        return ""
    padded = bits + "0" * (-len(bits) % 4)
    return "".join(f"{int(padded[i:i + 4], 2):x}" for i in range(0, len(padded), 4))


def run_exchange(n: int, rng_alice, rng_bob, rng_eve=None):
    """Alice sends ``n`` photons, optionally through Eve, and Bob measures them."""
    emissions = alice_send(n, rng_alice)
    states = eve_intercept_resend(emissions, rng_eve) if rng_eve is not None else [e.state for e in emissions]
    measurements = [bob_measure(s, rng_bob, index=e.index) for e, s in zip(emissions, states)]
    return emissions, measurements
