"""Exact state vectors for one to three polarization qubits.

Bit 0 is ``|0>`` (horizontal), bit 1 is ``|1>`` (vertical). Amplitudes are
indexed by bit strings with the lowest particle index in the most
significant position, so ``amplitudes[0b011]`` is ``|0>_1 |1>_2 |1>_3``.

All operations return new objects. The only stateful input anywhere is
the ``numpy.random.Generator`` passed explicitly to sampling functions.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import BadIndex, DimensionMismatch, TooManyQubits, ZeroNorm

TOL = 1e-12
MAX_QUBITS = 3
_ZERO_NORM_SQ = 1e-30
_INV_SQRT2 = 1 / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size < 2 or 1 << n != amps.size:
            raise DimensionMismatch(f"length {amps.size} is not 2**n for n >= 1")
        if n > MAX_QUBITS:
            raise TooManyQubits(f"{n} qubits exceeds the maximum of {MAX_QUBITS}")
        norm_sq = float(np.vdot(amps, amps).real)
        if not math.isfinite(norm_sq):
            raise ValueError("amplitudes must be finite")
        if abs(norm_sq - 1.0) > TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm_sq!r}); use normalize()")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def __len__(self):
        return self.amplitudes.size

    def __getitem__(self, index):
        return self.amplitudes[index]

    def __repr__(self):
        terms = ", ".join(f"{complex(a):.6g}" for a in self.amplitudes)
        return f"StateVector([{terms}])"

    def allclose(self, other: StateVector, atol: float = TOL) -> bool:
        """Exact amplitude comparison (global phase *included*)."""
        return len(self) == len(other) and bool(
            np.allclose(self.amplitudes, other.amplitudes, rtol=0, atol=atol)
        )

    def to_pairs(self) -> list[list[float]]:
        return [[float(a.real), float(a.imag)] for a in self.amplitudes]

    @classmethod
    def from_pairs(cls, pairs) -> StateVector:
        return cls([complex(re, im) for re, im in pairs])


StateLike = Union[StateVector, Iterable[complex]]


def normalize(s: StateLike) -> StateVector:
    """Scale ``s`` to unit norm. Raises :class:`ZeroNorm` for a null vector."""
    amps = np.asarray(s.amplitudes if isinstance(s, StateVector) else list(s), dtype=complex)
    norm_sq = float(np.vdot(amps, amps).real)
    if norm_sq < _ZERO_NORM_SQ:
        raise ZeroNorm("cannot normalize a zero vector")
    return StateVector(amps / math.sqrt(norm_sq))


def ket(bits: str) -> StateVector:
    """Computational basis state, e.g. ``ket("01")``."""
    amps = np.zeros(1 << len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps)


@functools.lru_cache(maxsize=256)
def polarization_state(angle_deg: float) -> StateVector:
    """Linear polarization ``cos(t)|0> + sin(t)|1>``."""
    t = math.radians(angle_deg)
    return StateVector([math.cos(t), math.sin(t)])


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product; qubits of ``a`` take the most significant positions."""
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise TooManyQubits(
            f"{a.num_qubits} + {b.num_qubits} qubits exceeds the maximum of {MAX_QUBITS}"
        )
    return StateVector(np.kron(a.amplitudes, b.amplitudes))


@dataclass(frozen=True, eq=False)
class Unitary2:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise DimensionMismatch(f"expected a 2x2 matrix, got shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(2), rtol=0, atol=TOL):
            raise ValueError("matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __repr__(self):
        return f"Unitary2({self.matrix.tolist()})"


IDENTITY = Unitary2(np.eye(2))


def _check_target(s: StateVector, target: int):
    if not 0 <= target < s.num_qubits:
        raise BadIndex(f"qubit {target} out of range for a {s.num_qubits}-qubit state")


def _split(s: StateVector, target: int) -> np.ndarray:
    """View the amplitudes as (target bit, everything else)."""
    left = 1 << target
    return s.amplitudes.reshape(left, 2, -1).transpose(1, 0, 2).reshape(2, -1)


def _join(block: np.ndarray, target: int, n: int) -> np.ndarray:
    left = 1 << target
    return block.reshape(2, left, -1).transpose(1, 0, 2).reshape(-1)


def apply_unitary(s: StateVector, u: Unitary2 | np.ndarray, target: int) -> StateVector:
    _check_target(s, target)
    m = u.matrix if isinstance(u, Unitary2) else Unitary2(u).matrix
    out = _join(m @ _split(s, target), target, s.num_qubits)
    # re-normalize away rounding so long chains stay inside the tolerance
    return normalize(out)


class BellOutcome(enum.Enum):
    """Bell-measurement result; ``value`` is the 2-bit wire encoding."""

    PsiMinus = "00"
    PsiPlus = "01"
    PhiMinus = "10"
    PhiPlus = "11"

    @property
    def bits(self) -> tuple[int, int]:
        return int(self.value[0]), int(self.value[1])

    @classmethod
    def from_bits(cls, bits) -> BellOutcome:
        if not isinstance(bits, str):
            bits = "".join(str(int(b)) for b in bits)
        return cls(bits)


_BELL_AMPLITUDES = {
    BellOutcome.PsiMinus: [0, _INV_SQRT2, -_INV_SQRT2, 0],
    BellOutcome.PsiPlus: [0, _INV_SQRT2, _INV_SQRT2, 0],
    BellOutcome.PhiMinus: [_INV_SQRT2, 0, 0, -_INV_SQRT2],
    BellOutcome.PhiPlus: [_INV_SQRT2, 0, 0, _INV_SQRT2],
}
_BELL_STATES = {o: StateVector(a) for o, a in _BELL_AMPLITUDES.items()}


def bell_states() -> dict[BellOutcome, StateVector]:
    """The four Bell states, keyed in the order Psi-, Psi+, Phi-, Phi+."""
    return dict(_BELL_STATES)


def bell_state(o: BellOutcome) -> StateVector:
    return _BELL_STATES[o]


_CORRECTIONS = {
    BellOutcome.PsiMinus: Unitary2([[-1, 0], [0, -1]]),
    BellOutcome.PsiPlus: Unitary2([[-1, 0], [0, 1]]),
    BellOutcome.PhiMinus: Unitary2([[0, 1], [1, 0]]),
    BellOutcome.PhiPlus: Unitary2([[0, -1], [1, 0]]),
}


def correction_unitary(o: BellOutcome) -> Unitary2:
    """Bob's correction for outcome ``o`` (shared singlet resource)."""
    return _CORRECTIONS[o]


@dataclass(frozen=True)
class MeasurementBasis:
    """Analyzer at ``angle_deg``: outcome 0 is ``|angle>``, 1 its complement."""

    angle_deg: float = 0.0

    @property
    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        t = math.radians(self.angle_deg)
        c, s = math.cos(t), math.sin(t)
        return np.array([c, s], dtype=complex), np.array([-s, c], dtype=complex)


HV = MeasurementBasis(0.0)


def _as_basis(basis) -> MeasurementBasis:
    return basis if isinstance(basis, MeasurementBasis) else MeasurementBasis(float(basis))


def _project(s: StateVector, target: int, basis):
    _check_target(s, target)
    vecs = _as_basis(basis).vectors
    c0 = vecs[0].conj() @ _split(s, target)
    p0 = min(max(float(np.vdot(c0, c0).real), 0.0), 1.0)
    return vecs, p0


def outcome_probabilities(s: StateVector, target: int, basis=HV) -> tuple[float, float]:
    """Born-rule probabilities of bits 0 and 1 on ``target``."""
    _, p0 = _project(s, target, basis)
    return p0, 1.0 - p0


def _collapse(s: StateVector, target: int, vec: np.ndarray) -> StateVector:
    residual = vec.conj() @ _split(s, target)
    return normalize(_join(np.outer(vec, residual), target, s.num_qubits))


def collapse(s: StateVector, target: int, bit: int, basis=HV) -> StateVector:
    """Post-measurement state given outcome ``bit`` (all qubits kept)."""
    _check_target(s, target)
    return _collapse(s, target, _as_basis(basis).vectors[bit])


def measure_qubit(s: StateVector, target: int, basis=HV, rng: np.random.Generator = None):
    """Projective measurement of one qubit in a rotated linear basis.

    Returns ``(bit, post_state)``. Entangled partners collapse with it.
    Exactly one uniform draw is taken from ``rng`` per call.
    """
    if rng is None:
        raise TypeError("measure_qubit requires an explicit rng")
    vecs, p0 = _project(s, target, basis)
    bit = 0 if rng.random() < p0 else 1
    return bit, _collapse(s, target, vecs[bit])


def bell_branches(s: StateVector, q1: int, q2: int) -> list[tuple[BellOutcome, np.ndarray]]:
    """Unnormalized projections ``<Bell(o)|_{q1 q2} s`` for each outcome.

    The residual vectors cover the remaining qubits in their original order.
    """
    n = s.num_qubits
    for q in (q1, q2):
        _check_target(s, q)
    if q1 == q2:
        raise BadIndex("Bell measurement needs two distinct qubits")
    psi = s.amplitudes.reshape([2] * n)
    block = np.moveaxis(psi, (q1, q2), (0, 1)).reshape(4, -1)
    return [(o, b.amplitudes.conj() @ block) for o, b in _BELL_STATES.items()]


def bell_measure(s: StateVector, q1: int, q2: int, rng: np.random.Generator = None):
    """Joint Bell-basis measurement of qubits ``q1`` and ``q2``.

    Returns ``(outcome, residual)``; the residual state of the untouched
    qubit is ``None`` when ``s`` has only the two measured qubits.
    """
    if rng is None:
        raise TypeError("bell_measure requires an explicit rng")
    if s.num_qubits not in (2, 3):
        raise BadIndex("Bell measurement needs a 2- or 3-qubit state")
    branches = bell_branches(s, q1, q2)
    probs = np.array([float(np.vdot(v, v).real) for _, v in branches])
    u = rng.random() * probs.sum()
    k = min(int(np.searchsorted(np.cumsum(probs), u, side="right")), 3)
    outcome, vec = branches[k]
    residual = normalize(vec) if vec.size > 1 else None
    return outcome, residual


def fidelity(x: StateVector, y: StateVector) -> float:
    """``|<x|y>|^2``, insensitive to global phase."""
    if len(x) != len(y):
        raise DimensionMismatch(f"{x.num_qubits}-qubit vs {y.num_qubits}-qubit state")
    f = abs(np.vdot(x.amplitudes, y.amplitudes)) ** 2
    return min(max(float(f), 0.0), 1.0)
