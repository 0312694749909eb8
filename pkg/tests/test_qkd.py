import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from conftest import within_sigmas
from qtelesim.errors import EmptyKey, LengthMismatch
from qtelesim.qkd import (
    DETECTION_THRESHOLD,
    AliceEmission,
    Basis,
    BobMeasurement,
    SiftedKey,
    alice_send,
    bits_to_hex,
    bob_measure,
    estimate_qber,
    eve_intercept_resend,
    run_exchange,
    sift,
)
from qtelesim.quantum_core import StateVector, fidelity, polarization_state

S = 1 / math.sqrt(2)


def p_outcome(state_deg, analyzer_deg, bit):
    """Malus/Born probability for a linear polarization against a two-port analyzer."""
    c = math.cos(math.radians(state_deg - analyzer_deg)) ** 2
    return c if bit == 0 else 1 - c


def exact_intercept_resend_qber():
    """Enumerate (Alice basis, bit, Eve basis, Eve bit, Bob bit) on sifted rounds."""
    angles = {("R", 0): 0, ("R", 1): 90, ("D", 0): 45, ("D", 1): -45}
    setting = {"R": 0, "D": 45}
    err = total = Fraction(0)
    for basis, bit, eve_basis, eve_bit, bob_bit in product("RD", (0, 1), "RD", (0, 1), (0, 1)):
        w = Fraction(1, 8)  # Alice basis, Alice bit, Eve basis
        p_eve = p_outcome(angles[(basis, bit)], setting[eve_basis], eve_bit)
        resent = setting[eve_basis] + 90 * eve_bit
        p_bob = p_outcome(resent, setting[basis], bob_bit)  # Bob's basis equals Alice's: sifted
        w *= Fraction(p_eve).limit_denominator(10**6) * Fraction(p_bob).limit_denominator(10**6)
        total += w
        if bob_bit != bit:
            err += w
    return err / total


def test_enumeration_oracle_gives_quarter():
    assert exact_intercept_resend_qber() == Fraction(1, 4)


class TestAliceSend:
    def test_encoding_table(self):
        assert AliceEmission.encode(0, 0, Basis.Rectilinear).angle_deg == 0
        assert AliceEmission.encode(0, 1, Basis.Rectilinear).angle_deg == 90
        assert AliceEmission.encode(0, 0, Basis.Diagonal).angle_deg == 45
        assert AliceEmission.encode(0, 1, Basis.Diagonal).angle_deg == -45

    def test_states(self):
        np.testing.assert_allclose(AliceEmission.encode(0, 0, Basis.Rectilinear).state.amplitudes, [1, 0])
        np.testing.assert_allclose(AliceEmission.encode(0, 0, Basis.Diagonal).state.amplitudes, [S, S])
        np.testing.assert_allclose(AliceEmission.encode(0, 1, Basis.Diagonal).state.amplitudes, [S, -S])

    def test_uniform_bases(self, rng):
        ems = alice_send(100_000, rng)
        frac = sum(e.basis is Basis.Diagonal for e in ems) / len(ems)
        assert frac == pytest.approx(0.5, abs=0.01)
        assert [e.index for e in ems[:5]] == [0, 1, 2, 3, 4]

    def test_positive_n(self, rng):
        with pytest.raises(ValueError):
            alice_send(0, rng)


class TestBobMeasure:
    def test_aligned_zero(self, rng):
        em = AliceEmission.encode(0, 0, Basis.Rectilinear)
        for _ in range(200):
            m = bob_measure(em, rng)
            if m.basis_angle_deg == 0:
                assert m.bit == 0

    def test_aligned_one(self, rng):
        em = AliceEmission.encode(0, 1, Basis.Rectilinear)
        assert all(m.bit == 1 for m in (bob_measure(em, rng) for _ in range(200)) if m.basis_angle_deg == 0)

    def test_conjugate_basis_random(self, rng):
        em = AliceEmission.encode(0, 1, Basis.Diagonal)
        ms = [m for m in (bob_measure(em, rng) for _ in range(40_000)) if m.basis_angle_deg == 0]
        assert within_sigmas(sum(m.bit == 0 for m in ms), len(ms), 0.5)

    def test_bare_state_needs_index(self, rng):
        with pytest.raises(ValueError):
            bob_measure(polarization_state(0), rng)
        assert bob_measure(polarization_state(0), rng, index=9).index == 9

    def test_only_two_settings(self):
        with pytest.raises(ValueError):
            BobMeasurement(0, 90, 0)


class TestSift:
    def test_all_match(self):
        ems = [AliceEmission.encode(i, i % 2, Basis.Rectilinear) for i in range(6)]
        ms = [BobMeasurement(i, 0, i % 2) for i in range(6)]
        assert len(sift(ems, ms)) == 6

    def test_none_match(self):
        ems = [AliceEmission.encode(i, 0, Basis.Rectilinear) for i in range(6)]
        ms = [BobMeasurement(i, 45, 0) for i in range(6)]
        assert len(sift(ems, ms)) == 0

    def test_fraction(self, rng):
        ems, ms = run_exchange(100_000, rng, rng)
        assert len(sift(ems, ms)) / 100_000 == pytest.approx(0.5, abs=0.01)

    def test_ideal_keys_identical(self, rng):
        key = sift(*run_exchange(5000, rng, rng))
        assert key.alice_bits == key.bob_bits

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            sift([AliceEmission.encode(0, 0, Basis.Rectilinear)], [])

    def test_index_mismatch(self):
        with pytest.raises(LengthMismatch):
            sift([AliceEmission.encode(0, 0, Basis.Rectilinear)], [BobMeasurement(1, 0, 0)])


class TestEve:
    def test_same_basis_preserves_state(self):
        em = AliceEmission.encode(0, 1, Basis.Diagonal)
        for seed in range(50):
            rng = np.random.default_rng(seed)
            # peek at Eve's basis choice with a cloned stream
            eve_angle = (0, 45)[int(np.random.default_rng(seed).integers(0, 2))]
            out = eve_intercept_resend([em], rng)[0]
            if eve_angle == 45:
                assert fidelity(out, em.state) == pytest.approx(1.0, abs=1e-12)

    def test_offset_basis_resends_hv(self, rng):
        em = AliceEmission.encode(0, 0, Basis.Diagonal)
        outs = eve_intercept_resend([em] * 20_000, rng)
        h = v = 0
        for s in outs:
            if fidelity(s, polarization_state(0)) > 1 - 1e-12:
                h += 1
            elif fidelity(s, polarization_state(90)) > 1 - 1e-12:
                v += 1
        # half the time Eve picks 0 deg and then sees H or V with equal odds
        assert within_sigmas(h, 20_000, 0.25) and within_sigmas(v, 20_000, 0.25)

    def test_monte_carlo_matches_oracle(self):
        rng = np.random.default_rng(99)
        key = sift(*run_exchange(40_000, rng, rng, rng))
        assert len(key) >= 10_000
        errors = sum(a != b for a, b in zip(key.alice_bits, key.bob_bits))
        assert errors / len(key) == pytest.approx(float(exact_intercept_resend_qber()), abs=0.02)


class TestEstimateQber:
    def test_identical(self, rng):
        key = SiftedKey((0, 1, 2, 3), "0110", "0110")
        rep, rest = estimate_qber(key, 0.5, rng)
        assert rep.qber == 0 and not rep.eve_detected
        assert rep.sample_size == 2 and len(rest) == 2

    def test_complementary(self, rng):
        rep, rest = estimate_qber(SiftedKey((0, 1, 2), "000", "111"), 1.0, rng)
        assert rep.qber == 1 and rep.eve_detected and len(rest) == 0

    def test_ceil_sample_and_removal(self, rng):
        key = SiftedKey(tuple(range(0, 20, 2)), "0101010101", "0101010101")
        rep, rest = estimate_qber(key, 0.25, rng)
        assert rep.sample_size == 3
        assert set(rest.indices) < set(key.indices) and len(rest) == 7

    def test_threshold_is_deterministic(self):
        key = SiftedKey(tuple(range(8)), "00000000", "00000001")
        reps = [estimate_qber(key, 1.0, np.random.default_rng(s))[0] for s in range(5)]
        assert all(r.qber == 0.125 and not r.eve_detected for r in reps)
        assert DETECTION_THRESHOLD == 0.125

    def test_under_attack(self):
        rng = np.random.default_rng(4)
        key = sift(*run_exchange(40_000, rng, rng, rng))
        rep, _ = estimate_qber(key, 0.5, rng)
        assert rep.qber == pytest.approx(0.25, abs=0.02) and rep.eve_detected

    def test_empty(self, rng):
        with pytest.raises(EmptyKey):
            estimate_qber(SiftedKey((), "", ""), 0.5, rng)

    def test_bad_fraction(self, rng):
        with pytest.raises(ValueError):
            estimate_qber(SiftedKey((0,), "0", "0"), 0, rng)


def test_hex():
    assert bits_to_hex("") == ""
    assert bits_to_hex("1111") == "f"
    assert bits_to_hex("101") == "a"
