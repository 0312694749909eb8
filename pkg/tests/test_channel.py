import itertools

import numpy as np
import pytest

from qtelesim.channel import (
    BellOutcomeBits,
    ChannelConfig,
    ClassicalChannel,
    ClassicalMessage,
    KeyBits,
    RobotId,
    TriggerSignal,
)
from qtelesim.errors import ValidationError

A, B = RobotId.Alice, RobotId.Bob


def make(latency=50.0, loss=0.0):
    return ClassicalChannel(ChannelConfig(latency_ns=latency, loss_probability=loss))


def test_additive_latency(rng):
    ch = make(50)
    r = ch.send(ch.message(A, B, 100.0, TriggerSignal()), rng)
    assert r.delivered and r.deliver_at_ns == 150.0


def test_total_loss(rng):
    ch = make(loss=1.0)
    assert not any(ch.send(ch.message(A, B, float(t), TriggerSignal()), rng).delivered for t in range(200))
    assert ch.poll(B, 1e12) == []


def test_fifo_per_sender(rng):
    ch = make(50)
    m1 = ch.message(A, B, 10.0, KeyBits("01"))
    m2 = ch.message(A, B, 20.0, KeyBits("10"))
    ch.send(m1, rng)
    ch.send(m2, rng)
    assert [m.msg_id for m in ch.poll(B, 1e9)] == [m1.msg_id, m2.msg_id]


def test_fifo_enumerated_schedules():
    # every issue order and every pair of poll instants: a sender's messages
    # surface in send-time order, never one overtaking another
    msgs = [(10.0, 0), (20.0, 1), (20.0, 2), (30.0, 3)]
    instants = [0.0, 60.0, 65.0, 70.0, 80.0, 1e9]
    for order in itertools.permutations(msgs):
        for cut in itertools.combinations(instants, 2):
            ch = make(50)
            rng = np.random.default_rng(0)
            for t, mid in order:
                ch.send(ClassicalMessage(mid, A, B, t, TriggerSignal()), rng)
            seen = [m.msg_id for now in (*cut, 1e9) for m in ch.poll(B, now)]
            assert seen == [0, 1, 2, 3]


def test_empty_poll():
    assert make().poll(B, 0.0) == []


def test_boundary_inclusive(rng):
    ch = make(50)
    msg = ch.message(A, B, 100.0, TriggerSignal())
    ch.send(msg, rng)
    assert ch.poll(B, 149.0) == []
    assert ch.poll(B, 150.0) == [msg]
    assert ch.poll(B, 1e9) == []


def test_interleaved_senders_sorted(rng):
    ch = make(10)
    msgs = []
    for t, s, r in [(5.0, A, B), (1.0, B, A), (5.0, B, B), (3.0, A, B), (0.0, B, B), (5.0, A, B)]:
        m = ch.message(s, r, t, TriggerSignal())
        ch.send(m, rng)
        msgs.append(m)
    polled = ch.poll(B, 1e9)
    # oracle: plain sort on (delivery time, msg_id)
    expected = sorted((m for m in msgs if m.recipient is B), key=lambda m: (m.sent_at_ns + 10, m.msg_id))
    assert polled == expected


def test_recipient_isolation(rng):
    ch = make(0)
    ch.send(ch.message(A, B, 0.0, TriggerSignal()), rng)
    assert ch.poll(A, 1e9) == []
    assert len(ch.poll(B, 1e9)) == 1


def test_no_duplicates_and_none_lost(rng):
    ch = make(7)
    sent = []
    for k in range(300):
        m = ch.message(A if k % 3 else B, B, float(rng.uniform(0, 1000)), TriggerSignal())
        ch.send(m, rng)
        sent.append(m.msg_id)
    got = []
    for now in np.linspace(0, 2000, 37):
        got.extend(m.msg_id for m in ch.poll(B, now))
    assert sorted(got) == sorted(sent) and len(set(got)) == len(got)
    assert ch.pending() == 0


def test_duplicate_id_rejected(rng):
    ch = make()
    ch.send(ClassicalMessage(4, A, B, 0.0, TriggerSignal()), rng)
    with pytest.raises(ValueError):
        ch.send(ClassicalMessage(4, A, B, 1.0, TriggerSignal()), rng)
    assert ch.message(A, B, 0.0, TriggerSignal()).msg_id == 0
    # factory skips ids already taken explicitly
    ids = [ch.message(A, B, 0.0, TriggerSignal()).msg_id for _ in range(5)]
    assert 4 not in ids


def test_deterministic_delivery():
    def run(seed):
        ch = make(5, loss=0.3)
        rng = np.random.default_rng(seed)
        out = [ch.send(ch.message(A, B, float(t), TriggerSignal()), rng) for t in range(100)]
        return out, [m.msg_id for m in ch.poll(B, 1e9)]

    assert run(1) == run(1)
    assert run(1) != run(2)


def test_payload_validation():
    with pytest.raises(ValueError):
        BellOutcomeBits("012")
    with pytest.raises(ValueError):
        KeyBits("01a")
    with pytest.raises(ValueError):
        ClassicalMessage(0, A, B, -1.0, TriggerSignal())


def test_config_validation():
    with pytest.raises(ValidationError):
        ChannelConfig(latency_ns=-1)
    with pytest.raises(ValidationError):
        ChannelConfig(loss_probability=1.5)


def test_wire_format():
    m = ClassicalMessage(3, A, B, 12.5, BellOutcomeBits("10"))
    assert m.to_dict() == {"msg_id": 3, "sender": "Alice", "recipient": "Bob", "sent_at_ns": 12.5,
                           "payload": {"type": "bell_outcome_bits", "bits": "10"}}
