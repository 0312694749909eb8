"""Scenario execution: event log, CSV summaries and the four run modes.

Every source of randomness is a labeled stream derived from the root
seed, so output files depend only on the config. Trials in ``teleport``
and ``entangle`` mode own their streams and may run on a thread pool.
Results are merged in trial order, so the log is identical for any
``jobs`` value.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import autonomy, optics, qkd, teleportation
from .channel import ClassicalChannel, KeyBits, RobotId, TriggerSignal
from .config import ScenarioConfig
from .errors import IoError, MessageLost
from .quantum_core import BellOutcome
from .rng import derive_rng

EVENTS_FILE = "events.jsonl"
SUMMARY_FILE = "summary.csv"
TRAJECTORY_FILE = "trajectory.csv"
REPORT_FILE = "report.json"


def _jsonable(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False, default=_jsonable)


class EventLog:
    """Collects ``(t_ns, kind, payload)`` events; sequence numbers are
    assigned after a stable sort on time, so file order is strictly
    increasing in ``(t_ns, seq)``."""

    def __init__(self):
        self._events = []

    def emit(self, t_ns: float, kind: str, **payload):
        self._events.append((float(t_ns), kind, payload))

    def extend(self, events):
        self._events.extend(events)

    def __len__(self):
        return len(self._events)

    def records(self) -> list[dict]:
        ordered = sorted(self._events, key=lambda e: e[0])
        return [{"t_ns": t, "seq": i, "kind": k, "payload": p} for i, (t, k, p) in enumerate(ordered)]

    def to_bytes(self) -> bytes:
        return "".join(canonical_json(r) + "\n" for r in self.records()).encode()


def log_digest(data: bytes) -> str:
    """64-bit BLAKE2b digest of the serialized log, as 16 hex digits."""
    return hashlib.blake2b(data, digest_size=8).hexdigest()


@dataclass
class ScenarioReport:
    mode: str
    trials: int
    log_digest: str = ""
    mean_fidelity: Optional[float] = None
    min_fidelity: Optional[float] = None
    bell_outcome_counts: Optional[dict] = None
    messages_lost: Optional[int] = None
    coincidence_count: Optional[int] = None
    sift_rate: Optional[float] = None
    qber: Optional[float] = None
    eve_detected: Optional[bool] = None
    trigger_time_ns: Optional[float] = None
    output_dir: Optional[str] = None

    _FIELDS = {
        "teleport": ("mean_fidelity", "min_fidelity", "bell_outcome_counts", "messages_lost"),
        "entangle": ("coincidence_count",),
        "qkd": ("sift_rate", "qber", "eve_detected"),
        "full": ("coincidence_count", "trigger_time_ns", "sift_rate", "qber", "eve_detected"),
    }

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "trials": self.trials, "log_digest": self.log_digest}
        for name in self._FIELDS[self.mode]:
            out[name] = getattr(self, name)
        return out


# --- shared pieces --------------------------------------------------------


def _send(ch: ClassicalChannel, rng, events, sender, recipient, t_ns, payload):
    msg = ch.message(sender, recipient, t_ns, payload)
    receipt = ch.send(msg, rng)
    events.append((t_ns, "message_sent", {"message": msg.to_dict()}))
    if receipt.delivered:
        ch.poll(recipient, receipt.deliver_at_ns)
        events.append((receipt.deliver_at_ns, "message_delivered", {"msg_id": msg.msg_id}))
    else:
        events.append((t_ns, "message_lost", {"msg_id": msg.msg_id}))
    return receipt


def _acquire(cfg: ScenarioConfig, rng_spdc, rng_bench, offset_ns: float, events, trial=None):
    """One acquisition run on the optical bench; returns records and coincidences."""
    tag = {} if trial is None else {"trial": trial}
    rec_a, rec_b = [], []
    for em in optics.spdc_emit(cfg.source, rng_spdc):
        t = offset_ns + em.emission_time_ns
        events.append((t, "pair_emitted", {**tag, "pair_id": em.pair_id,
                                          "bell_state": cfg.source.emitted_bell_state.name}))
        a, b = optics.measure_pair(em, cfg.detectors, rng_bench, cfg.polarizer_deg)
        for rec, bucket in ((a, rec_a), (b, rec_b)):
            if rec is not None:
                bucket.append(rec)
                events.append((offset_ns + rec.timestamp_ns, "detection", {**tag, **rec.to_dict()}))
    matches = optics.coincidence_match(rec_a, rec_b, cfg.window)
    for ra, rb in matches:
        t = offset_ns + max(ra.timestamp_ns, rb.timestamp_ns)
        events.append((t, "coincidence", {**tag, "pair_ids": [ra.pair_id, rb.pair_id],
                                          "bits": [ra.bit, rb.bit]}))
    return rec_a, rec_b, matches


def _run_robot(robot_id, cfg: ScenarioConfig, bits, t0_ns: float, events):
    robot = autonomy.Robot(robot_id, command_table=cfg.command_table, dt_s=cfg.dt_s)
    for op in autonomy.opcodes(bits)[: cfg.max_commands]:
        events.append((t0_ns + robot.t_s * 1e9, "robot_command",
                       {"robot": robot.robot_id.value, "opcode": op,
                        "command": cfg.command_table[op].to_dict()}))
        robot.execute(cfg.command_table[op])
    p = robot.pose
    events.append((t0_ns + robot.t_s * 1e9, "robot_pose",
                   {"robot": robot.robot_id.value, "x_m": p.x_m, "y_m": p.y_m, "heading_rad": p.heading_rad}))
    return robot


def _key_exchange(cfg: ScenarioConfig, label: str, t0_ns: float, events):
    """Photon exchange, public basis announcement, sifting and QBER check."""
    n = cfg.trials
    emissions = qkd.alice_send(n, derive_rng(cfg.seed, label, "alice"))
    if cfg.eve_enabled:
        states = qkd.eve_intercept_resend(emissions, derive_rng(cfg.seed, label, "eve"))
    else:
        states = [e.state for e in emissions]
    rng_bob = derive_rng(cfg.seed, label, "bob")
    measurements = [qkd.bob_measure(s, rng_bob, index=e.index) for e, s in zip(emissions, states)]
    rows = []
    for em, m in zip(emissions, measurements):
        sifted = em.basis.angle_deg == m.basis_angle_deg
        events.append((t0_ns + em.index * cfg.trial_spacing_ns, "qkd_photon",
                       {"alice": em.to_dict(), "bob": m.to_dict(), "eve": cfg.eve_enabled}))
        rows.append({"trial": em.index, "alice_bit": em.bit, "alice_basis": em.basis.value,
                     "alice_angle_deg": em.angle_deg, "bob_angle_deg": m.basis_angle_deg,
                     "bob_bit": m.bit, "sifted": int(sifted)})

    ch = ClassicalChannel(cfg.channel)
    rng_ch = derive_rng(cfg.seed, label, "channel")
    t = t0_ns + n * cfg.trial_spacing_ns
    bases = "".join("1" if m.basis_angle_deg == 45 else "0" for m in measurements)
    r1 = _send(ch, rng_ch, events, RobotId.Bob, RobotId.Alice, t, KeyBits(bases, "bob_bases"))
    key = qkd.sift(emissions, measurements)
    out = {"rows": rows, "sifted": key, "report": None, "remaining": None, "t_end": t}
    if not r1.delivered:
        events.append((t, "qkd_aborted", {"reason": "basis announcement lost"}))
        return out
    mask = "".join("1" if e.basis.angle_deg == m.basis_angle_deg else "0"
                   for e, m in zip(emissions, measurements))
    r2 = _send(ch, rng_ch, events, RobotId.Alice, RobotId.Bob, r1.deliver_at_ns, KeyBits(mask, "sift_mask"))
    out["t_end"] = r2.deliver_at_ns
    if not r2.delivered:
        events.append((r1.deliver_at_ns, "qkd_aborted", {"reason": "sift mask lost"}))
        return out
    if len(key) == 0:
        events.append((r2.deliver_at_ns, "qkd_aborted", {"reason": "empty sifted key"}))
        return out
    report, remaining = qkd.estimate_qber(key, cfg.qber_sample_fraction,
                                          derive_rng(cfg.seed, label, "sample"))
    events.append((r2.deliver_at_ns, "qber_estimate",
                   {**report.to_dict(), "sifted_length": len(key), "remaining_length": len(remaining)}))
    out.update(report=report, remaining=remaining)
    return out


def _xor(a: str, b: str) -> str:
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


# --- modes ----------------------------------------------------------------


def _teleport_trial(cfg: ScenarioConfig, i: int):
    events = []
    start = i * cfg.trial_spacing_ns
    inp = teleportation.haar_random_state(derive_rng(cfg.seed, "teleport", i, "input"))
    ch = ClassicalChannel(cfg.channel)
    events.append((start, "teleport_input", {"trial": i, "state": inp.to_pairs()}))
    try:
        tr = teleportation.run_teleportation(inp, cfg.source, ch, derive_rng(cfg.seed, "teleport", i, "protocol"),
                                             start_ns=start)
    except MessageLost as exc:
        tr = exc.transcript
    events.append((tr.pair_emitted_ns, "pair_emitted", {"trial": i, "bell_state": "PsiMinus"}))
    events.append((tr.measured_ns, "bell_measurement", {"trial": i, "outcome": tr.bell_outcome.name,
                                                        "bits": tr.classical_bits}))
    events.append((tr.message_sent_ns, "message_sent", {"trial": i, "bits": tr.classical_bits}))
    bob_bit = None
    if tr.delivered:
        events.append((tr.corrected_ns, "correction", {"trial": i, "fidelity": tr.fidelity,
                                                       "bob_state": tr.bob_state_after.to_pairs()}))
        bob_bit = autonomy.bits_from_teleport(tr, derive_rng(cfg.seed, "teleport", i, "readout"))
        events.append((tr.corrected_ns, "bob_readout", {"trial": i, "bit": bob_bit}))
    else:
        events.append((tr.message_sent_ns, "message_lost", {"trial": i, "fidelity": tr.fidelity}))
    row = {"trial": i, "bell_outcome": tr.bell_outcome.name, "classical_bits": tr.classical_bits,
           "delivered": int(tr.delivered), "fidelity": tr.fidelity,
           "bob_bit": "" if bob_bit is None else bob_bit}
    return events, row, tr, bob_bit


def _run_teleport(cfg, log, jobs):
    results = _map_trials(_teleport_trial, cfg, jobs)
    counts = {o.name: 0 for o in BellOutcome}
    fids, bits, rows, lost = [], [], [], 0
    t_end = 0.0
    for events, row, tr, bit in results:
        log.extend(events)
        rows.append(row)
        counts[tr.bell_outcome.name] += 1
        fids.append(tr.fidelity)
        lost += not tr.delivered
        t_end = max(t_end, tr.corrected_ns or tr.message_sent_ns)
        if bit is not None:
            bits.append(bit)
    robot_events = []
    robot = _run_robot(RobotId.Bob, cfg, bits, t_end, robot_events)
    log.extend(robot_events)
    report = ScenarioReport("teleport", cfg.trials, mean_fidelity=float(np.mean(fids)),
                            min_fidelity=float(np.min(fids)), bell_outcome_counts=counts,
                            messages_lost=lost)
    aggregate = {"trial": "aggregate", "fidelity": report.mean_fidelity, "min_fidelity": report.min_fidelity,
                 "messages_lost": lost, **{f"count_{k}": v for k, v in counts.items()}}
    return report, rows + [aggregate], [robot]


def _entangle_trial(cfg: ScenarioConfig, i: int):
    events = []
    offset = i * cfg.source.duration_ns
    rec_a, rec_b, matches = _acquire(cfg, derive_rng(cfg.seed, "spdc", i), derive_rng(cfg.seed, "bench", i),
                                     offset, events, trial=i)
    opposite = sum(a.bit != b.bit for a, b in matches)
    row = {"trial": i, "records_a": len(rec_a), "records_b": len(rec_b),
           "coincidences": len(matches), "anticorrelated": opposite}
    return events, row, matches


def _run_entangle(cfg, log, jobs):
    results = _map_trials(_entangle_trial, cfg, jobs)
    rows, all_matches = [], []
    for events, row, matches in results:
        log.extend(events)
        rows.append(row)
        all_matches.extend(matches)
    t_end = cfg.trials * cfg.source.duration_ns
    robots = []
    for rid in (RobotId.Alice, RobotId.Bob):
        arm = 0 if cfg.bit_sources[rid.value] == "A" else 1
        bits = [autonomy.bits_from_polarization(pair[arm]) for pair in all_matches]
        robot_events = []
        robots.append(_run_robot(rid, cfg, bits, t_end, robot_events))
        log.extend(robot_events)
    report = ScenarioReport("entangle", cfg.trials, coincidence_count=len(all_matches))
    aggregate = {"trial": "aggregate", "records_a": sum(r["records_a"] for r in rows),
                 "records_b": sum(r["records_b"] for r in rows), "coincidences": len(all_matches),
                 "anticorrelated": sum(r["anticorrelated"] for r in rows)}
    return report, rows + [aggregate], robots


def _run_qkd(cfg, log, jobs):
    events = []
    out = _key_exchange(cfg, "qkd", 0.0, events)
    log.extend(events)
    key, report_q = out["sifted"], out["report"]
    report = ScenarioReport("qkd", cfg.trials, sift_rate=len(key) / cfg.trials,
                            qber=report_q.qber if report_q else None,
                            eve_detected=report_q.eve_detected if report_q else None)
    remaining = out["remaining"]
    aggregate = {"trial": "aggregate", "sifted": len(key), "sift_rate": report.sift_rate,
                 "qber": "" if report.qber is None else report.qber,
                 "eve_detected": "" if report.eve_detected is None else int(report.eve_detected),
                 "alice_key_hex": qkd.bits_to_hex(remaining.alice_bits) if remaining else "",
                 "bob_key_hex": qkd.bits_to_hex(remaining.bob_bits) if remaining else ""}
    return report, out["rows"] + [aggregate], []


def _run_full(cfg, log, jobs):
    events = []
    _, _, matches = _acquire(cfg, derive_rng(cfg.seed, "full", "spdc"), derive_rng(cfg.seed, "full", "bench"),
                             0.0, events)
    trigger_t = autonomy.entanglement_trigger(matches, cfg.trigger)
    report = ScenarioReport("full", cfg.trials, coincidence_count=len(matches), trigger_time_ns=trigger_t)
    rows = []
    alice = autonomy.Robot(RobotId.Alice, command_table=cfg.command_table, dt_s=cfg.dt_s)
    bob = autonomy.Robot(RobotId.Bob, command_table=cfg.command_table, dt_s=cfg.dt_s)
    aggregate = {"trial": "aggregate", "coincidences": len(matches),
                 "trigger_time_ns": "" if trigger_t is None else trigger_t}

    if trigger_t is None:
        events.append((float(cfg.source.duration_ns), "trigger_not_fired",
                       {"min_coincidences": cfg.trigger.min_coincidences}))
        log.extend(events)
        return report, [aggregate], [alice, bob]

    ch = ClassicalChannel(cfg.channel)
    rng_ch = derive_rng(cfg.seed, "full", "channel")
    events.append((trigger_t, "trigger_fired", {"coincidences": cfg.trigger.min_coincidences}))
    r = _send(ch, rng_ch, events, RobotId.Alice, RobotId.Bob, trigger_t, TriggerSignal())
    if not r.delivered:
        events.append((trigger_t, "full_aborted", {"reason": "trigger signal lost"}))
        log.extend(events)
        return report, [aggregate], [alice, bob]

    out = _key_exchange(cfg, "full-qkd", r.deliver_at_ns, events)
    rows = out["rows"]
    key, q, remaining = out["sifted"], out["report"], out["remaining"]
    report.sift_rate = len(key) / cfg.trials
    if q is not None:
        report.qber, report.eve_detected = q.qber, q.eve_detected
    aggregate.update(sifted=len(key), sift_rate=report.sift_rate,
                     qber="" if q is None else q.qber,
                     eve_detected="" if q is None else int(q.eve_detected))

    if q is not None and not q.eve_detected:
        plan = cfg.command_bits
        if plan is None:
            plan = "".join(str(int(b)) for b in derive_rng(cfg.seed, "full", "commands")
                           .integers(0, 2, size=2 * cfg.max_commands))
        usable = min(len(plan), len(remaining)) // 2 * 2
        cipher = _xor(plan[:usable], remaining.alice_bits[:usable])
        t_cmd = out["t_end"]
        r = _send(ch, rng_ch, events, RobotId.Alice, RobotId.Bob, t_cmd, KeyBits(cipher, "commands"))
        if r.delivered:
            plain = _xor(cipher, remaining.bob_bits[:usable])
            events.append((r.deliver_at_ns, "commands_decrypted", {"bits": plain, "sent_bits": plan[:usable]}))
            bob = _run_robot(RobotId.Bob, cfg, [int(c) for c in plain], r.deliver_at_ns, events)
            aggregate.update(command_bits=plain)
    elif q is not None:
        events.append((out["t_end"], "full_aborted", {"reason": "eavesdropper detected"}))
    log.extend(events)
    return report, rows + [aggregate], [alice, bob]


_MODES = {"teleport": _run_teleport, "entangle": _run_entangle, "qkd": _run_qkd, "full": _run_full}


def _map_trials(fn, cfg, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda i: fn(cfg, i), range(cfg.trials)))
    return [fn(cfg, i) for i in range(cfg.trials)]


def _csv_text(rows, header=None) -> str:
    buf = io.StringIO()
    if header is None:
        header = []
        for row in rows:
            header.extend(k for k in row if k not in header)
    writer = csv.DictWriter(buf, fieldnames=header, restval="", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def simulate(cfg: ScenarioConfig, jobs: int = 1):
    """Run a scenario in memory: ``(report, log, summary_rows, robots)``."""
    log = EventLog()
    report, rows, robots = _MODES[cfg.mode](cfg, log, jobs)
    report.log_digest = log_digest(log.to_bytes())
    return report, log, rows, robots


def run_scenario(cfg: ScenarioConfig, jobs: int = 1, output_dir=None) -> ScenarioReport:
    """Run ``cfg`` and write events.jsonl, summary.csv, trajectory.csv and report.json."""
    report, log, rows, robots = simulate(cfg, jobs)
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    traj = [row for r in robots for row in r.trajectory_rows()]
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / EVENTS_FILE).write_bytes(log.to_bytes())
        (out / SUMMARY_FILE).write_text(_csv_text(rows), encoding="utf-8")
        traj_text = _csv_text(
            [dict(zip(("t_s", "robot", "x_m", "y_m", "heading_rad"), row)) for row in traj],
            header=["t_s", "robot", "x_m", "y_m", "heading_rad"],
        )
        (out / TRAJECTORY_FILE).write_text(traj_text, encoding="utf-8")
        (out / REPORT_FILE).write_text(canonical_json(report.to_dict()) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write outputs to {os.fspath(out)}: {exc}") from exc
    report.output_dir = os.fspath(out)
    return report
