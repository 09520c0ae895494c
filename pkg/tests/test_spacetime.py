import math

import numpy as np
import pytest

from qpv.spacetime import (
    CausalityError,
    DegenerateLayoutError,
    DimensionMismatch,
    EventEngine,
    Position,
    TimingConfig,
    distance,
    in_time,
    is_enclosed,
    pos,
    run_events,
    schedule_challenges,
    transcript_to_jsonl,
)


def test_distance_basics():
    assert distance(pos(0.0), pos(1.0)) == 1.0
    assert distance(pos(0, 0, 0), pos(3, 4, 0)) == 5.0
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = pos(*rng.normal(size=3))
        b = pos(*rng.normal(size=3))
        assert distance(a, b) == distance(b, a)
    with pytest.raises(DimensionMismatch):
        distance(pos(0.0), pos(0.0, 1.0))


def test_is_enclosed_1d():
    vs = [pos(0.0), pos(1.0)]
    assert is_enclosed(vs, pos(0.5))
    assert not is_enclosed(vs, pos(1.5))
    assert is_enclosed(vs, pos(1.0))  # boundary counts


def test_is_enclosed_tetrahedron():
    vs = [pos(0, 0, 0), pos(1, 0, 0), pos(0, 1, 0), pos(0, 0, 1)]
    centroid = pos(0.25, 0.25, 0.25)
    assert is_enclosed(vs, centroid)
    assert not is_enclosed(vs, pos(0.9, 0.9, 0.9))


def test_is_enclosed_degenerate():
    coplanar = [pos(0, 0, 0), pos(1, 0, 0), pos(0, 1, 0), pos(1, 1, 0)]
    with pytest.raises(DegenerateLayoutError):
        is_enclosed(coplanar, pos(0.5, 0.5, 0.0))


def test_schedule_challenges_line():
    cfg = TimingConfig(T=1.0)
    emits = schedule_challenges([pos(0.0), pos(1.0)], pos(0.6), cfg)
    assert np.allclose(emits, [0.4, 0.6])


def test_schedule_challenges_at_verifier():
    cfg = TimingConfig(T=1.0)
    emits = schedule_challenges([pos(0.0), pos(1.0)], pos(0.0), cfg)
    assert emits[0] == 1.0


def test_schedule_challenges_simultaneous_arrival_3d():
    vs = [pos(0, 0, 0), pos(1, 0, 0), pos(0, 1, 0), pos(0, 0, 1)]
    target = pos(0.25, 0.25, 0.25)
    cfg = TimingConfig(T=3.0)
    emits = schedule_challenges(vs, target, cfg)
    engine = EventEngine({f"V{i}": v for i, v in enumerate(vs)} | {"P": target})
    for i, t in enumerate(emits):
        engine.emit(f"V{i}", "P", {"i": i}, emit_time=t)
    transcript = engine.run()
    arrivals = [ev.arrival_time for ev in transcript]
    assert all(abs(t - 3.0) < 1e-12 for t in arrivals)


def test_single_message_delivery():
    transcript = run_events(
        [("a", "b", "hello", 0.0)],
        {},
        {"a": pos(0.0), "b": pos(1.0)},
    )
    assert len(transcript) == 1
    assert transcript[0].arrival_time == 1.0
    assert abs(transcript[0].arrival_time - transcript[0].emit_time - 1.0) < 1e-12


def test_handler_chains_and_determinism():
    def build():
        log = []

        def b_handler(engine, ev):
            log.append(ev.payload)
            engine.emit("b", "c", ev.payload + 1)

        transcript = run_events(
            [("a", "b", 0, 0.0)],
            {"b": b_handler},
            {"a": pos(0.0), "b": pos(1.0), "c": pos(3.0)},
        )
        return transcript

    t1, t2 = build(), build()
    assert [(e.sender, e.receiver, e.arrival_time) for e in t1] == [
        (e.sender, e.receiver, e.arrival_time) for e in t2
    ]
    assert t1[-1].arrival_time == 3.0  # 1.0 + distance(b, c)


def test_causality_violation_rejected():
    def naughty(engine, ev):
        engine.emit("b", "a", "back", emit_time=ev.arrival_time - 0.5)

    with pytest.raises(CausalityError):
        run_events([("a", "b", "x", 0.0)], {"b": naughty}, {"a": pos(0.0), "b": pos(1.0)})


def test_no_delivery_precedes_flight_time():
    rng = np.random.default_rng(3)
    positions = {f"p{i}": pos(*rng.normal(size=2)) for i in range(4)}
    events = [
        (f"p{int(rng.integers(4))}", f"p{int(rng.integers(4))}", i, float(rng.random()))
        for i in range(20)
    ]
    transcript = run_events(events, {}, positions)
    for ev in transcript:
        flight = distance(positions[ev.sender], positions[ev.receiver])
        assert ev.arrival_time >= ev.emit_time + flight - 1e-12


def test_in_time_boundary():
    cfg = TimingConfig(T=1.0)
    v, p = pos(0.0), pos(0.6)
    deadline = 1.0 + 0.6
    assert in_time(deadline, v, p, cfg)
    assert not in_time(deadline + 1e-6, v, p, cfg)
    assert in_time(deadline + 1e-6, v, p, TimingConfig(T=1.0, slack=1e-5))


def test_tie_break_by_receiver_then_sequence():
    order = []

    def mk(name):
        def h(engine, ev):
            order.append(name)

        return h

    positions = {"s": pos(0.0), "a": pos(1.0), "b": pos(1.0)}
    run_events(
        [("s", "b", 1, 0.0), ("s", "a", 2, 0.0)],
        {"a": mk("a"), "b": mk("b")},
        positions,
    )
    assert order == ["a", "b"]


def test_transcript_jsonl():
    transcript = run_events([("a", "b", {"kind": "share", "value": 1}, 0.0)], {}, {"a": pos(0.0), "b": pos(2.0)})
    line = transcript_to_jsonl(transcript)
    assert '"arrival_time": 2.0' in line
    assert line.endswith("\n")
    assert len(line.strip().splitlines()) == 1
