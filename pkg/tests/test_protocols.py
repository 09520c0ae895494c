import numpy as np
import pytest

from qpv.protocols import (
    GenericRunResult,
    Layout,
    generic_pv_step,
    line_layout,
    pv_bb84_as_generic,
    pv_bb84_purified_round,
    pv_bb84_round,
    pv_ddim_round,
    pv_sequential,
    recompute_joint_accept,
    run_generic_honest,
    two_step_toy_scheme,
)
from qpv.qsim import SWAP, basis_state, random_state
from qpv.registers import RegisterStore
from qpv.spacetime import PlacementError, Position, TimingConfig, distance, pos

CFG = TimingConfig(T=2.0, delta=0.05)


def test_layout_requires_enclosure():
    with pytest.raises(PlacementError):
        Layout((pos(0.0), pos(1.0)), pos(1.5))


def test_honest_round_always_accepts():
    layout = line_layout()
    for seed in range(500):
        v = pv_bb84_round(layout, CFG, np.random.default_rng(seed))
        assert v.joint_accept
        for rec in v.records.values():
            assert rec.in_time and rec.value == v.challenge["x"]


def test_honest_replies_arrive_exactly_on_time():
    layout = line_layout(prover=0.3)
    v = pv_bb84_round(layout, CFG, np.random.default_rng(1))
    for i, vid in enumerate(("V0", "V1")):
        expected = CFG.T + distance(layout.verifiers[i], layout.prover)
        assert abs(v.records[vid].arrival_time - expected) < 1e-9


def test_purified_round_honest_and_ordering():
    layout = line_layout()
    for seed in range(200):
        v = pv_bb84_purified_round(layout, CFG, np.random.default_rng(seed))
        assert v.joint_accept
        tags = [n.tag for n in v.notes]
        i_measure = tags.index("delayed-epr-measurement")
        i_reply = tags.index("reply-received")
        assert v.notes[i_measure].time >= CFG.T  # after the prover's reply left
        assert i_measure <= i_reply or v.notes[i_measure].time <= v.notes[i_reply].time
        # the delayed measurement happens at the first reply arrival
        first_reply = min(rec.arrival_time for rec in v.records.values())
        assert abs(v.notes[i_measure].time - first_reply) < 1e-9


def test_purified_matches_original_distribution_honest():
    layout = line_layout()
    n = 2000
    rng1, rng2 = np.random.default_rng(10), np.random.default_rng(11)
    plain = sum(pv_bb84_round(layout, CFG, rng1).joint_accept for _ in range(n))
    purified = sum(pv_bb84_purified_round(layout, CFG, rng2).joint_accept for _ in range(n))
    assert plain == n and purified == n


def test_verdict_monotonicity():
    layout = line_layout()
    v = pv_bb84_round(layout, CFG, np.random.default_rng(3))
    assert v.joint_accept
    assert recompute_joint_accept(v)
    for vid in v.records:
        assert not recompute_joint_accept(v, flip=vid)


def test_malformed_reply_aborts():
    layout = line_layout()
    from qpv.protocols import _VerifierInbox

    inbox = _VerifierInbox(["V0"])
    handler = inbox.handler("V0")

    class _Ev:
        payload = {"kind": "reply", "value": 7}
        arrival_time = 2.5

    class _Eng:
        def note(self, *a, **k):
            pass

    handler(_Eng(), _Ev())
    assert inbox.records["V0"].malformed


def test_sequential_honest():
    layout = line_layout()
    for seed in range(50):
        accept, verdicts = pv_sequential(10, layout, CFG, np.random.default_rng(seed))
        assert accept and len(verdicts) == 10


def test_ddim_honest_tetrahedron():
    layout = Layout(
        (pos(0, 0, 0), pos(1, 0, 0), pos(0, 1, 0), pos(0, 0, 1)),
        pos(0.25, 0.25, 0.25),
    )
    for seed in range(100):
        v = pv_ddim_round(layout, CFG, np.random.default_rng(seed))
        assert v.joint_accept


def test_ddim_shares_xor_to_theta():
    layout = Layout(
        (pos(0, 0, 0), pos(1, 0, 0), pos(0, 1, 0), pos(0, 0, 1)),
        pos(0.25, 0.25, 0.25),
    )
    rng = np.random.default_rng(5)
    for _ in range(50):
        v = pv_ddim_round(layout, CFG, rng)
        xor = 0
        for s in v.challenge["shares"]:
            xor ^= s
        assert xor == v.challenge["theta"]
        assert len(v.challenge["shares"]) == 3


def test_d1_is_exactly_the_bb84_round():
    layout = line_layout()
    for seed in range(50):
        va = pv_bb84_round(layout, CFG, np.random.default_rng(seed))
        vb = pv_ddim_round(layout, CFG, np.random.default_rng(seed))
        assert va.challenge == vb.challenge
        assert [(e.sender, e.receiver, e.arrival_time) for e in va.transcript] == [
            (e.sender, e.receiver, e.arrival_time) for e in vb.transcript
        ]
        assert va.joint_accept == vb.joint_accept


def test_generic_pv_step_swap():
    store = RegisterStore()
    a = store.alloc(basis_state([1]))
    b = store.alloc(basis_state([0]))
    generic_pv_step(store, a, b, [], SWAP)
    got = store.take(a + b)
    assert np.allclose(got.amplitudes, basis_state([0, 1]).amplitudes)


def test_generic_bb84_honest():
    layout = line_layout()
    scheme = pv_bb84_as_generic(CFG.T)
    for seed in range(300):
        res = run_generic_honest(scheme, layout, CFG, np.random.default_rng(seed))
        assert res.accept and res.timing_ok


def test_generic_two_step_honest_timing():
    layout = line_layout()
    scheme = two_step_toy_scheme(CFG.T, CFG.T + 0.1)
    res = run_generic_honest(scheme, layout, CFG, np.random.default_rng(4))
    assert res.accept
    for s, step in enumerate(scheme.steps):
        for i, vid in enumerate(("V0", "V1")):
            expected = step.challenge_time + distance(layout.verifiers[i], layout.prover)
            assert abs(res.arrivals[(s, vid)] - expected) < 1e-9


def test_generic_two_step_uses_register():
    layout = line_layout()
    scheme = two_step_toy_scheme(CFG.T, CFG.T + 0.1)
    rng = np.random.default_rng(9)
    for _ in range(60):
        res = run_generic_honest(scheme, layout, CFG, rng)
        (o1,), () = res.outcomes[0]
        (), (o2,) = res.outcomes[1]
        a, s1, s2 = res.observables[:3]
        assert o1 == a ^ s1
        assert o2 == a ^ s1 ^ s2
