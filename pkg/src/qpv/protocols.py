"""Verifier/prover state machines for timed position-verification rounds.

The BB84 round: V0 sends the qubit H^theta|x>, V1 (or, in d dimensions, the
verifiers V1..Vd holding a sum sharing of theta) sends the basis, timed so
everything reaches the claimed position at the agreed time T.  The prover
measures and broadcasts the observed bit; the verifiers jointly accept iff
every reply is correct and arrives in time.

Also here: the purified variant (V0 keeps an EPR half and measures only after
the reply arrives), sequential repetition with the no-pre-shared-entanglement
reset between rounds, and the generic multi-step template in which the prover
applies a known classical-input-indexed unitary to challenge registers plus a
persistent local register R.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .qsim import H, I2, Statevector, basis_state, bb84_state, embed_gate
from .registers import RegisterStore
from .spacetime import (
    EventEngine,
    Note,
    PlacementError,
    Position,
    SpacetimeEvent,
    TimingConfig,
    distance,
    in_time,
    is_enclosed,
)


@dataclass(frozen=True)
class Layout:
    """Verifier positions enclosing the claimed prover position."""

    verifiers: tuple[Position, ...]
    prover: Position

    def __post_init__(self):
        if not is_enclosed(self.verifiers, self.prover):
            raise PlacementError("prover position is not enclosed by the verifiers")

    @property
    def dim(self) -> int:
        return self.prover.dim

    def verifier_id(self, i: int) -> str:
        return f"V{i}"

    def positions(self) -> dict[str, Position]:
        out = {f"V{i}": v for i, v in enumerate(self.verifiers)}
        out["P"] = self.prover
        return out


def line_layout(v0: float = 0.0, v1: float = 1.0, prover: float = 0.45) -> Layout:
    return Layout(
        (Position((v0,)), Position((v1,))),
        Position((prover,)),
    )


@dataclass
class VerifierRecord:
    value: object  # reply bit, "bot", or None when nothing valid arrived
    arrival_time: float | None
    in_time: bool
    malformed: bool = False


@dataclass
class ProtocolVerdict:
    records: dict[str, VerifierRecord]
    joint_accept: bool
    aborted: bool
    challenge: dict
    transcript: list[SpacetimeEvent] = field(default_factory=list, repr=False)
    notes: list[Note] = field(default_factory=list, repr=False)


def recompute_joint_accept(verdict: ProtocolVerdict, flip: str | None = None) -> bool:
    """Re-evaluate the joint decision, optionally with one reply bit flipped."""
    if verdict.aborted:
        return False
    x = verdict.challenge["x"]
    for vid, rec in verdict.records.items():
        value = rec.value
        if flip == vid and value in (0, 1):
            value = 1 - value
        if rec.malformed or not rec.in_time or value != x:
            return False
    return True


def _sum_sharing(theta: int, d: int, rng) -> list[int]:
    """d random bits with XOR equal to theta; for d == 1 the single share is theta."""
    if d == 1:
        return [theta]
    shares = [int(rng.integers(2)) for _ in range(d - 1)]
    last = theta
    for s in shares:
        last ^= s
    return shares + [last]


class _VerifierInbox:
    __slots__ = ("records",)

    def __init__(self, verifier_ids):
        self.records = {vid: VerifierRecord(None, None, False) for vid in verifier_ids}

    def handler(self, vid):
        rec = self.records[vid]

        def _on(engine, ev):
            if rec.arrival_time is not None:
                return  # only the first reply counts
            payload = ev.payload
            if not isinstance(payload, dict) or payload.get("kind") != "reply":
                rec.malformed = True
                rec.arrival_time = ev.arrival_time
                return
            value = payload.get("value")
            if value not in (0, 1, "bot"):
                rec.malformed = True
                rec.arrival_time = ev.arrival_time
                return
            rec.value = value
            rec.arrival_time = ev.arrival_time
            engine.note(vid, "reply-received", value=value)

        return _on


def pv_ddim_round(
    layout: Layout,
    cfg: TimingConfig,
    rng,
    attack=None,
    purified: bool = False,
    tag_override: Callable | None = None,
) -> ProtocolVerdict:
    """One timed round of the d-dimensional BB84 position-verification scheme.

    With d+1 verifiers, V0 sends the qubit and V1..Vd send a sum sharing of
    the basis.  `attack` replaces the honest prover by an adversary coalition
    (its parties intercept the challenges addressed to the claimed position).
    `tag_override` post-processes the honest reply bit into an authentication
    tag; it is used by the authentication layer.
    """
    d = layout.dim
    k_plus_1 = len(layout.verifiers)
    if k_plus_1 != d + 1:
        raise PlacementError(f"{d}-dimensional rounds need exactly {d + 1} verifiers")

    theta = int(rng.integers(2))
    shares = _sum_sharing(theta, d, rng)
    store = RegisterStore()

    positions = {f"V{i}": v for i, v in enumerate(layout.verifiers)}
    verifier_ids = list(positions)
    if attack is None:
        positions["P"] = layout.prover
    else:
        for pid, p in attack.positions.items():
            for dp in (distance(p, layout.prover),):
                if dp < cfg.delta or dp == 0.0:
                    raise PlacementError(
                        f"adversary {pid} at distance {dp} violates the exclusion radius"
                    )
            positions[pid] = p
    engine = EventEngine(positions)

    inbox = _VerifierInbox(verifier_ids)
    for vid in verifier_ids:
        engine.on(vid, inbox.handler(vid))

    # V0's challenge preparation; in the purified variant the value bit is
    # measured only after the reply has come back.
    challenge: dict = {"theta": theta, "shares": shares, "purified": purified}
    kept_half = []
    if purified:
        from .qsim import make_epr

        a_ref, b_ref = store.alloc(make_epr())
        kept_half.append(a_ref)
        qubit_ref = b_ref
        challenge["x"] = None
    else:
        x = int(rng.integers(2))
        challenge["x"] = x
        [qubit_ref] = store.alloc(bb84_state(x, theta))

    def v0_reply_hook(engine, ev):
        # purified variant: measure the kept half only when the reply arrives
        if purified and kept_half and challenge["x"] is None:
            engine.note("V0", "delayed-epr-measurement")
            challenge["x"] = store.measure([kept_half[0]], [theta], rng)[0]

    base_v0 = inbox.handler("V0")

    def v0_handler(engine, ev):
        if isinstance(ev.payload, dict) and ev.payload.get("kind") == "reply":
            v0_reply_hook(engine, ev)
        base_v0(engine, ev)

    engine.on("V0", v0_handler)

    # honest prover, unless an attack intercepts the challenges
    if attack is None:
        pending = {"qubit": None, "shares": {}, "replied": False}

        def prover(engine, ev):
            payload = ev.payload
            if payload["kind"] == "bb84":
                pending["qubit"] = payload["ref"]
            elif payload["kind"] == "share":
                pending["shares"][payload["index"]] = payload["value"]
            if pending["replied"] or pending["qubit"] is None or len(pending["shares"]) < d:
                return
            basis = 0
            for v in pending["shares"].values():
                basis ^= v
            bit = store.measure([pending["qubit"]], [basis], rng)[0]
            engine.note("P", "measured", basis=basis, bit=bit)
            value = bit if tag_override is None else tag_override(bit, rng)
            for vid in verifier_ids:
                engine.emit("P", vid, {"kind": "reply", "value": value})
            pending["replied"] = True

        engine.on("P", prover)
        route = {i: "P" for i in range(k_plus_1)}
    else:
        attack.register(engine, store, rng, {"layout": layout, "cfg": cfg, "d": d})
        route = {i: attack.route(i) for i in range(k_plus_1)}

    # challenges, timed to reach the claimed position at T
    emit0 = cfg.T - distance(layout.verifiers[0], layout.prover)
    engine.emit("V0", route[0], {"kind": "bb84", "ref": qubit_ref}, emit_time=emit0)
    for i in range(1, k_plus_1):
        emit_i = cfg.T - distance(layout.verifiers[i], layout.prover)
        engine.emit(
            "V" + str(i),
            route[i],
            {"kind": "share", "index": i, "value": shares[i - 1]},
            emit_time=emit_i,
        )

    engine.run()

    aborted = False
    for vid, rec in inbox.records.items():
        rec.in_time = rec.arrival_time is not None and in_time(
            rec.arrival_time, positions[vid], layout.prover, cfg
        )
        if rec.malformed:
            aborted = True

    x = challenge["x"]
    joint = (not aborted) and all(
        rec.in_time and rec.value == x for rec in inbox.records.values()
    )
    return ProtocolVerdict(
        records=inbox.records,
        joint_accept=joint,
        aborted=aborted,
        challenge=challenge,
        transcript=engine.transcript,
        notes=engine.notes,
    )


def pv_bb84_round(layout: Layout, cfg: TimingConfig, rng, attack=None) -> ProtocolVerdict:
    """The 1-dimensional two-verifier BB84 round (d-dim scheme with d = 1)."""
    return pv_ddim_round(layout, cfg, rng, attack=attack, purified=False)


def pv_bb84_purified_round(layout: Layout, cfg: TimingConfig, rng, attack=None) -> ProtocolVerdict:
    """BB84 round where V0 keeps an EPR half and measures after the reply."""
    return pv_ddim_round(layout, cfg, rng, attack=attack, purified=True)


def pv_sequential(
    n_rounds: int,
    layout: Layout,
    cfg: TimingConfig,
    rng,
    attack_strategy=None,
    purified: bool = False,
) -> tuple[bool, list[ProtocolVerdict]]:
    """Strictly sequential repetition; accept iff every round accepts.

    Adversaries re-enter each round without entanglement: every round gets a
    fresh register store and a freshly built attack instance.  Classical
    information may be carried across rounds via the strategy's carry dict.
    """
    verdicts = []
    carry: dict = {}
    for _ in range(n_rounds):
        attack = None
        if attack_strategy is not None:
            attack = attack_strategy.build(layout, cfg, carry=carry)
        verdict = pv_ddim_round(layout, cfg, rng, attack=attack, purified=purified)
        verdicts.append(verdict)
        if not verdict.joint_accept:
            return False, verdicts
    return True, verdicts


# ---------------------------------------------------------------------------
# Generic multi-step template: per step the prover receives registers A (from
# V0, with classical x) and B (from V1, with classical y), applies a known
# unitary U_{x,y} to A,B,R and returns A to V0 and B to V1, keeping R.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenericStep:
    n_a: int
    n_b: int
    challenge_time: float
    classical_x: Callable  # secrets -> hashable (or None)
    classical_y: Callable
    state_a: Callable | None  # secrets -> Statevector on n_a qubits
    state_b: Callable | None
    unitary: Callable  # (x, y) -> unitary on n_a + n_b + n_r qubits, order A,B,R
    x_choices: tuple = (None,)
    y_choices: tuple = (None,)


@dataclass(frozen=True)
class GenericScheme:
    n_r: int
    sample_secrets: Callable  # rng -> secrets tuple
    steps: tuple[GenericStep, ...]
    accept: Callable  # (secrets, outcomes) -> bool
    observables: Callable  # (secrets, outcomes) -> hashable tuple


@dataclass
class GenericRunResult:
    accept: bool
    timing_ok: bool
    outcomes: list
    observables: tuple
    arrivals: dict  # (step index, verifier id) -> arrival time
    transcript: list[SpacetimeEvent] = field(default_factory=list, repr=False)
    notes: list[Note] = field(default_factory=list, repr=False)


def generic_pv_step(store: RegisterStore, a_refs, b_refs, r_refs, unitary) -> None:
    """Honest single step: apply the declared unitary to A, B, R in place."""
    store.apply(unitary, list(a_refs) + list(b_refs) + list(r_refs))


def _measure_returned(store, refs, rng):
    if not refs:
        return ()
    return tuple(store.measure(list(refs), [0] * len(refs), rng))


def run_generic_honest(scheme: GenericScheme, layout: Layout, cfg: TimingConfig, rng) -> GenericRunResult:
    if len(layout.verifiers) != 2:
        raise PlacementError("the generic template is driven by two verifiers")
    secrets = scheme.sample_secrets(rng)
    store = RegisterStore()
    positions = layout.positions()
    engine = EventEngine(positions)

    r_refs = store.alloc(basis_state([0] * scheme.n_r)) if scheme.n_r else []
    outcomes: list = [[None, None] for _ in scheme.steps]
    arrivals: dict = {}

    pending = {s: {} for s in range(len(scheme.steps))}

    def prover(engine, ev):
        payload = ev.payload
        s = payload["step"]
        step = scheme.steps[s]
        pending[s][payload["side"]] = payload
        if len(pending[s]) < 2:
            return
        xa, yb = pending[s]["a"], pending[s]["b"]
        u = step.unitary(xa["x"], yb["y"])
        generic_pv_step(store, xa.get("qubits", []), yb.get("qubits", []), r_refs, u)
        engine.note("P", "step-applied", step=s)
        engine.emit("P", "V0", {"kind": "return", "step": s, "qubits": xa.get("qubits", [])})
        engine.emit("P", "V1", {"kind": "return", "step": s, "qubits": yb.get("qubits", [])})

    engine.on("P", prover)

    def verifier(side, vid):
        def _on(engine, ev):
            payload = ev.payload
            s = payload["step"]
            arrivals[(s, vid)] = ev.arrival_time
            outcomes[s][side] = _measure_returned(store, payload.get("qubits", []), rng)

        return _on

    engine.on("V0", verifier(0, "V0"))
    engine.on("V1", verifier(1, "V1"))

    for s, step in enumerate(scheme.steps):
        t_s = step.challenge_time
        payload_a = {"kind": "challenge", "step": s, "side": "a", "x": step.classical_x(secrets)}
        if step.n_a:
            payload_a["qubits"] = store.alloc(step.state_a(secrets))
        payload_b = {"kind": "challenge", "step": s, "side": "b", "y": step.classical_y(secrets)}
        if step.n_b:
            payload_b["qubits"] = store.alloc(step.state_b(secrets))
        engine.emit("V0", "P", payload_a, emit_time=t_s - distance(layout.verifiers[0], layout.prover))
        engine.emit("V1", "P", payload_b, emit_time=t_s - distance(layout.verifiers[1], layout.prover))

    engine.run()

    timing_ok = True
    for s, step in enumerate(scheme.steps):
        for i, vid in enumerate(("V0", "V1")):
            t = arrivals.get((s, vid))
            deadline_cfg = TimingConfig(T=step.challenge_time, delta=cfg.delta, slack=cfg.slack)
            if t is None or not in_time(t, layout.verifiers[i], layout.prover, deadline_cfg):
                timing_ok = False
    outcome_tuples = [tuple(o) for o in outcomes]
    ok = timing_ok and scheme.accept(secrets, outcome_tuples)
    return GenericRunResult(
        accept=ok,
        timing_ok=timing_ok,
        outcomes=outcome_tuples,
        observables=scheme.observables(secrets, outcome_tuples),
        arrivals=arrivals,
        transcript=engine.transcript,
        notes=engine.notes,
    )


def pv_bb84_as_generic(challenge_time: float = 2.0) -> GenericScheme:
    """The BB84 round as a one-step generic scheme with a 1-qubit register.

    V0 sends H^theta|x> and expects the qubit back rotated to the
    computational basis; V1 sends theta and checks reply timing.  All quantum
    content is one qubit, so the attack's per-round success chance is 1/4.
    """

    def unitary(x, y):
        return H if y else I2

    step = GenericStep(
        n_a=1,
        n_b=0,
        challenge_time=challenge_time,
        classical_x=lambda s: None,
        classical_y=lambda s: s[0],
        state_a=lambda s: bb84_state(s[1], s[0]),
        state_b=None,
        unitary=unitary,
        x_choices=(None,),
        y_choices=(0, 1),
    )

    def accept(secrets, outcomes):
        return outcomes[0][0] == (secrets[1],)

    return GenericScheme(
        n_r=0,
        sample_secrets=lambda rng: (int(rng.integers(2)), int(rng.integers(2))),
        steps=(step,),
        accept=accept,
        observables=lambda s, o: (s[0], s[1], o[0][0]),
    )


def two_step_toy_scheme(t1: float = 2.0, t2: float | None = None) -> GenericScheme:
    """Two interleaved steps sharing a 1-qubit register R.

    Step 1: V0 sends |a>, V1 sends bit s1; the prover applies X^{s1} to A,
    copies A into R, and returns A (now |a xor s1>).  Step 2: V1 sends a
    blank reply qubit, V0 sends bit s2; the prover applies X^{s2} to R and
    copies R into B, returning |a xor s1 xor s2> to V1.
    """
    if t2 is None:
        t2 = t1 + 0.1  # inside the adversaries' crossing window

    def u_step1(x, y):
        # registers (A, R): value flip on A, then copy A into R
        flip = embed_gate(np.linalg.matrix_power(np.array([[0, 1], [1, 0]], dtype=complex), y), 2, [0])
        copy = embed_gate(np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex), 2, [0, 1])
        return copy @ flip

    def u_step2(x, y):
        # registers (B, R): value flip on R, then copy R into B
        flip = embed_gate(np.linalg.matrix_power(np.array([[0, 1], [1, 0]], dtype=complex), x), 2, [1])
        copy = embed_gate(np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex), 2, [1, 0])
        return copy @ flip

    step1 = GenericStep(
        n_a=1,
        n_b=0,
        challenge_time=t1,
        classical_x=lambda s: None,
        classical_y=lambda s: s[1],
        state_a=lambda s: basis_state([s[0]]),
        state_b=None,
        unitary=u_step1,
        x_choices=(None,),
        y_choices=(0, 1),
    )
    step2 = GenericStep(
        n_a=0,
        n_b=1,
        challenge_time=t2,
        classical_x=lambda s: s[2],
        classical_y=lambda s: None,
        state_a=None,
        state_b=lambda s: basis_state([0]),
        unitary=u_step2,
        x_choices=(0, 1),
        y_choices=(None,),
    )

    def accept(secrets, outcomes):
        a, s1, s2 = secrets
        return outcomes[0][0] == ((a ^ s1),) and outcomes[1][1] == ((a ^ s1 ^ s2),)

    def observables(secrets, outcomes):
        a, s1, s2 = secrets
        return (a, s1, s2, outcomes[0][0], outcomes[1][1])

    return GenericScheme(
        n_r=1,
        sample_secrets=lambda rng: tuple(int(rng.integers(2)) for _ in range(3)),
        steps=(step1, step2),
        accept=accept,
        observables=observables,
    )
