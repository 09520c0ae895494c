"""Attack strategies against the position-verification rounds.

Five concrete coalitions plus the universal simulation attack:

* breidbart      - measure the qubit immediately in the intermediate basis;
                   the best single-measurement hedge (success cos^2(pi/8)).
* random-basis   - guess the basis, measure, reply (success 3/4).
* store-and-wait - hold the qubit until the basis arrives; the far reply is
                   inevitably late.
* forward        - relay the qubit toward the basis side; the near reply is
                   late instead.
* teleport-pre-shared - with one pre-shared EPR pair and one crossing round
                   of classical messages, win with certainty.  Rejected by
                   the no-pre-shared-entanglement evaluator.
* run_generic_inqc_attack - instantaneous nonlocal computation of every step
                   unitary of a generic scheme, reproducing the honest
                   verifier view exactly, timing included.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .entropy import CitInstance
from .qsim import BREIDBART, Statevector, basis_state, bb84_state, embed_gate, is_unitary, make_epr
from .registers import RegisterStore, teleport_register
from .spacetime import EventEngine, PlacementError, Position, TimingConfig, distance, in_time
from .protocols import GenericRunResult, GenericScheme, Layout, ProtocolVerdict, pv_ddim_round
from .teleport import PauliKey, _inqc_rounds, identity_key, pauli_effect_on_bb84


class ModelViolation(RuntimeError):
    """Strategy requires resources the evaluation model forbids."""


def _midpoint(a: Position, b: Position) -> Position:
    return Position(tuple((x + y) / 2 for x, y in zip(a.coords, b.coords)))


@lru_cache(maxsize=64)
def _cached_positions(layout: Layout) -> dict[str, Position]:
    return {f"A{i}": _midpoint(v, layout.prover) for i, v in enumerate(layout.verifiers)}


def default_adversary_positions(layout: Layout) -> dict[str, Position]:
    """One adversary per verifier, halfway between that verifier and pos."""
    return dict(_cached_positions(layout))


class AttackInstance:
    """One round's worth of adversary parties, handlers, and resources."""

    def __init__(self, positions: dict[str, Position], routes: dict[int, str], register: Callable):
        self.positions = positions
        self._routes = routes
        self._register = register

    def route(self, verifier_index: int) -> str:
        return self._routes[verifier_index]

    def register(self, engine: EventEngine, store: RegisterStore, rng, ctx) -> None:
        self._register(engine, store, rng, ctx)


@dataclass(frozen=True)
class AttackStrategy:
    id: str
    epr_budget: int  # pre-shared EPR pairs required at round start
    builder: Callable = field(repr=False)

    def build(self, layout: Layout, cfg: TimingConfig, carry: dict | None = None) -> AttackInstance:
        return self.builder(layout, cfg, carry if carry is not None else {})


def _broadcast_reply(engine, sender, value, n_verifiers):
    for i in range(n_verifiers):
        engine.emit(sender, f"V{i}", {"kind": "reply", "value": value})


def attack_breidbart() -> AttackStrategy:
    def builder(layout, cfg, carry):
        positions = default_adversary_positions(layout)
        k = len(layout.verifiers)

        def register(engine, store, rng, ctx):
            def a0(engine, ev):
                payload = ev.payload
                if payload.get("kind") != "bb84":
                    return
                bit = store.measure_in_vector_basis([payload["ref"]], BREIDBART, rng)
                _broadcast_reply(engine, "A0", int(bit), k)

            engine.on("A0", a0)

        routes = {i: f"A{i}" for i in range(k)}
        return AttackInstance(positions, routes, register)

    return AttackStrategy("breidbart", 0, builder)


def attack_random_basis() -> AttackStrategy:
    def builder(layout, cfg, carry):
        positions = default_adversary_positions(layout)
        k = len(layout.verifiers)

        def register(engine, store, rng, ctx):
            def a0(engine, ev):
                payload = ev.payload
                if payload.get("kind") != "bb84":
                    return
                guess = int(rng.integers(2))
                bit = store.measure([payload["ref"]], [guess], rng)[0]
                _broadcast_reply(engine, "A0", bit, k)

            engine.on("A0", a0)

        routes = {i: f"A{i}" for i in range(k)}
        return AttackInstance(positions, routes, register)

    return AttackStrategy("random-basis", 0, builder)


def attack_store_and_wait() -> AttackStrategy:
    """Hold the qubit at the near side until every basis share has arrived.

    The measured bit is always correct, but the reply toward the far side
    cannot make its deadline: correctness 1, timing verdict false.
    """

    def builder(layout, cfg, carry):
        positions = default_adversary_positions(layout)
        k = len(layout.verifiers)

        def register(engine, store, rng, ctx):
            pending = {"qubit": None, "shares": {}, "done": False}

            def a0(engine, ev):
                payload = ev.payload
                if payload.get("kind") == "bb84":
                    pending["qubit"] = payload["ref"]
                elif payload.get("kind") == "share":
                    pending["shares"][payload["index"]] = payload["value"]
                if pending["done"] or pending["qubit"] is None or len(pending["shares"]) < k - 1:
                    return
                basis = 0
                for v in pending["shares"].values():
                    basis ^= v
                bit = store.measure([pending["qubit"]], [basis], rng)[0]
                _broadcast_reply(engine, "A0", bit, k)
                pending["done"] = True

            def relay(i):
                def _on(engine, ev):
                    if ev.payload.get("kind") == "share":
                        engine.emit(f"A{i}", "A0", ev.payload)

                return _on

            engine.on("A0", a0)
            for i in range(1, k):
                engine.on(f"A{i}", relay(i))

        routes = {i: f"A{i}" for i in range(k)}
        return AttackInstance(positions, routes, register)

    return AttackStrategy("store-and-wait", 0, builder)


def attack_forward() -> AttackStrategy:
    """Send the qubit onward to the basis side; now the near reply is late."""

    def builder(layout, cfg, carry):
        if len(layout.verifiers) != 2:
            raise PlacementError("forward attack is defined for two verifiers")
        positions = default_adversary_positions(layout)

        def register(engine, store, rng, ctx):
            pending = {"qubit": None, "theta": None, "done": False}

            def a0(engine, ev):
                if ev.payload.get("kind") == "bb84":
                    engine.emit("A0", "A1", ev.payload)

            def a1(engine, ev):
                payload = ev.payload
                if payload.get("kind") == "bb84":
                    pending["qubit"] = payload["ref"]
                elif payload.get("kind") == "share":
                    pending["theta"] = payload["value"]
                if pending["done"] or pending["qubit"] is None or pending["theta"] is None:
                    return
                bit = store.measure([pending["qubit"]], [pending["theta"]], rng)[0]
                _broadcast_reply(engine, "A1", bit, 2)
                pending["done"] = True

            engine.on("A0", a0)
            engine.on("A1", a1)

        return AttackInstance(positions, {0: "A0", 1: "A1"}, register)

    return AttackStrategy("forward", 0, builder)


def attack_teleport_pre_shared() -> AttackStrategy:
    """Perfect break using one pre-shared EPR pair and one crossing round.

    A0 Bell-measures the incoming qubit against her half (key k) and sends k
    across; A1 measures his half in basis theta on receipt (bit x''), sends
    (x'', theta) across; each side computes x = x'' xor flip(k, theta) and
    replies exactly in time.
    """

    def builder(layout, cfg, carry):
        if len(layout.verifiers) != 2:
            raise PlacementError("teleport attack is defined for two verifiers")
        positions = default_adversary_positions(layout)

        def register(engine, store, rng, ctx):
            ea, eb = store.alloc_epr()  # pre-shared before any challenge
            state = {"k": None, "x2": None, "theta": None}

            def a0(engine, ev):
                payload = ev.payload
                if payload.get("kind") == "bb84":
                    state["k"] = store.bell_measure(payload["ref"], ea, rng)
                    engine.emit("A0", "A1", {"kind": "key", "k": state["k"]})
                elif payload.get("kind") == "cross":
                    x = payload["x2"] ^ pauli_effect_on_bb84(
                        PauliKey((state["k"],)), payload["theta"], 0
                    )
                    engine.emit("A0", "V0", {"kind": "reply", "value": x})

            def a1(engine, ev):
                payload = ev.payload
                if payload.get("kind") == "share":
                    state["theta"] = payload["value"]
                    state["x2"] = store.measure([eb], [state["theta"]], rng)[0]
                    engine.emit("A1", "A0", {"kind": "cross", "x2": state["x2"], "theta": state["theta"]})
                elif payload.get("kind") == "key":
                    x = state["x2"] ^ pauli_effect_on_bb84(
                        PauliKey((payload["k"],)), state["theta"], 0
                    )
                    engine.emit("A1", "V1", {"kind": "reply", "value": x})

            engine.on("A0", a0)
            engine.on("A1", a1)

        return AttackInstance(positions, {0: "A0", 1: "A1"}, register)

    return AttackStrategy("teleport-pre-shared", 1, builder)


ATTACKS = {
    "breidbart": attack_breidbart,
    "random-basis": attack_random_basis,
    "store-and-wait": attack_store_and_wait,
    "forward": attack_forward,
    "teleport-pre-shared": attack_teleport_pre_shared,
}


def evaluate_attack(
    strategy: AttackStrategy,
    layout: Layout,
    cfg: TimingConfig,
    rng,
    model: str = "no_pe",
    purified: bool = False,
) -> ProtocolVerdict:
    """Run one attacked round under the chosen adversary model.

    The no_pe model rejects strategies that declare pre-shared entanglement;
    the unrestricted model admits them.
    """
    if model not in ("no_pe", "unrestricted"):
        raise ValueError(f"unknown model {model!r}")
    if model == "no_pe" and strategy.epr_budget > 0:
        raise ModelViolation(
            f"strategy {strategy.id!r} needs {strategy.epr_budget} pre-shared EPR pairs"
        )
    attack = strategy.build(layout, cfg)
    return pv_ddim_round(layout, cfg, rng, attack=attack, purified=purified)


def teleport_attack_exhaustive() -> list[dict]:
    """All 16 (theta, x, bell-key) cases of the pre-shared-pair attack.

    The post-measurement half holds sigma_k^dag H^theta|x>, whose basis-theta
    readout is deterministic, so each case is decided exactly.
    """
    from .qsim import PAULIS, apply_gate, measure_in_basis

    cases = []
    rng = np.random.default_rng(0)  # measurement below is deterministic
    for theta in (0, 1):
        for x in (0, 1):
            for k in range(4):
                half = apply_gate(bb84_state(x, theta), PAULIS[k].conj().T, [0])
                (x2,), _ = measure_in_basis(half, [theta], [0], rng)
                guess = x2 ^ pauli_effect_on_bb84(PauliKey((k,)), theta, 0)
                cases.append(
                    {"theta": theta, "x": x, "k": k, "x2": x2, "reply": guess, "success": guess == x}
                )
    return cases


# ---------------------------------------------------------------------------
# Split strategies: the general shape of a no-pre-shared-entanglement attack.
# The near adversary maps the flying qubit into E0 (kept) tensor E1 (sent),
# then each side measures its part with a basis that may depend on theta.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitStrategy:
    isometry: np.ndarray  # (dim_e0 * dim_e1, 2), norm preserving
    dims: tuple[int, int]
    measurement: Callable  # (side in {0,1}, theta) -> (basis columns, outcome bits)

    def __post_init__(self):
        w = np.asarray(self.isometry, dtype=complex)
        d0, d1 = self.dims
        if w.shape != (d0 * d1, 2):
            raise ValueError(f"isometry shape {w.shape} does not match dims {self.dims}")
        if not np.allclose(w.conj().T @ w, np.eye(2), atol=1e-9):
            raise ValueError("isometry does not preserve norm within tolerance")


def breidbart_split() -> SplitStrategy:
    """The Breidbart measurement, phrased as keep-one-copy / send-one-copy."""
    w = np.zeros((4, 2), dtype=complex)
    for o in range(2):
        ket = np.zeros(4)
        ket[o * 2 + o] = 1.0
        w += np.outer(ket, BREIDBART[:, o].conj())

    def measurement(side, theta):
        return np.eye(2, dtype=complex), (0, 1)

    return SplitStrategy(w, (2, 2), measurement)


def random_split(rng, dim_e0: int = 2, dim_e1: int = 2) -> SplitStrategy:
    from .qsim import random_unitary

    w = random_unitary(dim_e0 * dim_e1, rng)[:, :2]
    tables = {}
    for side, dim in ((0, dim_e0), (1, dim_e1)):
        for theta in (0, 1):
            basis = random_unitary(dim, rng)
            bits = tuple(int(rng.integers(2)) for _ in range(dim))
            tables[(side, theta)] = (basis, bits)

    def measurement(side, theta):
        return tables[(side, theta)]

    return SplitStrategy(w, (dim_e0, dim_e1), measurement)


def split_acceptance_exact(split: SplitStrategy) -> float:
    """Closed-form acceptance of a split strategy, enumerated over theta, x."""
    d0, d1 = split.dims
    total = 0.0
    for theta in (0, 1):
        cols0, bits0 = split.measurement(0, theta)
        cols1, bits1 = split.measurement(1, theta)
        for x in (0, 1):
            v = split.isometry @ bb84_state(x, theta).amplitudes
            amp = cols0.conj().T @ v.reshape(d0, d1) @ cols1.conj()
            p = 0.0
            for i in range(d0):
                if bits0[i] != x:
                    continue
                for j in range(d1):
                    if bits1[j] == x:
                        p += abs(amp[i, j]) ** 2
            total += 0.25 * p
    return total


def cit_instance_for_split(split: SplitStrategy) -> CitInstance:
    """Tripartite state (kept verifier half, E0, E1) induced by the split."""
    d0, d1 = split.dims
    n_e = (d0 - 1).bit_length()
    n_f = (d1 - 1).bit_length()
    if 2**n_e != d0 or 2**n_f != d1:
        raise ValueError("split dimensions must be powers of two for the audit")
    epr = make_epr().amplitudes.reshape(2, 2)
    psi = np.einsum("ab,eb->ae", epr, split.isometry.reshape(d0 * d1, 2)).reshape(-1)
    return CitInstance(Statevector(psi), n_a=1, n_e=n_e, n_f=n_f)


# ---------------------------------------------------------------------------
# The universal attack on generic schemes: per step, instantaneous nonlocal
# computation of the step unitary (with the pending register-R correction
# folded in), then one crossing classical round, then replies timed to land
# exactly when the honest prover's would.
# ---------------------------------------------------------------------------


@dataclass
class GenericAttackReport:
    trials: int
    attack_runs: list[GenericRunResult]
    honest_runs: list[GenericRunResult]
    inqc_success_runs: int
    conditional_acceptance: float
    unconditional_acceptance: float
    honest_acceptance: float
    chi_square_p: float
    timing_exact: bool
    cross_messages_per_step: float
    epr_pairs_used_total: int


class _GenericAttackStep:
    """Shared quantum phase of one attacked step, materialized lazily.

    Both adversaries' local operations take zero time and need no messages
    from the other side, so their classical outputs exist at their own
    challenge-arrival instants; the simulator runs the whole phase once, at
    first use, which is always after both arrivals.
    """

    def __init__(self, run, index):
        self.run = run
        self.index = index
        self.inputs = {}
        self.computed = False
        self.success = False
        self.out_a_refs = []
        self.out_b_refs = []
        self.correction_a = None
        self.correction_b = None

    def ensure_computed(self):
        if self.computed:
            return
        if self.index > 0:
            self.run.steps[self.index - 1].ensure_computed()
        run, step = self.run, self.run.scheme.steps[self.index]
        store, rng = run.store, run.rng
        n_a, n_b, n_r = step.n_a, step.n_b, run.scheme.n_r
        n = n_a + n_b + n_r

        a_refs = self.inputs.get("qubits_a", [])
        b_refs = self.inputs.get("qubits_b", [])
        x, y = self.inputs["x"], self.inputs["y"]

        # A1 folds his side (B and the persistent R) over to A0
        fold_refs, kb = teleport_register(store, list(b_refs) + list(run.r_refs), rng)
        kb_full = identity_key(n_a).symbols + kb
        pend_full = identity_key(n_a + n_b).symbols + run.pending_r.symbols
        u_fold = (
            step.unitary(x, y)
            @ PauliKey(pend_full).matrix()
            @ PauliKey(kb_full).matrix()
        )

        out_refs, pending, tr = _inqc_rounds(
            store,
            u_fold,
            n,
            (x, run.pending_label_a),
            (y, kb, run.pending_label_b),
            run.rounds_cap,
            rng,
            list(a_refs) + fold_refs,
            len(step.x_choices),
        )
        self.transcript = tr
        run.epr_pairs_used += tr.epr_pairs_used + len(fold_refs)
        self.success = tr.succeeded

        # A0 sends B and R back to A1 (her own keys ka), keeps the A part
        back_refs, ka = teleport_register(store, out_refs[n_a:], rng)
        run.epr_pairs_used += len(back_refs)
        self.out_a_refs = out_refs[:n_a]
        self.out_b_refs = back_refs[:n_b]
        run.r_refs = back_refs[n_b:]

        if self.success:
            ell = pending  # the success round's return key, known to A1
            self.correction_a = ell.part(0, n_a)
            self.correction_b = PauliKey(ka[:n_b]).compose(ell.part(n_a, n_a + n_b))
            run.pending_r = PauliKey(ka[n_b:]).compose(ell.part(n_a + n_b, n))
        else:
            self.correction_a = identity_key(n_a)
            self.correction_b = identity_key(n_b)
            run.pending_r = identity_key(n_r)  # lost track; replies stay raw
        run.pending_label_a = run.pending_label_a + (("ka", self.index, ka),)
        run.pending_label_b = run.pending_label_b + (("kb", self.index, kb),)
        self.computed = True


class _GenericAttackRun:
    def __init__(self, scheme, layout, cfg, rounds_cap, rng, positions):
        self.scheme = scheme
        self.layout = layout
        self.cfg = cfg
        self.rounds_cap = rounds_cap
        self.rng = rng
        self.store = RegisterStore()
        self.positions = positions
        self.r_refs = (
            self.store.alloc(basis_state([0] * scheme.n_r)) if scheme.n_r else []
        )
        self.pending_r = identity_key(scheme.n_r)
        self.pending_label_a = ()
        self.pending_label_b = ()
        self.epr_pairs_used = 0
        self.steps = [_GenericAttackStep(self, i) for i in range(len(scheme.steps))]


def _run_generic_attack_once(scheme, layout, cfg, rounds_cap, rng) -> tuple[GenericRunResult, list[bool], int, int]:
    from .protocols import _measure_returned

    adv = default_adversary_positions(layout)
    positions = layout.positions()
    del positions["P"]
    positions.update(adv)
    engine = EventEngine(positions)

    secrets = scheme.sample_secrets(rng)
    run = _GenericAttackRun(scheme, layout, cfg, rounds_cap, rng, positions)

    d_a0 = distance(adv["A0"], layout.prover)
    d_a1 = distance(adv["A1"], layout.prover)

    outcomes = [[None, None] for _ in scheme.steps]
    arrivals = {}
    cross_count = [0]

    def a0(engine, ev):
        payload = ev.payload
        s = payload["step"]
        st = run.steps[s]
        if payload.get("kind") == "challenge":
            st.inputs["x"] = payload["x"]
            st.inputs["qubits_a"] = payload.get("qubits", [])
            engine.emit("A0", "A1", {"kind": "cross-k", "step": s})
        elif payload.get("kind") == "cross-ell":
            cross_count[0] += 1
            st.ensure_computed()
            if st.out_a_refs and not st.correction_a.is_identity:
                run.store.apply(st.correction_a.matrix(), st.out_a_refs)
            engine.emit("A0", "V0", {"kind": "return", "step": s, "qubits": st.out_a_refs})

    def a1(engine, ev):
        payload = ev.payload
        s = payload["step"]
        st = run.steps[s]
        if payload.get("kind") == "challenge":
            st.inputs["y"] = payload["y"]
            st.inputs["qubits_b"] = payload.get("qubits", [])
            engine.emit("A1", "A0", {"kind": "cross-ell", "step": s})
        elif payload.get("kind") == "cross-k":
            cross_count[0] += 1
            st.ensure_computed()
            b_refs = st.out_b_refs if scheme.steps[s].n_b else []
            if b_refs and not st.correction_b.is_identity:
                run.store.apply(st.correction_b.matrix(), b_refs)
            engine.emit("A1", "V1", {"kind": "return", "step": s, "qubits": b_refs})

    engine.on("A0", a0)
    engine.on("A1", a1)

    def verifier(side, vid):
        def _on(engine, ev):
            payload = ev.payload
            s = payload["step"]
            arrivals[(s, vid)] = ev.arrival_time
            outcomes[s][side] = _measure_returned(run.store, payload.get("qubits", []), rng)

        return _on

    engine.on("V0", verifier(0, "V0"))
    engine.on("V1", verifier(1, "V1"))

    for s, step in enumerate(scheme.steps):
        payload_a = {"kind": "challenge", "step": s, "side": "a", "x": step.classical_x(secrets)}
        if step.n_a:
            payload_a["qubits"] = run.store.alloc(step.state_a(secrets))
        payload_b = {"kind": "challenge", "step": s, "side": "b", "y": step.classical_y(secrets)}
        if step.n_b:
            payload_b["qubits"] = run.store.alloc(step.state_b(secrets))
        engine.emit("V0", "A0", payload_a, emit_time=step.challenge_time - distance(layout.verifiers[0], layout.prover))
        engine.emit("V1", "A1", payload_b, emit_time=step.challenge_time - distance(layout.verifiers[1], layout.prover))

    engine.run()

    timing_ok = True
    for s, step in enumerate(scheme.steps):
        for i, vid in enumerate(("V0", "V1")):
            t = arrivals.get((s, vid))
            deadline = TimingConfig(T=step.challenge_time, delta=cfg.delta, slack=cfg.slack)
            if t is None or not in_time(t, layout.verifiers[i], layout.prover, deadline):
                timing_ok = False
    outcome_tuples = [tuple(o) for o in outcomes]
    ok = timing_ok and scheme.accept(secrets, outcome_tuples)
    result = GenericRunResult(
        accept=ok,
        timing_ok=timing_ok,
        outcomes=outcome_tuples,
        observables=scheme.observables(secrets, outcome_tuples),
        arrivals=arrivals,
        transcript=engine.transcript,
        notes=engine.notes,
    )
    step_flags = [st.success for st in run.steps]
    return result, step_flags, cross_count[0], run.epr_pairs_used


def run_generic_inqc_attack(
    scheme: GenericScheme,
    layout: Layout,
    cfg: TimingConfig,
    rounds_cap: int,
    rng,
    trials: int = 1,
) -> GenericAttackReport:
    """Attack a generic scheme and compare the verifier view with honest runs."""
    from scipy.stats import chi2_contingency

    from .protocols import run_generic_honest

    attack_runs, honest_runs = [], []
    success_runs = 0
    cond_accepts = 0
    uncond_accepts = 0
    honest_accepts = 0
    cross_total = 0
    pairs_total = 0
    timing_exact = True

    honest_arrival_template = None
    for _ in range(trials):
        result, flags, crossings, pairs = _run_generic_attack_once(
            scheme, layout, cfg, rounds_cap, rng
        )
        attack_runs.append(result)
        cross_total += crossings
        pairs_total += pairs
        uncond_accepts += result.accept
        if all(flags):
            success_runs += 1
            cond_accepts += result.accept
        honest = run_generic_honest(scheme, layout, cfg, rng)
        honest_runs.append(honest)
        honest_accepts += honest.accept
        if honest_arrival_template is None:
            honest_arrival_template = honest.arrivals
        for key, t in honest.arrivals.items():
            if abs(result.arrivals.get(key, np.inf) - t) > 1e-9:
                timing_exact = False

    def counts(runs):
        c: dict = {}
        for r in runs:
            c[r.observables] = c.get(r.observables, 0) + 1
        return c

    ca, ch = counts(attack_runs), counts(honest_runs)
    categories = sorted(set(ca) | set(ch), key=repr)
    if len(categories) < 2:
        p_value = 1.0
    else:
        table = np.array(
            [[ch.get(c, 0) for c in categories], [ca.get(c, 0) for c in categories]]
        )
        table = table[:, table.sum(axis=0) > 0]
        p_value = float(chi2_contingency(table).pvalue)

    return GenericAttackReport(
        trials=trials,
        attack_runs=attack_runs,
        honest_runs=honest_runs,
        inqc_success_runs=success_runs,
        conditional_acceptance=cond_accepts / success_runs if success_runs else 0.0,
        unconditional_acceptance=uncond_accepts / trials,
        honest_acceptance=honest_accepts / trials,
        chi_square_p=p_value,
        timing_exact=timing_exact,
        cross_messages_per_step=cross_total / (trials * len(scheme.steps)),
        epr_pairs_used_total=pairs_total,
    )
