import numpy as np
import pytest

from qpv.qsim import PAULIS, apply_gate, fidelity_up_to_global_phase, make_epr, random_state
from qpv.registers import HandleError, RegisterStore, teleport_register


def test_teleportation_identity_with_correction():
    rng = np.random.default_rng(0)
    for _ in range(200):
        store = RegisterStore()
        psi = random_state(1, rng)
        [data] = store.alloc(psi)
        near, far = store.alloc_epr()
        k = store.bell_measure(data, near, rng)
        out = apply_gate(store.take([far]), PAULIS[k], [0])
        assert fidelity_up_to_global_phase(out, psi) > 1 - 1e-9


def test_bell_outcomes_uniform():
    rng = np.random.default_rng(42)
    counts = [0, 0, 0, 0]
    n = 10_000
    plus = apply_gate(random_state(1, np.random.default_rng(1)), PAULIS[0], [0])
    for _ in range(n):
        store = RegisterStore()
        [data] = store.alloc(plus)
        near, far = store.alloc_epr()
        counts[store.bell_measure(data, near, rng)] += 1
    sigma = np.sqrt(0.25 * 0.75 / n)
    for c in counts:
        assert abs(c / n - 0.25) < 3 * sigma


def test_consumed_handle_is_dead():
    rng = np.random.default_rng(1)
    store = RegisterStore()
    [data] = store.alloc(random_state(1, rng))
    near, far = store.alloc_epr()
    store.bell_measure(data, near, rng)
    for ref in (data, near):
        assert not store.alive(ref)
        with pytest.raises(HandleError):
            store.measure([ref], [0], rng)
    assert store.alive(far)


def test_take_refuses_entangled_subset():
    store = RegisterStore()
    a, b = store.alloc_epr()
    with pytest.raises(HandleError):
        store.take([a])


def test_register_teleport_multi_qubit():
    rng = np.random.default_rng(5)
    for _ in range(40):
        store = RegisterStore()
        psi = random_state(2, rng)
        refs = store.alloc(psi)
        new_refs, key = teleport_register(store, refs, rng)
        got = store.take(new_refs)
        correction = np.kron(PAULIS[key[0]], PAULIS[key[1]])
        corrected = correction @ got.amplitudes
        assert abs(abs(np.vdot(corrected, psi.amplitudes)) ** 2 - 1) < 1e-9


def test_reduced_state_peek():
    store = RegisterStore()
    a, b = store.alloc_epr()
    rho = store.reduced_state([a])
    assert np.allclose(rho.matrix, np.eye(2) / 2)
    assert store.alive(a) and store.alive(b)


def test_cross_cluster_gate_merges():
    rng = np.random.default_rng(8)
    store = RegisterStore()
    [a] = store.alloc(random_state(1, rng))
    [b] = store.alloc(random_state(1, rng))
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    store.apply(cnot, [a, b])
    state = store.take([a, b])
    assert abs(np.linalg.norm(state.amplitudes) - 1.0) < 1e-9


def test_epr_allocation_counter():
    store = RegisterStore()
    store.alloc_epr()
    store.alloc_epr()
    assert store.epr_pairs_allocated == 2
    assert store.qubits_allocated == 4
