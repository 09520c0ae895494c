"""Move-only qubit registers backed by shared statevector clusters.

Protocol messages carry QubitRef handles instead of state copies.  A handle
can be sent (moved) but never duplicated: measuring consumes it, and any
later use raises HandleError.  This enforces no-cloning mechanically inside
the simulator.

The store keeps disjoint clusters of entangled qubits.  Operations that span
clusters merge them first; measurements remove the measured qubits from
their cluster, so cluster sizes stay small even in long teleportation chains.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .qsim import PAULIS, H, Statevector, _apply_on_axes, make_epr

# Column k is the Bell vector (sigma_k (x) I)(|00>+|11>)/sqrt(2); projecting a
# (data, epr-half) pair onto column k leaves the far half in sigma_k^dag |psi>.
_BELL0 = make_epr().amplitudes
BELL_COLUMNS = np.stack(
    [np.kron(p, np.eye(2)) @ _BELL0 for p in PAULIS], axis=1
)


class HandleError(RuntimeError):
    """A register handle was reused after being consumed or moved."""


class QubitRef:
    """Opaque handle to one live qubit inside a RegisterStore."""

    __slots__ = ("store", "uid")

    def __init__(self, store: "RegisterStore", uid: int):
        self.store = store
        self.uid = uid

    def __repr__(self):
        return f"<qubit {self.uid}>"


class _Cluster:
    __slots__ = ("state", "qubits")

    def __init__(self, state: np.ndarray, qubits: list[int]):
        self.state = state  # flat complex array of length 2^len(qubits)
        self.qubits = qubits


class RegisterStore:
    def __init__(self):
        self._clusters: dict[int, _Cluster] = {}
        self._where: dict[int, int] = {}  # uid -> cluster id
        self._next_uid = 0
        self._next_cid = 0
        self.epr_pairs_allocated = 0
        self.qubits_allocated = 0

    # -- allocation ---------------------------------------------------------

    def alloc(self, state) -> list[QubitRef]:
        amps = state.amplitudes if isinstance(state, Statevector) else np.asarray(state, dtype=complex)
        n = int(amps.size).bit_length() - 1
        if amps.size != 2**n or n < 1:
            raise HandleError(f"cannot allocate register of length {amps.size}")
        uids = list(range(self._next_uid, self._next_uid + n))
        self._next_uid += n
        cid = self._next_cid
        self._next_cid += 1
        self._clusters[cid] = _Cluster(amps.astype(complex).copy(), uids)
        for uid in uids:
            self._where[uid] = cid
        self.qubits_allocated += n
        return [QubitRef(self, uid) for uid in uids]

    def alloc_epr(self) -> tuple[QubitRef, QubitRef]:
        self.epr_pairs_allocated += 1
        a, b = self.alloc(_BELL0)
        return a, b

    # -- bookkeeping --------------------------------------------------------

    def alive(self, ref: QubitRef) -> bool:
        return ref.uid in self._where

    def _cluster_of(self, ref: QubitRef) -> int:
        if ref.store is not self:
            raise HandleError("handle belongs to a different store")
        cid = self._where.get(ref.uid)
        if cid is None:
            raise HandleError(f"handle {ref.uid} was already consumed")
        return cid

    def _merge(self, cids: list[int]) -> int:
        base = cids[0]
        cluster = self._clusters[base]
        for cid in cids[1:]:
            other = self._clusters.pop(cid)
            cluster.state = np.kron(cluster.state, other.state)
            cluster.qubits.extend(other.qubits)
            for uid in other.qubits:
                self._where[uid] = base
        return base

    def _locate(self, refs) -> tuple[_Cluster, list[int]]:
        cids = []
        for r in refs:
            cid = self._cluster_of(r)
            if cid not in cids:
                cids.append(cid)
        cluster = self._clusters[self._merge(cids)]
        positions = {uid: i for i, uid in enumerate(cluster.qubits)}
        return cluster, [positions[r.uid] for r in refs]

    # -- operations ---------------------------------------------------------

    def apply(self, matrix: np.ndarray, refs) -> None:
        refs = list(refs)
        if len({r.uid for r in refs}) != len(refs):
            raise HandleError("duplicate handles in gate application")
        cluster, axes = self._locate(refs)
        n = len(cluster.qubits)
        psi = cluster.state.reshape((2,) * n)
        cluster.state = _apply_on_axes(psi, matrix, axes).reshape(-1)

    def measure_in_vector_basis(self, refs, columns: np.ndarray, rng) -> int:
        """Projective measurement in an orthonormal basis given as columns.

        The measured qubits are consumed; the cluster keeps the renormalized
        residual state on the remaining qubits.
        """
        refs = list(refs)
        if len({r.uid for r in refs}) != len(refs):
            raise HandleError("duplicate handles in measurement")
        cluster, axes = self._locate(refs)
        n = len(cluster.qubits)
        k = len(refs)
        if k == n and axes == list(range(k)):
            flat = cluster.state.reshape(2**k, 1)
        else:
            psi = np.moveaxis(cluster.state.reshape((2,) * n), axes, range(k))
            flat = psi.reshape(2**k, -1)
        amps = columns.conj().T @ flat  # (outcomes, rest)
        probs = np.einsum("ij,ij->i", amps, amps.conj()).real
        probs = np.maximum(probs, 0.0)
        probs /= probs.sum()
        outcome = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
        outcome = min(outcome, len(probs) - 1)

        residual = amps[outcome] / np.sqrt(probs[outcome])
        consumed = {r.uid for r in refs}
        for uid in consumed:
            del self._where[uid]
        cluster.qubits = [u for u in cluster.qubits if u not in consumed]
        if cluster.qubits:
            cluster.state = residual.reshape(-1)
        else:
            for cid, c in list(self._clusters.items()):
                if c is cluster:
                    del self._clusters[cid]
        return outcome

    def measure(self, refs, basis, rng) -> list[int]:
        """Measure each handle in its basis bit (0 computational, 1 Hadamard)."""
        refs = list(refs)
        basis = list(basis)
        for r, b in zip(refs, basis):
            if b:
                self.apply(H, [r])
        outcome = self.measure_in_vector_basis(refs, np.eye(2 ** len(refs)), rng)
        return [(outcome >> (len(refs) - 1 - i)) & 1 for i in range(len(refs))]

    def bell_measure(self, data: QubitRef, half: QubitRef, rng) -> int:
        """Bell measurement on (data, EPR half); outcome k in {0,1,2,3}.

        After the measurement the far half of the pair holds sigma_k^dag
        applied to whatever state the data qubit carried.
        """
        return self.measure_in_vector_basis([data, half], BELL_COLUMNS, rng)

    def take(self, refs) -> Statevector:
        """Extract the joint state of a cluster that is exactly these handles."""
        refs = list(refs)
        cluster, axes = self._locate(refs)
        if len(cluster.qubits) != len(refs):
            raise HandleError("cluster is entangled with qubits not being taken")
        n = len(refs)
        psi = np.moveaxis(cluster.state.reshape((2,) * n), axes, range(n))
        for r in refs:
            del self._where[r.uid]
        for cid, c in list(self._clusters.items()):
            if c is cluster:
                del self._clusters[cid]
        norm = np.linalg.norm(psi)
        return Statevector(psi.reshape(-1) / norm)

    def reduced_state(self, refs):
        """Simulator-side peek: reduced density matrix on the given handles."""
        from .qsim import partial_trace

        refs = list(refs)
        cluster, axes = self._locate(refs)
        state = Statevector(cluster.state / np.linalg.norm(cluster.state))
        return partial_trace(state, axes)


@lru_cache(maxsize=8)
def _epr_block(n: int) -> np.ndarray:
    out = _BELL0
    for _ in range(n - 1):
        out = np.kron(out, _BELL0)
    return out


@lru_cache(maxsize=8)
def _bell_block(n: int) -> np.ndarray:
    out = BELL_COLUMNS
    for _ in range(n - 1):
        out = np.kron(out, BELL_COLUMNS)
    return out


def teleport_register(store: RegisterStore, data_refs, rng) -> tuple[list[QubitRef], tuple[int, ...]]:
    """Teleport a register qubit-wise through fresh EPR pairs.

    Returns the receiving handles and the Pauli key (one symbol per qubit);
    the received state is the data state corrupted qubit-wise by sigma_k^dag.
    Corrections are deliberately NOT applied here.  The qubit-wise Bell
    measurements commute, so they are performed as one joint measurement.
    """
    data_refs = list(data_refs)
    n = len(data_refs)
    if n == 0:
        return [], ()
    pairs = store.alloc(_epr_block(n))  # (near_0, far_0, near_1, far_1, ...)
    store.epr_pairs_allocated += n
    near = pairs[0::2]
    far = pairs[1::2]
    targets = [r for pair in zip(data_refs, near) for r in pair]
    outcome = store.measure_in_vector_basis(targets, _bell_block(n), rng)
    key = tuple((outcome >> (2 * (n - 1 - i))) & 3 for i in range(n))
    return far, key
