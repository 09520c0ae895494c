"""Dense statevector engine for small multi-qubit systems.

Conventions, fixed once for the whole package:

* Qubit 0 is the most significant bit of the amplitude index, so a 2-qubit
  register stores amplitudes in the order |00>, |01>, |10>, |11>.
* Basis bits: 0 = computational basis, 1 = Hadamard basis.  Measuring an
  n-qubit state in basis theta observes x with probability |<psi|H^theta|x>|^2.
* State equality is always judged by fidelity_up_to_global_phase.

Everything is double precision and dense; the instances handled here stay
well below ~24 qubits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ATOL = 1e-9

_SQRT2_INV = 1.0 / np.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
XZ = X @ Z

# Teleportation correction symbols 0..3 in the order {I, X, Z, XZ}.
PAULIS = (I2, X, Z, XZ)

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

# Intermediate basis halfway between computational and Hadamard; the optimal
# single-measurement hedge against an unknown BB84 basis.
_C8, _S8 = np.cos(np.pi / 8), np.sin(np.pi / 8)
BREIDBART = np.array([[_C8, -_S8], [_S8, _C8]], dtype=complex)


class QsimError(ValueError):
    """Bad input to a simulator operation (shape, unitarity, range)."""


def is_unitary(matrix: np.ndarray, atol: float = ATOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    eye = np.eye(matrix.shape[0])
    return bool(np.allclose(matrix @ matrix.conj().T, eye, atol=atol))


@dataclass(frozen=True)
class Statevector:
    """Normalized complex amplitude vector over n qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        n = int(amps.size).bit_length() - 1
        if amps.ndim != 1 or amps.size != 2**n or amps.size < 1:
            raise QsimError(f"amplitude vector length {amps.size} is not a power of 2")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > ATOL:
            raise QsimError(f"state norm {norm!r} is not 1 within {ATOL}")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1


def basis_state(bits) -> Statevector:
    bits = list(bits)
    amps = np.zeros(2 ** len(bits), dtype=complex)
    index = 0
    for b in bits:
        index = (index << 1) | int(b)
    amps[index] = 1.0
    return Statevector(amps)


_BB84_CACHE: dict = {}


def bb84_state(x: int, theta: int) -> Statevector:
    """The qubit H^theta |x> for value bit x and basis bit theta."""
    key = (int(x), int(theta))
    state = _BB84_CACHE.get(key)
    if state is None:
        state = basis_state([x])
        if theta:
            state = Statevector(H @ state.amplitudes)
        _BB84_CACHE[key] = state
    return state


def make_epr() -> Statevector:
    """The maximally entangled pair (|00> + |11>) / sqrt(2)."""
    return Statevector(np.array([_SQRT2_INV, 0, 0, _SQRT2_INV], dtype=complex))


def tensor(a: Statevector, b: Statevector) -> Statevector:
    return Statevector(np.kron(a.amplitudes, b.amplitudes))


def _apply_on_axes(psi: np.ndarray, matrix: np.ndarray, axes) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to the given qubit axes of a shaped state."""
    k = len(axes)
    gate = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(gate, psi, axes=(tuple(range(k, 2 * k)), tuple(axes)))
    return np.moveaxis(out, tuple(range(k)), tuple(axes))


def apply_gate(state: Statevector, gate: np.ndarray, targets) -> Statevector:
    targets = list(targets)
    n = state.n_qubits
    if len(set(targets)) != len(targets):
        raise QsimError(f"duplicate target qubits {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise QsimError(f"target qubits {targets} out of range for {n} qubits")
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2 ** len(targets), 2 ** len(targets)):
        raise QsimError(f"gate shape {gate.shape} does not match {len(targets)} targets")
    if not is_unitary(gate):
        raise QsimError("gate matrix is not unitary within tolerance")
    psi = state.amplitudes.reshape((2,) * n)
    return Statevector(_apply_on_axes(psi, gate, targets).reshape(-1))


def measure_in_basis(state: Statevector, basis, targets, rng) -> tuple[list[int], Statevector]:
    """Measure target qubits qubit-wise in the given bases.

    Returns the observed bits and the renormalized post-measurement state;
    measured qubits are collapsed in place (the register keeps its size).
    """
    targets = list(targets)
    basis = list(basis)
    if len(basis) != len(targets):
        raise QsimError("basis length must match number of targets")
    n = state.n_qubits
    psi = state.amplitudes.reshape((2,) * n)
    hadamard_targets = [t for t, b in zip(targets, basis) if b]
    if hadamard_targets:
        psi = _apply_on_axes(psi, _h_layer(len(hadamard_targets)), hadamard_targets)

    moved = np.moveaxis(psi, targets, range(len(targets)))
    flat = moved.reshape(2 ** len(targets), -1)
    probs = np.einsum("ij,ij->i", flat, flat.conj()).real
    probs = np.maximum(probs, 0.0)
    probs /= probs.sum()
    outcome = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    outcome = min(outcome, len(probs) - 1)

    post = np.zeros_like(flat)
    post[outcome] = flat[outcome] / np.sqrt(probs[outcome])
    psi = np.moveaxis(post.reshape(moved.shape), range(len(targets)), targets)
    if hadamard_targets:
        psi = _apply_on_axes(psi, _h_layer(len(hadamard_targets)), hadamard_targets)
    bits = [(outcome >> (len(targets) - 1 - i)) & 1 for i in range(len(targets))]
    return bits, Statevector(psi.reshape(-1))


def _h_layer(k: int) -> np.ndarray:
    out = H
    for _ in range(k - 1):
        out = np.kron(out, H)
    return out


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix (within 1e-9)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QsimError(f"density matrix must be square, got {m.shape}")
        if not np.allclose(m, m.conj().T, atol=ATOL):
            raise QsimError("density matrix is not Hermitian within tolerance")
        tr = np.trace(m).real
        if abs(tr - 1.0) > ATOL:
            raise QsimError(f"density matrix trace {tr!r} is not 1 within {ATOL}")
        if np.linalg.eigvalsh(m).min() < -ATOL:
            raise QsimError("density matrix has a negative eigenvalue beyond tolerance")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


def partial_trace(state: Statevector, keep) -> DensityMatrix:
    """Reduced density matrix on the kept qubits, ordered as listed."""
    keep = list(keep)
    n = state.n_qubits
    if not keep:
        raise QsimError("keep must name at least one qubit")
    if len(set(keep)) != len(keep) or any(q < 0 or q >= n for q in keep):
        raise QsimError(f"keep list {keep} invalid for {n} qubits")
    psi = state.amplitudes.reshape((2,) * n)
    drop = [q for q in range(n) if q not in keep]
    rho = np.tensordot(psi, psi.conj(), axes=(drop, drop))
    # tensordot leaves kept axes in ascending qubit order on both sides
    kept_sorted = sorted(keep)
    order = [kept_sorted.index(q) for q in keep]
    k = len(keep)
    rho = np.transpose(rho, order + [k + i for i in order])
    return DensityMatrix(rho.reshape(2**k, 2**k))


def embed_gate(gate: np.ndarray, n: int, targets) -> np.ndarray:
    """The full 2^n x 2^n matrix acting as `gate` on the given qubits."""
    gate = np.asarray(gate, dtype=complex)
    dim = 2**n
    cols = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    return _apply_on_axes(cols, gate, list(targets)).reshape(dim, dim)


def fidelity_up_to_global_phase(a: Statevector, b: Statevector) -> float:
    """|<a|b>|^2; 1 for states equal up to a global phase."""
    if a.amplitudes.size != b.amplitudes.size:
        raise QsimError("fidelity requires states of equal dimension")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def random_state(n_qubits: int, rng) -> Statevector:
    amps = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return Statevector(amps / np.linalg.norm(amps))


def random_unitary(dim: int, rng) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
