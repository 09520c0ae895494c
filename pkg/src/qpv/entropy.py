"""Information-theoretic numerics on small density matrices.

Binary entropy and its inverse, von Neumann and conditional entropies, the
averaging law for conditioning on a classical register (computed by two
independent code paths so it can be checked numerically), the Fano bound on
guessing error, and the complementary-information-tradeoff (CIT) audit that
underlies the soundness ceiling: measuring a register in a uniformly random
basis leaves H(X|Theta,E) + H(X|Theta,F) >= n for any split of the side
information into systems E and F.

All logarithms are base 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .qsim import ATOL, DensityMatrix, QsimError, Statevector, _apply_on_axes, _h_layer

EIG_CUTOFF = 1e-12  # eigenvalues below this count as 0 in entropy sums
H_INV_TOL = 1e-12


def binary_entropy(p: float) -> float:
    if p < 0.0 or p > 1.0:
        raise ValueError(f"binary_entropy requires p in [0,1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


def binary_entropy_inverse(y: float) -> float:
    """The unique p in [0, 1/2] with h(p) = y, by bisection."""
    if y < 0.0 or y > 1.0:
        raise ValueError(f"binary_entropy_inverse requires y in [0,1], got {y}")
    if y == 1.0:
        return 0.5
    if y == 0.0:
        return 0.0
    lo, hi = 0.0, 0.5
    while hi - lo > H_INV_TOL:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def soundness_epsilon() -> float:
    """Acceptance ceiling 1 - h^{-1}(1/2) for any no-entanglement attack."""
    return 1.0 - binary_entropy_inverse(0.5)


def _entropy_of_matrix(m: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(m)
    eig = eig[eig > EIG_CUTOFF]
    return float(-(eig * np.log2(eig)).sum()) if eig.size else 0.0


def von_neumann_entropy(rho) -> float:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if not np.allclose(m, m.conj().T, atol=ATOL):
        raise QsimError("entropy requires a Hermitian matrix")
    return _entropy_of_matrix(m)


def partial_trace_dm(rho, dims, keep) -> DensityMatrix:
    """Partial trace of a bipartite (or multipartite) density matrix."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    dims = tuple(int(d) for d in dims)
    keep = list(keep)
    n = len(dims)
    drop = [i for i in range(n) if i not in keep]
    t = m.reshape(dims + dims)
    perm = keep + drop + [n + i for i in keep] + [n + i for i in drop]
    t = np.transpose(t, perm)
    dk = int(np.prod([dims[i] for i in keep]))
    dd = int(np.prod([dims[i] for i in drop])) if drop else 1
    t = t.reshape(dk, dd, dk, dd)
    return DensityMatrix(np.einsum("iaja->ij", t))


def conditional_entropy(rho_ab, dims: tuple[int, int]) -> float:
    """H(A|B) = H(AB) - H(B); may be negative for entangled states."""
    m = rho_ab.matrix if isinstance(rho_ab, DensityMatrix) else np.asarray(rho_ab, dtype=complex)
    da, db = dims
    if da * db != m.shape[0]:
        raise QsimError(f"dims {dims} do not match matrix of size {m.shape[0]}")
    rho_b = partial_trace_dm(m, (da, db), [1])
    return von_neumann_entropy(m) - von_neumann_entropy(rho_b)


@dataclass(frozen=True)
class HybridState:
    """Classical register Y with a quantum AB block for each value y."""

    weights: tuple[float, ...]
    blocks: tuple[DensityMatrix, ...]
    block_dims: tuple[int, int]  # (dim A, dim B) inside every block

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > ATOL or (w < -ATOL).any():
            raise QsimError("hybrid weights must be a probability distribution")
        if len(self.weights) != len(self.blocks):
            raise QsimError("one block per weight required")
        da, db = self.block_dims
        for b in self.blocks:
            if b.dim != da * db:
                raise QsimError(f"block dim {b.dim} does not match declared {da}x{db}")


def conditional_entropy_hybrid(state: HybridState) -> float:
    """H(A|B,Y) as the weighted average of per-y conditional entropies."""
    return float(
        sum(
            w * conditional_entropy(block, state.block_dims)
            for w, block in zip(state.weights, state.blocks)
            if w > 0.0
        )
    )


def conditional_entropy_hybrid_assembled(state: HybridState) -> float:
    """H(A|B,Y) computed directly on the assembled block-diagonal state.

    Independent of conditional_entropy_hybrid: builds rho_ABY explicitly with
    Y as an extra orthonormal register and evaluates H(ABY) - H(BY).
    """
    da, db = state.block_dims
    ny = len(state.weights)
    dim = da * db * ny
    rho = np.zeros((dim, dim), dtype=complex)
    for y, (w, block) in enumerate(zip(state.weights, state.blocks)):
        yy = np.zeros((ny, ny))
        yy[y, y] = 1.0
        rho += w * np.kron(block.matrix, yy)
    rho_by = partial_trace_dm(rho, (da, db, ny), [1, 2])
    return _entropy_of_matrix(rho) - von_neumann_entropy(rho_by)


@dataclass(frozen=True)
class CitInstance:
    """Pure state on registers A (n_a qubits), E (n_e), F (n_f), in that order."""

    psi: Statevector
    n_a: int
    n_e: int
    n_f: int
    theta: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_a + self.n_e + self.n_f != self.psi.n_qubits:
            raise QsimError("register sizes must partition the qubit count")
        if self.n_a < 1:
            raise QsimError("register A must hold at least one qubit")


def _measured_cq_blocks(inst: CitInstance, theta, side: str) -> list[np.ndarray]:
    """Unnormalized side blocks of the cq state after measuring A in basis theta.

    Returns, for each outcome x, the (subnormalized) density matrix of E (or
    F) conditioned on observing x; their traces sum to 1.
    """
    n_a, n_e, n_f = inst.n_a, inst.n_e, inst.n_f
    psi = inst.psi.amplitudes.reshape((2,) * (n_a + n_e + n_f))
    rotate = [a for a, b in zip(range(n_a), theta) if b]
    if rotate:
        psi = _apply_on_axes(psi, _h_layer(len(rotate)), rotate)
    de, df = 2**n_e, 2**n_f
    blocks = psi.reshape(2**n_a, de, df)
    out = []
    for x in range(2**n_a):
        v = blocks[x]
        if side == "E":
            out.append(v @ v.conj().T)  # trace out F
        else:
            out.append(v.T @ v.conj())  # trace out E
    return out


def _cond_entropy_given_side(inst: CitInstance, theta, side: str) -> float:
    """H(X|side) on the cq state obtained by measuring A in basis theta."""
    blocks = _measured_cq_blocks(inst, theta, side)
    d = blocks[0].shape[0]
    xe = np.zeros((len(blocks) * d, len(blocks) * d), dtype=complex)
    for x, b in enumerate(blocks):
        xe[x * d : (x + 1) * d, x * d : (x + 1) * d] = b
    rho_side = sum(blocks)
    return _entropy_of_matrix(xe) - _entropy_of_matrix(rho_side)


def check_cit(instance: CitInstance) -> tuple[float, bool]:
    """Audit H(X|Theta,E) + H(X|Theta,F) >= n_a with Theta uniform.

    X is the outcome of measuring A in basis Theta; the conditional entropies
    are averaged over all basis strings.
    """
    n_a = instance.n_a
    lhs = 0.0
    thetas = list(product((0, 1), repeat=n_a))
    for theta in thetas:
        lhs += _cond_entropy_given_side(instance, theta, "E")
        lhs += _cond_entropy_given_side(instance, theta, "F")
    lhs /= len(thetas)
    return lhs, bool(lhs >= n_a - 1e-7)


def check_cit_fixed_basis(instance: CitInstance) -> tuple[float, bool]:
    """Single-basis variant: H(X_theta|E) + H(X_thetabar|F) >= n_a."""
    if instance.theta is None:
        raise QsimError("instance.theta required for the fixed-basis check")
    theta = tuple(instance.theta)
    comp = tuple(1 - t for t in theta)
    lhs = _cond_entropy_given_side(instance, theta, "E") + _cond_entropy_given_side(
        instance, comp, "F"
    )
    return lhs, bool(lhs >= instance.n_a - 1e-7)


def fano_bound(cond_entropy: float, alphabet_size: int) -> float:
    """Minimal guessing-error probability q with h(q) + q*log(M-1) >= H(X|Y)."""
    if cond_entropy < 0.0:
        raise ValueError("conditional entropy must be nonnegative")
    if alphabet_size < 2:
        raise ValueError("alphabet must have at least two symbols")
    max_h = np.log2(alphabet_size)
    if cond_entropy > max_h + 1e-9:
        raise ValueError(
            f"conditional entropy {cond_entropy} exceeds log2({alphabet_size}); infeasible"
        )
    if alphabet_size == 2:
        return binary_entropy_inverse(min(cond_entropy, 1.0))
    slope = np.log2(alphabet_size - 1)
    lo, hi = 0.0, 1.0 - 1.0 / alphabet_size

    def lhs(q):
        return binary_entropy(q) + q * slope

    if cond_entropy >= lhs(hi):
        return hi
    while hi - lo > H_INV_TOL:
        mid = 0.5 * (lo + hi)
        if lhs(mid) < cond_entropy:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
