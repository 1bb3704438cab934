"""Dense state-vector / density-matrix kernel for few-qubit circuits.

Basis ordering: bit k of a basis index, counted from the most significant
bit, is qubit k. For two qubits (c, h) the basis order is |00>, |01>, |10>,
|11> with c the left (most significant) label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-12
EIG_ATOL = 1e-10
MAX_QUBITS = 6


class StateError(ValueError):
    """Raised when an array does not describe a valid quantum state."""


@dataclass(frozen=True)
class QuantumState:
    """Statevector (1-D) or density matrix (2-D) over ``n_qubits`` qubits."""

    n_qubits: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise StateError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        data = np.asarray(self.data, dtype=complex)
        dim = 2**self.n_qubits
        if data.ndim == 1:
            if data.shape != (dim,):
                raise StateError(f"statevector must have length {dim}, got {data.shape}")
            norm = np.linalg.norm(data)
            if abs(norm - 1.0) > ATOL:
                raise StateError(f"statevector norm is {norm!r}, expected 1")
        elif data.ndim == 2:
            if data.shape != (dim, dim):
                raise StateError(f"density matrix must be {dim}x{dim}, got {data.shape}")
            if np.max(np.abs(data - data.conj().T)) > ATOL:
                raise StateError("density matrix is not Hermitian")
            tr = np.trace(data).real
            if abs(tr - 1.0) > ATOL:
                raise StateError(f"density matrix trace is {tr!r}, expected 1")
            lam = np.linalg.eigvalsh(data).min()
            if lam < -EIG_ATOL:
                raise StateError(f"density matrix has negative eigenvalue {lam:.3e}")
        else:
            raise StateError("state data must be 1-D or 2-D")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def is_density_matrix(self) -> bool:
        return self.data.ndim == 2

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def density_matrix(self) -> np.ndarray:
        """Return the density matrix as a fresh writable array."""
        if self.is_density_matrix:
            return self.data.copy()
        return np.outer(self.data, self.data.conj())

    def to_density_matrix(self) -> "QuantumState":
        if self.is_density_matrix:
            return self
        return QuantumState(self.n_qubits, self.density_matrix())

    def probabilities(self) -> np.ndarray:
        """Born probabilities of every computational basis state."""
        if self.is_density_matrix:
            p = np.real(np.diag(self.data))
        else:
            p = np.abs(self.data) ** 2
        return np.clip(p, 0.0, None)

    @classmethod
    def basis(cls, n_qubits: int, bits: str | int, density: bool = False) -> "QuantumState":
        """Computational basis state, given as a bitstring ("0110") or index."""
        index = int(bits, 2) if isinstance(bits, str) else int(bits)
        if isinstance(bits, str) and len(bits) != n_qubits:
            raise StateError(f"bitstring {bits!r} does not match {n_qubits} qubits")
        psi = np.zeros(2**n_qubits, dtype=complex)
        psi[index] = 1.0
        state = cls(n_qubits, psi)
        return state.to_density_matrix() if density else state

    @classmethod
    def from_array(cls, data) -> "QuantumState":
        data = np.asarray(data, dtype=complex)
        n = int(round(np.log2(data.shape[0])))
        if 2**n != data.shape[0]:
            raise StateError(f"dimension {data.shape[0]} is not a power of two")
        return cls(n, data)


@dataclass(frozen=True)
class GateOp:
    """A named 1- or 2-qubit unitary acting on ordered ``targets``."""

    name: str
    matrix: np.ndarray = field(repr=False)
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        targets = tuple(int(t) for t in self.targets)
        k = len(targets)
        if k not in (1, 2):
            raise ValueError(f"gate {self.name!r}: expected 1 or 2 targets, got {k}")
        if len(set(targets)) != k:
            raise ValueError(f"gate {self.name!r}: targets must be distinct, got {targets}")
        if min(targets) < 0:
            raise ValueError(f"gate {self.name!r}: negative target in {targets}")
        if m.shape != (2**k, 2**k):
            raise ValueError(f"gate {self.name!r}: matrix shape {m.shape} does not fit {k} targets")
        err = np.max(np.abs(m.conj().T @ m - np.eye(2**k)))
        if err > ATOL:
            raise ValueError(f"gate {self.name!r} is not unitary (max |U^dag U - I| = {err:.3e})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def on(self, *targets: int) -> "GateOp":
        """Same gate, different target qubits."""
        return GateOp(self.name, self.matrix, targets, self.params)


@dataclass(frozen=True)
class DiagonalHamiltonian:
    """Single-qubit Hamiltonian with E(|0>) = 0 and E(|1>) = gap."""

    qubit: int
    gap: float = 1.0

    def __post_init__(self):
        if not self.gap > 0:
            raise ValueError(f"energy gap must be positive, got {self.gap}")

    def energies(self) -> tuple[float, float]:
        return (0.0, self.gap)

    def matrix(self, n_qubits: int) -> np.ndarray:
        """Diagonal matrix of the Hamiltonian embedded in ``n_qubits``."""
        idx = np.arange(2**n_qubits)
        bit = (idx >> (n_qubits - 1 - self.qubit)) & 1
        return np.diag(self.gap * bit.astype(float))


# --- gate constructors -------------------------------------------------------

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def identity(target: int = 0) -> GateOp:
    return GateOp("id", _I2, (target,))


def x(target: int = 0) -> GateOp:
    return GateOp("x", _X, (target,))


def y(target: int = 0) -> GateOp:
    return GateOp("y", _Y, (target,))


def z(target: int = 0) -> GateOp:
    return GateOp("z", _Z, (target,))


def hadamard(target: int = 0) -> GateOp:
    return GateOp("h", _H, (target,))


def cnot(control: int = 0, target: int = 1) -> GateOp:
    return GateOp("cx", _CX, (control, target))


def rx(angle: float, target: int = 0) -> GateOp:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return GateOp("rx", np.array([[c, -1j * s], [-1j * s, c]]), (target,), (angle,))


def ry(angle: float, target: int = 0) -> GateOp:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return GateOp("ry", np.array([[c, -s], [s, c]], dtype=complex), (target,), (angle,))


def rz(angle: float, target: int = 0) -> GateOp:
    ph = np.exp(-0.5j * angle)
    return GateOp("rz", np.diag([ph, ph.conjugate()]), (target,), (angle,))


def u_xy(t: float, targets: Sequence[int] = (0, 1)) -> GateOp:
    """Partial swap: identity at t = 0, full (i-phased) swap at t = pi."""
    c, s = np.cos(t / 2), np.sin(t / 2)
    m = np.array(
        [[1, 0, 0, 0], [0, c, 1j * s, 0], [0, 1j * s, c, 0], [0, 0, 0, 1]],
        dtype=complex,
    )
    return GateOp("u_xy", m, tuple(targets), (t,))


def u_theta(theta: float, targets: Sequence[int] = (0, 1)) -> GateOp:
    """Energy-conserving Givens rotation on the {|01>, |10>} block."""
    c, s = np.cos(theta), np.sin(theta)
    m = np.array(
        [[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]],
        dtype=complex,
    )
    return GateOp("u_theta", m, tuple(targets), (theta,))


# --- kernels -----------------------------------------------------------------

def _check_qubits(qubits: Iterable[int], n: int) -> tuple[int, ...]:
    qubits = tuple(int(q) for q in qubits)
    for q in qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n} qubits")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"repeated qubit index in {qubits}")
    return qubits


def _apply_tensor(tensor: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    op_t = op.reshape((2,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def embed(gate: GateOp, n_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of ``gate`` acting inside an n-qubit register."""
    _check_qubits(gate.targets, n_qubits)
    dim = 2**n_qubits
    eye = np.eye(dim, dtype=complex).reshape((2,) * n_qubits + (dim,))
    return _apply_tensor(eye, gate.matrix, gate.targets).reshape(dim, dim)


def apply_gate(state: QuantumState, gate: GateOp) -> QuantumState:
    n = state.n_qubits
    targets = _check_qubits(gate.targets, n)
    if state.is_density_matrix:
        rho = state.data.reshape((2,) * (2 * n))
        rho = _apply_tensor(rho, gate.matrix, targets)
        rho = _apply_tensor(rho, gate.matrix.conj(), [n + t for t in targets])
        return QuantumState(n, rho.reshape(2**n, 2**n))
    psi = _apply_tensor(state.data.reshape((2,) * n), gate.matrix, targets)
    return QuantumState(n, psi.reshape(-1))


def apply_circuit(state: QuantumState, gates: Iterable[GateOp]) -> QuantumState:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def partial_trace(state: QuantumState, keep: Iterable[int]) -> QuantumState:
    """Reduced density matrix on ``keep`` (kept in ascending qubit order)."""
    n = state.n_qubits
    keep = sorted(_check_qubits(keep, n))
    if not keep:
        raise ValueError("partial_trace needs at least one qubit to keep")
    rho = state.density_matrix().reshape((2,) * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            cols[q] = rows[q]
    out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, rho)
    d = 2 ** len(keep)
    return QuantumState(len(keep), reduced.reshape(d, d))


def _bits_of(index: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Integer label of the bits ``qubits`` (in the given order) of each index."""
    label = np.zeros_like(index)
    for q in qubits:
        label = (label << 1) | ((index >> (n - 1 - q)) & 1)
    return label


def dephase(state: QuantumState, qubits: Iterable[int]) -> QuantumState:
    """Delete coherences between different energy levels of ``qubits``."""
    n = state.n_qubits
    qubits = _check_qubits(qubits, n)
    rho = state.density_matrix()
    label = _bits_of(np.arange(2**n), qubits, n)
    mask = label[:, None] == label[None, :]
    return QuantumState(n, np.where(mask, rho, 0.0))


def _format_outcome(label: int, k: int) -> str:
    return format(label, f"0{k}b") if k else ""


def measurement_branches(
    state: QuantumState, qubits: Iterable[int]
) -> list[tuple[str, float, QuantumState]]:
    """All outcomes of a projective measurement of ``qubits``.

    Returns ``(outcome, probability, post_state)`` for every outcome with
    non-zero probability; post-states are renormalized and keep the
    representation of the input.
    """
    n = state.n_qubits
    qubits = _check_qubits(qubits, n)
    k = len(qubits)
    label = _bits_of(np.arange(2**n), qubits, n)
    probs = state.probabilities()
    branches = []
    for outcome in range(2**k):
        sel = label == outcome
        p = float(probs[sel].sum())
        if p <= 0.0:
            continue
        if state.is_density_matrix:
            rho = np.where(sel[:, None] & sel[None, :], state.data, 0.0) / p
            # renormalize exactly; projecting rounds the trace at the 1e-16 level
            rho = rho / np.trace(rho).real
            post = QuantumState(n, (rho + rho.conj().T) / 2)
        else:
            psi = np.where(sel, state.data, 0.0)
            post = QuantumState(n, psi / np.linalg.norm(psi))
        branches.append((_format_outcome(outcome, k), p, post))
    return branches


def project(state: QuantumState, qubits: Iterable[int], outcome: str) -> tuple[float, QuantumState]:
    """Deterministic projection onto ``outcome``; returns (probability, post_state)."""
    for label, p, post in measurement_branches(state, qubits):
        if label == outcome:
            return p, post
    raise ValueError(f"outcome {outcome!r} has zero probability")


def measure_projective(
    state: QuantumState, qubits: Iterable[int], rng: np.random.Generator
) -> tuple[str, QuantumState]:
    """Sample one projective measurement of ``qubits`` and collapse the state."""
    branches = measurement_branches(state, qubits)
    p = np.array([b[1] for b in branches])
    i = rng.choice(len(branches), p=p / p.sum())
    return branches[i][0], branches[i][2]


def energy_expectation(state: QuantumState, h: DiagonalHamiltonian) -> float:
    """<H> = gap * P(qubit = 1)."""
    n = state.n_qubits
    _check_qubits([h.qubit], n)
    bit = (np.arange(2**n) >> (n - 1 - h.qubit)) & 1
    return float(h.gap * state.probabilities()[bit == 1].sum())


def ket(bits: str) -> QuantumState:
    return QuantumState.basis(len(bits), bits)
