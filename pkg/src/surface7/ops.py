"""Operator algebra on the seven-qubit Hilbert space.

Dense numpy matrices throughout; 7 qubits (dim 128) is small enough that
nothing here needs to be clever.  All embeddings follow the fixed tensor
order of :class:`~surface7.qubits.Qubit` (position 0 most significant in the
computational-basis index).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .qubits import DATA_QUBITS, DIM, NUM_QUBITS, Qubit

ID2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
PROJ0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ1 = np.array([[0, 0], [0, 1]], dtype=complex)
# Controlled-Z on two qubits (symmetric in control/target).
CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


def ry(theta: float) -> np.ndarray:
    """Rotation about Y: exp(-i*theta*Y/2)."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    """Rotation about Z: exp(-i*theta*Z/2)."""
    return np.diag([np.exp(-1j * theta / 2.0), np.exp(1j * theta / 2.0)])


_FIXED_GATES = {
    "i": ID2,
    "x": PAULI_X,
    "y": PAULI_Y,
    "z": PAULI_Z,
    "sigma_minus": SIGMA_MINUS,
    "proj0": PROJ0,
    "proj1": PROJ1,
}


def single_qubit_gate(kind: str, angle: float | None = None) -> np.ndarray:
    """Return the standard 2x2 matrix for a named single-qubit operation."""
    kind = kind.lower()
    if kind in _FIXED_GATES:
        return _FIXED_GATES[kind].copy()
    if kind == "ry" or kind == "rz":
        if angle is None or not np.isfinite(angle):
            raise ValueError(f"gate {kind!r} needs a finite angle")
        return ry(angle) if kind == "ry" else rz(angle)
    raise ValueError(f"unknown single-qubit gate kind {kind!r}")


def embed(op: np.ndarray, targets: Sequence[int | Qubit], num_qubits: int = NUM_QUBITS) -> np.ndarray:
    """Embed ``op`` so it acts on ``targets`` (in order) and as identity elsewhere.

    ``op`` must be a 2^k x 2^k matrix with k == len(targets); targets are
    tensor positions (or Qubit labels) and must be distinct.
    """
    positions = [int(t) for t in targets]
    k = len(positions)
    if len(set(positions)) != k:
        raise ValueError(f"duplicate targets in {positions}")
    if any(p < 0 or p >= num_qubits for p in positions):
        raise ValueError(f"target position out of range in {positions}")
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} targets")
    rest = [p for p in range(num_qubits) if p not in positions]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    # Axes of `full` currently correspond to qubits in (targets + rest) order;
    # permute them back to positional order.
    perm = positions + rest
    inv = np.argsort(perm)
    tensor = full.reshape((2,) * (2 * num_qubits))
    tensor = tensor.transpose(list(inv) + [num_qubits + i for i in inv])
    return np.ascontiguousarray(tensor.reshape(2**num_qubits, 2**num_qubits))


def kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    """Tensor product of a sequence of matrices, left factor most significant."""
    out = None
    for op in ops:
        out = op.copy() if out is None else np.kron(out, op)
    if out is None:
        raise ValueError("empty operator list")
    return out


def basis_ket(bits: Sequence[int], num_qubits: int) -> np.ndarray:
    """Computational-basis state vector for the given bit sequence."""
    if len(bits) != num_qubits:
        raise ValueError("bit count does not match qubit count")
    index = 0
    for b in bits:
        index = (index << 1) | int(b)
    ket = np.zeros(2**num_qubits, dtype=complex)
    ket[index] = 1.0
    return ket


def ket_from_string(bitstring: str) -> np.ndarray:
    """State vector from a bitstring such as '0101' (leftmost bit most significant)."""
    return basis_ket([int(c) for c in bitstring], len(bitstring))


def stabilizer_set() -> dict[str, np.ndarray]:
    """The three stabilizers of the code on the full seven-qubit space.

    s_x = X(D1)X(D2)X(D3)X(D4), s_z1 = Z(D1)Z(D3), s_z2 = Z(D2)Z(D4),
    identity on the ancilla qubits.
    """
    return {
        "s_x": embed(kron_all([PAULI_X] * 4), DATA_QUBITS),
        "s_z1": embed(np.kron(PAULI_Z, PAULI_Z), (Qubit.D1, Qubit.D3)),
        "s_z2": embed(np.kron(PAULI_Z, PAULI_Z), (Qubit.D2, Qubit.D4)),
    }


def stabilizer_set_data() -> dict[str, np.ndarray]:
    """The three stabilizers restricted to the four data qubits (16x16)."""
    return {
        "s_x": kron_all([PAULI_X] * 4),
        "s_z1": embed(np.kron(PAULI_Z, PAULI_Z), (0, 2), num_qubits=4),
        "s_z2": embed(np.kron(PAULI_Z, PAULI_Z), (1, 3), num_qubits=4),
    }


def logical_operators() -> dict[str, np.ndarray]:
    """Both variants of the logical Pauli operators on the seven-qubit space.

    z_a = Z(D1)Z(D2), z_b = Z(D3)Z(D4); x_a = X(D1)X(D3), x_b = X(D2)X(D4).
    The two variants of each act identically on the code space.
    """
    zz = np.kron(PAULI_Z, PAULI_Z)
    xx = np.kron(PAULI_X, PAULI_X)
    return {
        "z_a": embed(zz, (Qubit.D1, Qubit.D2)),
        "z_b": embed(zz, (Qubit.D3, Qubit.D4)),
        "x_a": embed(xx, (Qubit.D1, Qubit.D3)),
        "x_b": embed(xx, (Qubit.D2, Qubit.D4)),
    }


def logical_operators_data() -> dict[str, np.ndarray]:
    """Logical operator variants restricted to the four data qubits (16x16)."""
    zz = np.kron(PAULI_Z, PAULI_Z)
    xx = np.kron(PAULI_X, PAULI_X)
    return {
        "z_a": embed(zz, (0, 1), num_qubits=4),
        "z_b": embed(zz, (2, 3), num_qubits=4),
        "x_a": embed(xx, (0, 2), num_qubits=4),
        "x_b": embed(xx, (1, 3), num_qubits=4),
    }


def logical_basis() -> tuple[np.ndarray, np.ndarray]:
    """The logical basis vectors on the data qubits.

    |0_L> = (|0000> + |1111>)/sqrt(2), |1_L> = (|0101> + |1010>)/sqrt(2).
    """
    ket0 = (ket_from_string("0000") + ket_from_string("1111")) / np.sqrt(2.0)
    ket1 = (ket_from_string("0101") + ket_from_string("1010")) / np.sqrt(2.0)
    return ket0, ket1


def code_projector() -> np.ndarray:
    """Projector onto the code space of the data qubits: prod_s (I + S_s)/2."""
    proj = np.eye(16, dtype=complex)
    for stab in stabilizer_set_data().values():
        proj = proj @ (np.eye(16, dtype=complex) + stab) / 2.0
    return proj


def expectation(rho: np.ndarray, op: np.ndarray) -> float:
    """Tr(rho * op) for Hermitian op; the (tiny) imaginary part is checked and dropped."""
    if not is_hermitian(op, tol=1e-10):
        raise ValueError("expectation requires a Hermitian operator")
    value = np.trace(rho @ op)
    if abs(value.imag) > 1e-9:
        raise ValueError(f"expectation has non-negligible imaginary part {value.imag:g}")
    return float(value.real)


def fidelity_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    """<psi| rho |psi> for a normalized pure target state."""
    return float(np.real(np.conj(psi) @ rho @ psi))


def is_hermitian(mat: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(mat - mat.conj().T)) <= tol)


def is_unitary(mat: np.ndarray, tol: float = 1e-12) -> bool:
    dim = mat.shape[0]
    return bool(np.max(np.abs(mat.conj().T @ mat - np.eye(dim))) <= tol)


def assert_density_matrix(rho: np.ndarray, *, check_positivity: bool = True) -> None:
    """Validate Hermiticity, unit trace and (optionally) positivity of a state."""
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > 1e-10:
        raise AssertionError(f"density matrix not Hermitian: max |rho - rho^+| = {herm:g}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-8:
        raise AssertionError(f"density matrix trace {tr!r} deviates from 1")
    if check_positivity:
        min_eig = float(np.linalg.eigvalsh(rho)[0])
        if min_eig < -1e-8:
            raise AssertionError(f"density matrix has negative eigenvalue {min_eig:g}")


def partial_trace_ancillas(rho: np.ndarray) -> np.ndarray:
    """Trace out the three ancilla qubits of a 128x128 state, leaving 16x16."""
    if rho.shape != (DIM, DIM):
        raise ValueError(f"expected a {DIM}x{DIM} state, got {rho.shape}")
    tensor = rho.reshape(16, 8, 16, 8)
    return np.einsum("iaja->ij", tensor)
