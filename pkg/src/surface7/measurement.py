"""Ancilla readout as minimal-disturbance measurement operators.

For assignment probabilities P(i|j) of reading i given prepared j, the
single-qubit operators are

    M0 = sqrt(P(0|0)) |0><0| + sqrt(P(0|1)) |1><1|
    M1 = sqrt(P(1|0)) |0><0| + sqrt(P(1|1)) |1><1|

with P(0|1) = 1 - P(1|1) and P(1|0) = 1 - P(0|0), so completeness
M0^+ M0 + M1^+ M1 = I holds exactly.  Outcome i occurs with probability
Tr(M_i rho M_i^+) and maps the state to M_i rho M_i^+ / p_i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ops
from .qubits import NUM_QUBITS, Qubit

PRUNE_THRESHOLD = 1e-14


@dataclass(frozen=True)
class Povm:
    """Single-qubit measurement operator pair (embedded on demand)."""

    m0: np.ndarray
    m1: np.ndarray

    def __post_init__(self) -> None:
        completeness = self.m0.conj().T @ self.m0 + self.m1.conj().T @ self.m1
        if np.max(np.abs(completeness - np.eye(2))) > 1e-12:
            raise ValueError("measurement operators violate completeness (M0^+M0 + M1^+M1 != I)")


def make_povm(p00: float, p11: float) -> Povm:
    """Minimal-disturbance operator pair from the two assignment probabilities."""
    if not (0.0 <= p00 <= 1.0 and 0.0 <= p11 <= 1.0):
        raise ValueError("assignment probabilities must lie in [0, 1]")
    m0 = np.diag([np.sqrt(p00), np.sqrt(1.0 - p11)]).astype(complex)
    m1 = np.diag([np.sqrt(1.0 - p00), np.sqrt(p11)]).astype(complex)
    return Povm(m0=m0, m1=m1)


def ideal_povm() -> Povm:
    return make_povm(1.0, 1.0)


@dataclass
class Branch:
    """One measurement outcome: its bits, probability weight and normalized state."""

    bits: tuple[int, ...]
    prob: float
    state: np.ndarray


def measure_one(rho: np.ndarray, qubit: Qubit, povm: Povm, num_qubits: int = NUM_QUBITS) -> list[Branch]:
    """Measure one qubit; returns up to two normalized outcome branches.

    Zero-probability branches (p < 1e-14) are dropped; p0 + p1 must equal 1
    to within 1e-9.
    """
    branches: list[Branch] = []
    total = 0.0
    for bit, m in ((0, povm.m0), (1, povm.m1)):
        big = ops.embed(m, (qubit,), num_qubits=num_qubits)
        unnorm = big @ rho @ big.conj().T
        p = float(np.trace(unnorm).real)
        total += p
        if p >= PRUNE_THRESHOLD:
            branches.append(Branch(bits=(bit,), prob=p, state=unnorm / p))
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"measurement branch probabilities sum to {total!r}, not 1")
    return branches


def measure_multi(
    rho: np.ndarray,
    qubits: Sequence[Qubit],
    povms: Sequence[Povm],
    num_qubits: int = NUM_QUBITS,
) -> list[Branch]:
    """Measure several distinct qubits simultaneously.

    Implemented as sequential single-qubit measurements; operators on distinct
    qubits commute, so the result is order-independent.  Branches are keyed by
    the outcome bits in the order the qubits were given.
    """
    if len(set(qubits)) != len(qubits):
        raise ValueError("qubits must be distinct")
    if len(povms) != len(qubits):
        raise ValueError("need one measurement-operator pair per qubit")
    branches = [Branch(bits=(), prob=1.0, state=rho)]
    for qubit, povm in zip(qubits, povms):
        new_branches: list[Branch] = []
        for parent in branches:
            for child in measure_one(parent.state, qubit, povm, num_qubits=num_qubits):
                new_branches.append(
                    Branch(bits=parent.bits + child.bits, prob=parent.prob * child.prob, state=child.state)
                )
        branches = new_branches
    return branches
