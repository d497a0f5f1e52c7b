"""Qubit labels and the fixed tensor-order convention of the seven-qubit device."""

from __future__ import annotations

import enum


class Qubit(enum.IntEnum):
    """The seven qubits, with fixed tensor positions (position 0 most significant).

    D1..D4 are the data qubits of the distance-2 surface code, A1..A3 the
    ancilla qubits used to read out the Z(D1)Z(D3), X-type and Z(D2)Z(D4)
    stabilizers respectively.
    """

    D1 = 0
    D2 = 1
    D3 = 2
    D4 = 3
    A1 = 4
    A2 = 5
    A3 = 6

    @classmethod
    def from_label(cls, label: str) -> "Qubit":
        try:
            return cls[label]
        except KeyError:
            raise ValueError(f"unknown qubit label {label!r}") from None


DATA_QUBITS = (Qubit.D1, Qubit.D2, Qubit.D3, Qubit.D4)
ANCILLA_QUBITS = (Qubit.A1, Qubit.A2, Qubit.A3)
ALL_QUBITS = tuple(Qubit)

NUM_QUBITS = 7
DIM = 2**NUM_QUBITS
NUM_DATA = 4
DATA_DIM = 2**NUM_DATA
