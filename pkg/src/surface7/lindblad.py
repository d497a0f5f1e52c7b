"""Master-equation engine: collapse operators, idle generator, RK4 evolution.

The density matrix evolves under

    drho/dt = -i [H, rho] + sum_i ( c_i rho c_i^+ - 1/2 {c_i^+ c_i, rho} )

with H the diagonal residual-ZZ Hamiltonian and the c_i per-qubit relaxation
and pure-dephasing collapse operators.  Rates are in 1/us, H in rad/us, and
all durations at the API boundary in ns.

For speed the generator is compiled once into a sparse superoperator acting
on vec(rho); the classic fixed-step RK4 update then costs four sparse
mat-vecs per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import ops
from .device import DeviceConfig, dephasing_prefactor, relaxation_rate
from .qubits import ALL_QUBITS, DIM, NUM_QUBITS, Qubit

NS_PER_US = 1000.0


class NumericError(RuntimeError):
    """Raised when the integrator detects an unusable numerical state."""


@dataclass(frozen=True)
class CollapseOp:
    """An embedded collapse operator with its rate folded into the matrix."""

    label: str
    op: np.ndarray


def _zz_diagonal(config: DeviceConfig) -> np.ndarray:
    """Diagonal of the residual-ZZ Hamiltonian in rad/us (length 128)."""
    diag = np.zeros(DIM)
    alpha = config.zz.alpha
    for i in range(NUM_QUBITS):
        for j in range(i + 1, NUM_QUBITS):
            a = alpha[i][j]
            if a == 0.0:
                continue
            shift = 2.0 * np.pi * a
            bit_i = 1 << (NUM_QUBITS - 1 - i)
            bit_j = 1 << (NUM_QUBITS - 1 - j)
            idx = np.arange(DIM)
            mask = ((idx & bit_i) != 0) & ((idx & bit_j) != 0)
            diag[mask] += shift
    return diag


class IdleGenerator:
    """Compiled Lindblad generator for idle evolution.

    ``h_diag`` is the (real) diagonal of H in rad/us, ``collapse`` the list of
    embedded collapse operators, and ``liouvillian`` the sparse superoperator
    acting on the row-major vectorization of rho.
    """

    def __init__(self, h_diag: np.ndarray, collapse: list[CollapseOp]):
        self.h_diag = h_diag
        self.collapse = collapse
        self.liouvillian = self._build_liouvillian()

    @property
    def h_zz(self) -> np.ndarray:
        return np.diag(self.h_diag).astype(complex)

    def _build_liouvillian(self) -> sp.csr_matrix:
        # Row-major vec: vec(A rho B) = (A kron B^T) vec(rho).
        idx = np.arange(DIM)
        # Hamiltonian part: -i (h[r] - h[c]) on diagonal of the superoperator.
        diag = (-1j * (self.h_diag[:, None] - self.h_diag[None, :])).ravel().astype(complex)
        off_terms = []
        for c in self.collapse:
            cmat = sp.csr_matrix(c.op)
            off_terms.append(sp.kron(cmat, cmat.conj(), format="csr"))
            cdc_full = c.op.conj().T @ c.op
            # c^+ c is diagonal for the embedded sigma_- / sigma_z operators
            # used here; the anticommutator folds into the superop diagonal.
            if np.max(np.abs(cdc_full - np.diag(np.diag(cdc_full)))) > 1e-14:
                raise ValueError(f"collapse operator {c.label} has non-diagonal c^+ c")
            cdc = np.real(np.diag(cdc_full))
            diag += (-0.5 * (cdc[:, None] + cdc[None, :])).ravel()
        liouv = sp.diags(diag, format="csr", dtype=complex)
        for term in off_terms:
            liouv = liouv + term
        # The sigma_z dissipator contributions inside off_terms are diagonal;
        # merging everything into one CSR keeps the mat-vec cheap.
        return liouv.tocsr()


def make_idle_generator(config: DeviceConfig, extra_dephasing: dict[Qubit, float] | None = None) -> IdleGenerator:
    """Build the idle generator for a config.

    One relaxation operator sqrt(1/T1) sigma_- per qubit and one dephasing
    operator sqrt((1/T2* - 1/(2 T1))/2) sigma_z per qubit with non-zero rate.
    ``extra_dephasing`` adds measurement-induced dephasing rates (1/us,
    coherence-decay convention) on top of the intrinsic ones.
    """
    collapse: list[CollapseOp] = []
    for q in ALL_QUBITS:
        params = config.qubits[q]
        gamma1 = relaxation_rate(params)
        if gamma1 > 0.0:
            collapse.append(
                CollapseOp(label=f"relax_{q.name}", op=np.sqrt(gamma1) * ops.embed(ops.SIGMA_MINUS, (q,)))
            )
    for q in ALL_QUBITS:
        params = config.qubits[q]
        g = dephasing_prefactor(params)
        if extra_dephasing:
            # Gamma is a coherence-decay rate; the sigma_z prefactor is Gamma/2.
            g += 0.5 * extra_dephasing.get(q, 0.0)
        if g > 0.0:
            collapse.append(CollapseOp(label=f"dephase_{q.name}", op=np.sqrt(g) * ops.embed(ops.PAULI_Z, (q,))))
    return IdleGenerator(h_diag=_zz_diagonal(config), collapse=collapse)


def _check_state(rho: np.ndarray, context: str) -> np.ndarray:
    if not np.all(np.isfinite(rho)):
        raise NumericError(f"{context}: state contains NaN/Inf entries")
    drift = abs(np.trace(rho).real - 1.0)
    if drift > 1e-8:
        raise NumericError(f"{context}: trace drift {drift:g} exceeds 1e-8 (integrator step too coarse)")
    if drift > 1e-12:
        rho = rho / np.trace(rho).real
    return rho


def evolve_idle(rho: np.ndarray, gen: IdleGenerator, duration_ns: float, dt_ns: float = 1.0) -> np.ndarray:
    """Advance rho through an idle of the given duration with fixed-step RK4.

    The final step is shortened to land exactly on the duration.  The trace is
    renormalized when it drifts into (1e-12, 1e-8]; beyond that the step size
    is considered too coarse and a NumericError is raised.
    """
    if duration_ns < 0:
        raise ValueError("duration_ns must be non-negative")
    if dt_ns <= 0:
        raise ValueError("dt_ns must be positive")
    if duration_ns == 0:
        return rho
    liouv = gen.liouvillian
    y = rho.astype(complex).ravel()
    remaining_us = duration_ns / NS_PER_US
    step_us = dt_ns / NS_PER_US
    n_full, partial = divmod(remaining_us, step_us)
    steps = [step_us] * int(round(n_full))
    if partial > 1e-12:
        steps.append(partial)
    for h in steps:
        k1 = liouv @ y
        k2 = liouv @ (y + 0.5 * h * k1)
        k3 = liouv @ (y + 0.5 * h * k2)
        k4 = liouv @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = y.reshape(DIM, DIM)
    out = 0.5 * (out + out.conj().T)
    return _check_state(out, "evolve_idle")


def apply_unitary(rho: np.ndarray, unitary: np.ndarray) -> np.ndarray:
    """rho -> U rho U^+ for a (checked) unitary on the full space."""
    if not ops.is_unitary(unitary, tol=1e-12):
        raise ValueError("apply_unitary requires a unitary matrix (U^+ U = I to 1e-12)")
    trace_before = np.trace(rho).real
    out = unitary @ rho @ unitary.conj().T
    if abs(np.trace(out).real - trace_before) > 1e-12:
        raise NumericError("unitary application drifted the trace beyond 1e-12")
    return out
