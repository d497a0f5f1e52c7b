"""Experiment orchestration: schedule execution with measurement branching,
stabilizer characterization, logical-state preparation, repeated error
detection with post-selection bookkeeping, and the Monte-Carlo sampling
oracle for the deterministic branch probabilities.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import measurement, ops
from .device import DeviceConfig
from .lindblad import IdleGenerator, evolve_idle, make_idle_generator
from .measurement import Branch, Povm, ideal_povm, make_povm, measure_multi
from .qubits import ANCILLA_QUBITS, DATA_QUBITS, DIM, Qubit
from .schedule import (
    Measure,
    PrepSpec,
    Schedule,
    Unitary,
    build_cycle,
    build_parity_circuit,
    build_prep,
    gate_matrix,
    parity_data_qubits,
)


class PostSelectionError(RuntimeError):
    """Raised when the tracked branch weight underflows."""


# --------------------------------------------------------------------------
# Schedule compilation and execution


class GeneratorBank:
    """Caches idle generators keyed by the set of qubits currently being read
    out (relevant only when measurement-induced dephasing is enabled)."""

    def __init__(self, config: DeviceConfig, noise: bool):
        self._config = config
        self._noise = noise
        self._cache: dict[frozenset[Qubit], IdleGenerator] = {}

    def get(self, measured: frozenset[Qubit]) -> IdleGenerator | None:
        if not self._noise:
            return None
        md = self._config.options.meas_dephasing
        key = measured if md is not None else frozenset()
        if key not in self._cache:
            extra = None
            if md is not None and key:
                extra = {
                    qi: sum(md[qi][qj] for qj in key)
                    for qi in Qubit
                    if sum(md[qi][qj] for qj in key) > 0.0
                }
            self._cache[key] = make_idle_generator(self._config, extra_dephasing=extra)
        return self._cache[key]


@dataclass(frozen=True)
class _Evolve:
    duration_ns: float
    gen: IdleGenerator | None


@dataclass(frozen=True)
class _Apply:
    unitary: np.ndarray


@dataclass(frozen=True)
class _Readout:
    qubits: tuple[Qubit, ...]
    povms: tuple[Povm, ...]


_Step = _Evolve | _Apply | _Readout


@dataclass(frozen=True)
class CompiledSchedule:
    """Schedule lowered to an executable step list.

    ``prefix`` runs through the last measurement application; ``tail`` is the
    remaining evolution to the end of the schedule.  ``measured`` lists the
    measured qubits in application order.
    """

    prefix: tuple[_Step, ...]
    tail: tuple[_Step, ...]
    measured: tuple[Qubit, ...]
    total_ns: float
    dt_ns: float


def _povm_for(config: DeviceConfig, qubit: Qubit, noise: bool) -> Povm:
    if not noise:
        return ideal_povm()
    params = config.qubits[qubit]
    return make_povm(params.p00, params.p11)


def compile_schedule(schedule: Schedule, config: DeviceConfig, noise: bool) -> CompiledSchedule:
    """Lower a declarative schedule to evolve/apply/readout steps in time order."""
    bank = GeneratorBank(config, noise)
    unitaries = [seg for seg in schedule.segments if isinstance(seg, Unitary)]
    measures = [seg for seg in schedule.segments if isinstance(seg, Measure)]

    # Event points: unitaries fire at start_ns, measurement operators at the
    # window end; window starts split evolution intervals so that optional
    # readout-dephasing terms switch on exactly with the window.
    events: list[tuple[float, int, object | None]] = []
    for seg in unitaries:
        events.append((seg.start_ns, 1, seg))
    for seg in measures:
        events.append((seg.start_ns, 0, None))
        events.append((seg.start_ns + seg.duration_ns, 2, seg))
    events.sort(key=lambda item: (item[0], item[1]))

    def active_windows(t0: float, t1: float) -> frozenset[Qubit]:
        mid = 0.5 * (t0 + t1)
        active: set[Qubit] = set()
        for seg in measures:
            if seg.start_ns <= mid < seg.start_ns + seg.duration_ns:
                active.update(seg.qubits)
        return frozenset(active)

    steps: list[_Step] = []
    measured: list[Qubit] = []
    cursor = 0.0
    for time, _, payload in events:
        if time > cursor + 1e-9:
            steps.append(_Evolve(time - cursor, bank.get(active_windows(cursor, time))))
            cursor = time
        if isinstance(payload, Unitary):
            full = np.eye(DIM, dtype=complex)
            for gate in payload.gates:
                full = ops.embed(gate_matrix(gate), gate.targets) @ full
            steps.append(_Apply(full))
        elif isinstance(payload, Measure):
            povms = tuple(_povm_for(config, q, noise) for q in payload.qubits)
            steps.append(_Readout(payload.qubits, povms))
            measured.extend(payload.qubits)
    if schedule.total_ns > cursor + 1e-9:
        steps.append(_Evolve(schedule.total_ns - cursor, bank.get(active_windows(cursor, schedule.total_ns))))

    last_readout = max(i for i, s in enumerate(steps) if isinstance(s, _Readout)) if measured else len(steps) - 1
    return CompiledSchedule(
        prefix=tuple(steps[: last_readout + 1]),
        tail=tuple(steps[last_readout + 1 :]),
        measured=tuple(measured),
        total_ns=schedule.total_ns,
        dt_ns=config.options.integrator_dt_ns,
    )


def _run_steps(branches: list[Branch], steps: tuple[_Step, ...], dt_ns: float) -> list[Branch]:
    for step in steps:
        if isinstance(step, _Evolve):
            if step.gen is not None:
                branches = [
                    Branch(b.bits, b.prob, evolve_idle(b.state, step.gen, step.duration_ns, dt_ns))
                    for b in branches
                ]
        elif isinstance(step, _Apply):
            u = step.unitary
            branches = [Branch(b.bits, b.prob, u @ b.state @ u.conj().T) for b in branches]
        else:
            new_branches = []
            for parent in branches:
                for child in measure_multi(parent.state, step.qubits, step.povms):
                    new_branches.append(
                        Branch(parent.bits + child.bits, parent.prob * child.prob, child.state)
                    )
            branches = new_branches
    return branches


def run_schedule_branches(rho: np.ndarray, compiled: CompiledSchedule) -> list[Branch]:
    """Run the prefix of a compiled schedule, returning all outcome branches
    with bits in measurement order (unnormalized cumulative probabilities)."""
    return _run_steps([Branch((), 1.0, rho)], compiled.prefix, compiled.dt_ns)


def finish_schedule(rho: np.ndarray, compiled: CompiledSchedule) -> np.ndarray:
    """Evolve one branch state through the tail of the schedule."""
    return _run_steps([Branch((), 1.0, rho)], compiled.tail, compiled.dt_ns)[0].state


def _bits_by_label(compiled: CompiledSchedule, bits: tuple[int, ...]) -> tuple[int, ...]:
    """Reorder measurement bits from application order to (A1, A2, A3)."""
    by_qubit = dict(zip(compiled.measured, bits))
    return tuple(by_qubit[q] for q in ANCILLA_QUBITS)


_ANC_GROUND = np.zeros((8, 8), dtype=complex)
_ANC_GROUND[0, 0] = 1.0


def reset_ancillas(rho: np.ndarray) -> np.ndarray:
    """Trace out the ancillas and re-tensor them in |000>."""
    return np.kron(ops.partial_trace_ancillas(rho), _ANC_GROUND)


def initial_state(prep: Unitary) -> np.ndarray:
    """|0>^7 with the preparation burst applied."""
    ket = ops.ket_from_string("0000000")
    rho = np.outer(ket, ket.conj())
    full = np.eye(DIM, dtype=complex)
    for gate in prep.gates:
        full = ops.embed(gate_matrix(gate), gate.targets) @ full
    return full @ rho @ full.conj().T


# --------------------------------------------------------------------------
# Logical-subspace projection


def project_logical(rho_data: np.ndarray) -> tuple[np.ndarray, float]:
    """Project a 16x16 data-qubit state onto the logical qubit.

    Returns (rho_l, p_l) with rho_l[:, :] = <j| rho |i> / p_l over the logical
    basis and p_l the weight inside the code space.
    """
    if rho_data.shape != (16, 16):
        raise ValueError("project_logical expects a 16x16 data-qubit state")
    ket0, ket1 = ops.logical_basis()
    basis = np.column_stack([ket0, ket1])
    block = basis.conj().T @ rho_data @ basis
    p_l = float(np.trace(block).real)
    if p_l < 1e-12:
        raise PostSelectionError(f"logical-subspace weight {p_l:g} underflows")
    return block / p_l, p_l


# --------------------------------------------------------------------------
# Logical state preparation


@dataclass(frozen=True)
class PrepResult:
    """Outcome of one probabilistic encoding run (conditioned on the all-zero
    syndrome)."""

    rho_full: np.ndarray
    success_prob: float
    p_l: float
    f_phys: float
    rho_l: np.ndarray
    f_l: float


def _resolve_target(target: PrepSpec | str) -> PrepSpec:
    return PrepSpec.named(target) if isinstance(target, str) else target


def run_prep(target: PrepSpec | str, config: DeviceConfig, noise: bool = True) -> PrepResult:
    """Prepare a logical state: product-state pulse, one stabilizer cycle,
    condition on all three ancillas reading 0."""
    spec = _resolve_target(target)
    compiled = compile_schedule(build_cycle(config), config, noise)
    rho = initial_state(build_prep(spec))
    branches = run_schedule_branches(rho, compiled)
    clean = next((b for b in branches if all(bit == 0 for bit in b.bits)), None)
    if clean is None or clean.prob < 1e-12:
        raise PostSelectionError("all-zero syndrome branch has vanishing probability")
    rho_full = finish_schedule(clean.state, compiled)

    rho_data = ops.partial_trace_ancillas(rho_full)
    rho_l, p_l = project_logical(rho_data)
    psi_l = spec.logical_amplitudes()
    ket0, ket1 = ops.logical_basis()
    psi_data = np.column_stack([ket0, ket1]) @ psi_l
    f_phys = ops.fidelity_pure(rho_data, psi_data)
    f_l = float(np.real(np.conj(psi_l) @ rho_l @ psi_l))
    return PrepResult(
        rho_full=rho_full,
        success_prob=clean.prob,
        p_l=p_l,
        f_phys=f_phys,
        rho_l=rho_l,
        f_l=f_l,
    )


# --------------------------------------------------------------------------
# Repeated error detection


@dataclass(frozen=True)
class DetectionPoint:
    """Per-cycle conditioned logical observable and syndrome statistics."""

    n: int
    t_us: float
    observable: float
    p_s: float
    k_dist: tuple[float, float, float, float]


_Z_TARGETS = {"zeroL": 1.0, "oneL": -1.0}
_X_TARGETS = {"plusL": 1.0, "minusL": -1.0}


def conditioned_observable(rho_data: np.ndarray, basis: str) -> float:
    """Final-measurement conditioning and logical expectation on data qubits.

    Basis Z: project onto Z(D1)Z(D3) = Z(D2)Z(D4) = +1 and report <Z(D1)Z(D2)>.
    Basis X: project onto X(D1)X(D2)X(D3)X(D4) = +1 and report <X(D1)X(D3)>.
    """
    stabs = ops.stabilizer_set_data()
    logicals = ops.logical_operators_data()
    eye = np.eye(16, dtype=complex)
    if basis == "Z":
        proj = (eye + stabs["s_z1"]) / 2.0 @ (eye + stabs["s_z2"]) / 2.0
        observable = logicals["z_a"]
    elif basis == "X":
        proj = (eye + stabs["s_x"]) / 2.0
        observable = logicals["x_a"]
    else:
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    conditioned = proj @ rho_data @ proj.conj().T
    weight = float(np.trace(conditioned).real)
    if weight < 1e-12:
        raise PostSelectionError("final-conditioning weight underflows")
    return ops.expectation(conditioned / weight, observable)


def _cycle_distribution(
    rho: np.ndarray, compiled: CompiledSchedule
) -> tuple[dict[tuple[int, int, int], float], np.ndarray]:
    """One cycle's 8-outcome syndrome distribution (keyed by (A1, A2, A3) bits)
    and the normalized all-zero branch state at the last readout point."""
    branches = run_schedule_branches(rho, compiled)
    probs: dict[tuple[int, int, int], float] = {}
    clean_state: np.ndarray | None = None
    for branch in branches:
        key = _bits_by_label(compiled, branch.bits)
        probs[key] = probs.get(key, 0.0) + branch.prob
        if all(bit == 0 for bit in branch.bits):
            clean_state = branch.state
    total = sum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise PostSelectionError(f"cycle outcome probabilities sum to {total!r}")
    if clean_state is None or probs.get((0, 0, 0), 0.0) < 1e-12:
        raise PostSelectionError("clean-branch weight underflows")
    return probs, clean_state


def run_detection(
    target: PrepSpec | str,
    n_max: int,
    config: DeviceConfig,
    basis: str = "Z",
    noise: bool = True,
) -> list[DetectionPoint]:
    """Track the post-selected (all syndromes zero) branch through n_max cycles.

    Per cycle: the joint 8-outcome ancilla distribution given a clean history
    (binned by weight into ``k_dist``), the cumulative survival probability
    ``p_s``, and the conditioned logical observable at the cycle end.
    """
    spec = _resolve_target(target)
    allowed = _Z_TARGETS if basis == "Z" else _X_TARGETS if basis == "X" else None
    if allowed is None:
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    if spec.name not in allowed:
        raise ValueError(f"basis {basis} detection expects targets {sorted(allowed)}, got {spec.name!r}")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")

    compiled = compile_schedule(build_cycle(config), config, noise)
    rho = initial_state(build_prep(spec))
    timing = config.timing
    points: list[DetectionPoint] = []
    p_s = 1.0
    for n in range(1, n_max + 1):
        probs, clean = _cycle_distribution(rho, compiled)
        k_dist = [0.0, 0.0, 0.0, 0.0]
        for bits, p in probs.items():
            k_dist[sum(bits)] += p
        p_s *= probs[(0, 0, 0)]
        rho_end = finish_schedule(clean, compiled)
        observable = conditioned_observable(ops.partial_trace_ancillas(rho_end), basis)
        points.append(
            DetectionPoint(
                n=n,
                t_us=(timing.cycle_ns * n + timing.prep_offset_ns) / 1000.0,
                observable=observable,
                p_s=p_s,
                k_dist=tuple(k_dist),  # type: ignore[arg-type]
            )
        )
        rho = reset_ancillas(rho_end)
    return points


# --------------------------------------------------------------------------
# Stabilizer characterization


@dataclass(frozen=True)
class StabilizerCharacterization:
    """Outcome table of one single-stabilizer readout circuit."""

    ancilla: Qubit
    data_qubits: tuple[Qubit, ...]
    outcomes: dict[str, tuple[float, float]]  # basis-state bits -> (p0, p1)
    success: float  # mean probability of the ideal parity assignment


def run_parity_characterization(config: DeviceConfig, noise: bool = True) -> dict[str, StabilizerCharacterization]:
    """Run the three single-stabilizer circuits over every computational basis
    state of their data qubits; unused qubits stay in the ground state."""
    results: dict[str, StabilizerCharacterization] = {}
    for ancilla in ANCILLA_QUBITS:
        circuit = build_parity_circuit(config, ancilla)
        compiled = compile_schedule(circuit, config, noise)
        partners = parity_data_qubits(ancilla)
        outcomes: dict[str, tuple[float, float]] = {}
        successes = []
        for bits in product((0, 1), repeat=len(partners)):
            ket = ops.ket_from_string("0000000")
            rho = np.outer(ket, ket.conj())
            for qubit, bit in zip(partners, bits):
                if bit:
                    x = ops.embed(ops.PAULI_X, (qubit,))
                    rho = x @ rho @ x.conj().T
            branches = run_schedule_branches(rho, compiled)
            p = {0: 0.0, 1: 0.0}
            for branch in branches:
                p[branch.bits[0]] += branch.prob
            expected = sum(bits) % 2
            outcomes["".join(str(b) for b in bits)] = (p[0], p[1])
            successes.append(p[expected])
        results[ancilla.name] = StabilizerCharacterization(
            ancilla=ancilla,
            data_qubits=partners,
            outcomes=outcomes,
            success=float(np.mean(successes)),
        )
    return results


# --------------------------------------------------------------------------
# Monte-Carlo sampling oracle


def sample_trajectories(
    target: PrepSpec | str,
    n_cycles: int,
    shots: int,
    seed: int,
    config: DeviceConfig,
    noise: bool = True,
) -> dict[str, int]:
    """Sample full syndrome histories by descending the exact branch tree.

    At each node the shots are split multinomially over the eight cycle
    outcomes using a generator derived from the seed and the node's path, so
    counts are independent of evaluation order; subtrees may be evaluated
    concurrently (capped by the SURFACE7_MAX_WORKERS environment variable).
    Histories are keyed by the per-cycle (A1, A2, A3) bits, concatenated.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    if n_cycles < 1:
        raise ValueError("n_cycles must be at least 1")
    spec = _resolve_target(target)
    compiled = compile_schedule(build_cycle(config), config, noise)
    rho = initial_state(build_prep(spec))
    try:
        max_workers = max(1, int(os.environ.get("SURFACE7_MAX_WORKERS", "1")))
    except ValueError:
        max_workers = 1

    counts: dict[str, int] = {}

    def descend(rho_in: np.ndarray, path: tuple[int, ...], node_shots: int, pool: ThreadPoolExecutor | None) -> dict[str, int]:
        branches = run_schedule_branches(rho_in, compiled)
        keyed: dict[tuple[int, int, int], Branch] = {}
        for branch in branches:
            key = _bits_by_label(compiled, branch.bits)
            keyed[key] = branch
        outcomes = sorted(keyed)
        pvals = np.array([keyed[k].prob for k in outcomes])
        pvals = pvals / pvals.sum()
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=path)))
        split = rng.multinomial(node_shots, pvals)
        local: dict[str, int] = {}
        tasks = []
        for idx, (key, n_sub) in enumerate(zip(outcomes, split)):
            if n_sub == 0:
                continue
            label = "".join(str(b) for b in key)
            if len(path) + 1 == n_cycles:
                local[label] = local.get(label, 0) + int(n_sub)
                continue
            child = finish_schedule(keyed[key].state, compiled)
            child = reset_ancillas(child)
            if pool is not None:
                tasks.append((label, pool.submit(descend, child, path + (idx,), int(n_sub), None)))
            else:
                sub = descend(child, path + (idx,), int(n_sub), None)
                for hist, c in sub.items():
                    local[label + hist] = local.get(label + hist, 0) + c
        for label, future in tasks:
            for hist, c in future.result().items():
                local[label + hist] = local.get(label + hist, 0) + c
        return local

    if max_workers > 1 and n_cycles > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            counts = descend(rho, (), shots, pool)
    else:
        counts = descend(rho, (), shots, None)
    return counts
