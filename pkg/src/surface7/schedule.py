"""Compilation of the stabilizer-measurement cycle into timed segments.

A schedule is an ordered list of three segment kinds:

* ``Unitary`` -- an instantaneous burst of gates.  Physical pulse durations
  are accounted by the idle that precedes each burst (the unitary fires at
  the end of its pulse window).
* ``Idle`` -- a stretch of pure decoherence/ZZ evolution on all qubits.  The
  idles exactly tile the cycle from 0 to ``total_ns``.
* ``Measure`` -- a readout window; qubits keep decohering during the window
  (covered by the concurrent idles) and the measurement operators are applied
  instantaneously at the window end.

One cycle measures the X-type stabilizer with A2 first, then both Z-type
stabilizers with A1/A3 while the A2 readout is still integrating, then pads
with idle time up to the configured cycle duration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ops
from .device import DeviceConfig
from .qubits import DATA_QUBITS, Qubit


class SchedulingError(ValueError):
    """Raised when the requested segments cannot fit the configured cycle."""


@dataclass(frozen=True)
class GateOp:
    """One gate inside a unitary burst: 'ry'/'rz' with angle, or 'cz'."""

    name: str
    targets: tuple[Qubit, ...]
    angle: float | None = None

    def describe(self) -> str:
        qubits = ",".join(q.name for q in self.targets)
        if self.angle is not None:
            return f"{self.name}({round(math.degrees(self.angle), 1):g}) {qubits}"
        return f"{self.name} {qubits}"


def gate_matrix(gate: GateOp) -> np.ndarray:
    """Resolve a GateOp to its (unembedded) matrix."""
    if gate.name == "cz":
        return ops.CZ
    return ops.single_qubit_gate(gate.name, gate.angle)


@dataclass(frozen=True)
class Unitary:
    start_ns: float
    gates: tuple[GateOp, ...]


@dataclass(frozen=True)
class Idle:
    start_ns: float
    duration_ns: float


@dataclass(frozen=True)
class Measure:
    start_ns: float
    duration_ns: float
    qubits: tuple[Qubit, ...]


Segment = Unitary | Idle | Measure


@dataclass(frozen=True)
class Schedule:
    segments: tuple[Segment, ...]
    total_ns: float


@dataclass(frozen=True)
class PrepSpec:
    """Target of the product-state preparation on (D2, D4).

    Either one of the named logical targets, or amplitudes (a, b, phi) for
    the product state |0>(a|0>+b|1>)|0>(a|0>+b e^{i phi}|1>).
    """

    name: str | None
    a: float
    b: float
    phi: float

    _NAMED = {
        "zeroL": (1.0, 0.0, 0.0),
        "oneL": (0.0, 1.0, 0.0),
        "plusL": (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 0.0),
        "minusL": (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), math.pi),
    }

    @classmethod
    def named(cls, name: str) -> "PrepSpec":
        if name not in cls._NAMED:
            raise ValueError(f"unknown prep target {name!r}; expected one of {sorted(cls._NAMED)}")
        a, b, phi = cls._NAMED[name]
        return cls(name=name, a=a, b=b, phi=phi)

    @classmethod
    def from_amplitudes(cls, a: float, b: float, phi: float) -> "PrepSpec":
        if abs(a * a + b * b - 1.0) > 1e-12:
            raise ValueError(f"amplitudes must satisfy a^2 + b^2 = 1, got {a * a + b * b!r}")
        if not math.isfinite(phi):
            raise ValueError("phi must be finite")
        return cls(name=None, a=float(a), b=float(b), phi=float(phi))

    def logical_amplitudes(self) -> np.ndarray:
        """Normalized target logical state (a^2, b^2 e^{i phi}) / norm."""
        vec = np.array([self.a**2, self.b**2 * np.exp(1j * self.phi)], dtype=complex)
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            raise ValueError("prep spec has no weight in the logical subspace")
        return vec / norm

    def ideal_success_probability(self) -> float:
        """All-zero-syndrome probability of the noiseless encoding: (a^4 + b^4)/2."""
        return (self.a**4 + self.b**4) / 2.0


def build_prep(spec: PrepSpec) -> Unitary:
    """Single instantaneous burst preparing |0>(a|0>+b|1>)|0>(a|0>+b e^{i phi}|1>)."""
    gates: list[GateOp] = []
    if spec.name == "zeroL":
        pass
    elif spec.name == "oneL":
        gates = [GateOp("ry", (Qubit.D2,), math.pi), GateOp("ry", (Qubit.D4,), math.pi)]
    elif spec.name == "plusL":
        gates = [GateOp("ry", (Qubit.D2,), math.pi / 2), GateOp("ry", (Qubit.D4,), math.pi / 2)]
    elif spec.name == "minusL":
        gates = [GateOp("ry", (Qubit.D2,), math.pi / 2), GateOp("ry", (Qubit.D4,), -math.pi / 2)]
    else:
        theta = 2.0 * math.atan2(spec.b, spec.a)
        if theta != 0.0:
            gates.append(GateOp("ry", (Qubit.D2,), theta))
            gates.append(GateOp("ry", (Qubit.D4,), theta))
        if spec.phi != 0.0:
            gates.append(GateOp("rz", (Qubit.D4,), spec.phi))
    return Unitary(start_ns=0.0, gates=tuple(gates))


_DEFAULT_A2_ORDER = (Qubit.D1, Qubit.D2, Qubit.D3, Qubit.D4)


def build_cycle(config: DeviceConfig, a2_cz_order: tuple[Qubit, ...] = _DEFAULT_A2_ORDER) -> Schedule:
    """Compile one stabilizer-measurement cycle.

    X half: basis-change pulses on D1..D4 together with the A2 superposition
    pulse, four sequential CZ(A2, Di), the reverting pulses, then the A2
    readout window.  Z half (concurrent with the A2 readout): superposition
    pulses on A1/A3, pairwise-parallel CZs (A1,D1)+(A3,D2) and (A1,D3)+(A3,D4),
    reverting pulses, then the joint A1/A3 readout window.  With dynamical
    decoupling enabled, two echo pulses on the data qubits sit at 1/4 and 3/4
    of the A1/A3 window so the bit frame is restored.  Trailing idle pads the
    cycle to the configured total.
    """
    if sorted(a2_cz_order) != sorted(_DEFAULT_A2_ORDER):
        raise ValueError("a2_cz_order must be a permutation of the data qubits")
    t = config.timing
    events: list[Unitary | Measure] = []
    now = t.single_gate_ns
    half = math.pi / 2

    x_open = [GateOp("ry", (q,), half) for q in DATA_QUBITS] + [GateOp("ry", (Qubit.A2,), half)]
    events.append(Unitary(now, tuple(x_open)))
    for target in a2_cz_order:
        now += t.cz_gate_ns
        events.append(Unitary(now, (GateOp("cz", (Qubit.A2, target)),)))
    now += t.single_gate_ns
    x_close = [GateOp("ry", (q,), -half) for q in DATA_QUBITS] + [GateOp("ry", (Qubit.A2,), -half)]
    events.append(Unitary(now, tuple(x_close)))

    a2_window_start = now
    events.append(Measure(a2_window_start, t.readout_a2_ns, (Qubit.A2,)))

    # Z half runs while the A2 readout pulse integrates.
    now = a2_window_start + t.single_gate_ns
    events.append(Unitary(now, (GateOp("ry", (Qubit.A1,), half), GateOp("ry", (Qubit.A3,), half))))
    now += t.cz_gate_ns
    events.append(Unitary(now, (GateOp("cz", (Qubit.A1, Qubit.D1)), GateOp("cz", (Qubit.A3, Qubit.D2)))))
    now += t.cz_gate_ns
    events.append(Unitary(now, (GateOp("cz", (Qubit.A1, Qubit.D3)), GateOp("cz", (Qubit.A3, Qubit.D4)))))
    now += t.single_gate_ns
    events.append(Unitary(now, (GateOp("ry", (Qubit.A1,), -half), GateOp("ry", (Qubit.A3,), -half))))

    z_window_start = now
    events.append(Measure(z_window_start, t.readout_a1a3_ns, (Qubit.A1, Qubit.A3)))

    if config.options.dd_enabled:
        # Echo pair on the data qubits inside the A1/A3 readout window;
        # two pulses restore the computational frame every cycle.
        for frac in (0.25, 0.75):
            echo_t = z_window_start + frac * t.readout_a1a3_ns
            events.append(Unitary(echo_t, tuple(GateOp("ry", (q,), math.pi) for q in DATA_QUBITS)))

    critical = max(a2_window_start + t.readout_a2_ns, z_window_start + t.readout_a1a3_ns)
    if critical > t.cycle_ns + 1e-9:
        raise SchedulingError(
            f"cycle critical path {critical:g} ns exceeds configured cycle_ns {t.cycle_ns:g} "
            f"(overflow {critical - t.cycle_ns:g} ns)"
        )
    return Schedule(segments=_tile(events, t.cycle_ns), total_ns=t.cycle_ns)


def _event_times(events: list[Unitary | Measure]) -> list[tuple[float, int, Unitary | Measure]]:
    """Execution-ordered event points: unitaries at start_ns, measurement
    operators at window end.  Ties resolve unitary-first."""
    keyed = []
    for seg in events:
        if isinstance(seg, Unitary):
            keyed.append((seg.start_ns, 0, seg))
        else:
            keyed.append((seg.start_ns + seg.duration_ns, 1, seg))
    keyed.sort(key=lambda item: (item[0], item[1]))
    return keyed


def _tile(events: list[Unitary | Measure], total_ns: float) -> tuple[Segment, ...]:
    """Insert idle segments so that idles exactly tile [0, total_ns), split at
    every unitary burst and measurement-application point."""
    keyed = _event_times(events)
    if keyed and keyed[-1][0] > total_ns + 1e-9:
        raise SchedulingError("event beyond the end of the cycle")
    segments: list[Segment] = list(events)
    cursor = 0.0
    for time, _, _ in keyed:
        if time > cursor + 1e-9:
            segments.append(Idle(cursor, time - cursor))
        cursor = max(cursor, time)
    if total_ns > cursor + 1e-9:
        segments.append(Idle(cursor, total_ns - cursor))

    def sort_key(seg: Segment) -> tuple[float, int]:
        # A unitary at time t fires at the end of the idle that ends at t,
        # so it sorts before the idle that starts at t.
        kind = {Unitary: 0, Idle: 1, Measure: 2}[type(seg)]
        return (seg.start_ns, kind)

    return tuple(sorted(segments, key=sort_key))


def build_parity_circuit(config: DeviceConfig, ancilla: Qubit) -> Schedule:
    """Standalone single-stabilizer readout circuit used for characterization.

    A1 measures the Z parity of (D1, D3), A3 of (D2, D4); A2 runs its four-CZ
    circuit without data basis changes and therefore measures the Z parity of
    all four data qubits.  No echo pulses, no trailing padding.
    """
    t = config.timing
    half = math.pi / 2
    if ancilla == Qubit.A1:
        partners: tuple[Qubit, ...] = (Qubit.D1, Qubit.D3)
        window = t.readout_a1a3_ns
    elif ancilla == Qubit.A3:
        partners = (Qubit.D2, Qubit.D4)
        window = t.readout_a1a3_ns
    elif ancilla == Qubit.A2:
        partners = (Qubit.D1, Qubit.D2, Qubit.D3, Qubit.D4)
        window = t.readout_a2_ns
    else:
        raise ValueError(f"{ancilla.name} is not an ancilla qubit")

    events: list[Unitary | Measure] = []
    now = t.single_gate_ns
    events.append(Unitary(now, (GateOp("ry", (ancilla,), half),)))
    for target in partners:
        now += t.cz_gate_ns
        events.append(Unitary(now, (GateOp("cz", (ancilla, target)),)))
    now += t.single_gate_ns
    events.append(Unitary(now, (GateOp("ry", (ancilla,), -half),)))
    events.append(Measure(now, window, (ancilla,)))
    total = now + window
    return Schedule(segments=_tile(events, total), total_ns=total)


def parity_data_qubits(ancilla: Qubit) -> tuple[Qubit, ...]:
    """The data qubits whose Z parity the given ancilla circuit reads out."""
    return {
        Qubit.A1: (Qubit.D1, Qubit.D3),
        Qubit.A2: (Qubit.D1, Qubit.D2, Qubit.D3, Qubit.D4),
        Qubit.A3: (Qubit.D2, Qubit.D4),
    }[ancilla]


@dataclass(frozen=True)
class AncillaMapCheck:
    """One verified input of the noiseless parity map."""

    label: str
    ancilla: Qubit
    expected_bit: int
    population: float  # weight of the expected ancilla basis state
    ok: bool


@dataclass(frozen=True)
class CycleCheckReport:
    checks: tuple[AncillaMapCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[AncillaMapCheck]:
        return [c for c in self.checks if not c.ok]


def ancilla_premeasurement_population(
    schedule: Schedule, data_state: np.ndarray, ancilla: Qubit, bit: int
) -> float:
    """Apply the schedule's unitaries (noiselessly, measurements deferred) to
    ``data_state`` x |000> and return the ancilla's population in |bit> just
    before that ancilla's measurement operators would apply."""
    if data_state.shape != (16,):
        raise ValueError("data_state must be a 16-dimensional vector")
    psi = np.kron(data_state, ops.ket_from_string("000"))
    povm_time = None
    for seg in schedule.segments:
        if isinstance(seg, Measure) and ancilla in seg.qubits:
            povm_time = seg.start_ns + seg.duration_ns
            break
    if povm_time is None:
        raise ValueError(f"schedule never measures {ancilla.name}")
    for time, _, seg in _event_times([s for s in schedule.segments if isinstance(s, Unitary)]):
        if time >= povm_time:
            break
        for gate in seg.gates:
            psi = ops.embed(gate_matrix(gate), gate.targets) @ psi
    # Reduced ancilla population from the statevector.
    tensor = psi.reshape([2] * 7)
    marginal = np.abs(tensor) ** 2
    axes = tuple(i for i in range(7) if i != int(ancilla))
    pops = marginal.sum(axis=axes)
    return float(pops[bit])


def ideal_cycle_unitary_check(schedule: Schedule, tol: float = 1e-9) -> CycleCheckReport:
    """Verify the textbook ancilla parity map of the noiseless cycle.

    For every computational-basis data state, A1 (A3) must land in the basis
    state matching the Z parity of D1,D3 (D2,D4) just before its measurement;
    for every X-basis product state, A2 must land in the state matching the
    four-qubit X parity.  Eigenvalue +1 maps to |0>, -1 to |1>.
    """
    checks: list[AncillaMapCheck] = []
    for bits in np.ndindex(2, 2, 2, 2):
        data = ops.basis_ket(bits, 4)
        label = "|" + "".join(map(str, bits)) + ">"
        for anc, (i, j) in ((Qubit.A1, (0, 2)), (Qubit.A3, (1, 3))):
            expected = (bits[i] + bits[j]) % 2
            pop = ancilla_premeasurement_population(schedule, data, anc, expected)
            checks.append(AncillaMapCheck(label, anc, expected, pop, abs(pop - 1.0) <= tol))
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    for signs in np.ndindex(2, 2, 2, 2):
        factors = [minus if s else plus for s in signs]
        data = ops.kron_all(factors).astype(complex)
        label = "|" + "".join("-" if s else "+" for s in signs) + ">"
        expected = sum(signs) % 2
        pop = ancilla_premeasurement_population(schedule, data, Qubit.A2, expected)
        checks.append(AncillaMapCheck(label, Qubit.A2, expected, pop, abs(pop - 1.0) <= tol))
    return CycleCheckReport(checks=tuple(checks))


def format_table(schedule: Schedule) -> str:
    """Fixed-width segment table for golden-file comparison."""
    lines = [f"{'start_ns':>10}  {'duration_ns':>11}  {'kind':<8} detail"]
    for seg in schedule.segments:
        if isinstance(seg, Idle):
            lines.append(f"{seg.start_ns:10.1f}  {seg.duration_ns:11.1f}  {'idle':<8} -")
        elif isinstance(seg, Unitary):
            detail = "; ".join(g.describe() for g in seg.gates) or "-"
            lines.append(f"{seg.start_ns:10.1f}  {0.0:11.1f}  {'unitary':<8} {detail}")
        else:
            detail = " ".join(q.name for q in seg.qubits)
            lines.append(f"{seg.start_ns:10.1f}  {seg.duration_ns:11.1f}  {'measure':<8} {detail}")
    lines.append(f"{'total':>10}  {schedule.total_ns:11.1f}")
    return "\n".join(lines) + "\n"


def count_gates(schedule: Schedule, name: str) -> int:
    return sum(1 for seg in schedule.segments if isinstance(seg, Unitary) for g in seg.gates if g.name == name)
