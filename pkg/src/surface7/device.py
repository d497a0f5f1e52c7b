"""Device parameters: per-qubit coherence and readout numbers, residual-ZZ
couplings, segment timings, and the knobs that select optional noise terms.

Configs are immutable after construction and validated on every load path.
Units are fixed: T1/T2* in microseconds, timings in nanoseconds, ZZ shifts in
MHz, dephasing-rate tables in 1/us.  Config files never embed units in keys.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .qubits import ALL_QUBITS, NUM_QUBITS, Qubit


class ConfigError(ValueError):
    """Raised when a device configuration fails validation.

    Carries the full list of individual problems in ``errors``.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# Default per-qubit parameters of the shipped seven-qubit device model:
# lifetimes / Ramsey decay times in us and multiplexed single-shot assignment
# probabilities (symmetric: p00 = p11).
DEFAULT_T1_US = {"D1": 11.2, "D2": 8.7, "D3": 8.7, "D4": 16.3, "A1": 5.7, "A2": 16.8, "A3": 11.8}
DEFAULT_T2_STAR_US = {"D1": 18.2, "D2": 14.4, "D3": 4.3, "D4": 21.5, "A1": 8.5, "A2": 16.7, "A3": 9.9}
DEFAULT_ASSIGNMENT_PROB = {"D1": 0.989, "D2": 0.991, "D3": 0.982, "D4": 0.974, "A1": 0.977, "A2": 0.984, "A3": 0.986}


@dataclass(frozen=True)
class QubitParams:
    """Coherence and readout parameters of one qubit.

    ``p00`` (``p11``) is the probability of reading 0 (1) given the qubit is
    in state 0 (1) at the end of the readout window.
    """

    t1: float
    t2_star: float
    p00: float
    p11: float

    def validate(self, path: str) -> list[str]:
        errors = []
        if not (self.t1 > 0):
            errors.append(f"{path}.t1: must be positive, got {self.t1!r}")
        if not (self.t2_star > 0):
            errors.append(f"{path}.t2_star: must be positive, got {self.t2_star!r}")
        elif self.t1 > 0 and self.t2_star > 2.0 * self.t1:
            errors.append(
                f"{path}.t2_star: unphysical dephasing (t2_star {self.t2_star:g} > 2*t1 {2.0 * self.t1:g})"
            )
        for name, p in (("p00", self.p00), ("p11", self.p11)):
            if not (0.5 < p <= 1.0):
                errors.append(f"{path}.{name}: must lie in (0.5, 1], got {p!r}")
        return errors


@dataclass(frozen=True)
class ZZMatrix:
    """Symmetric 7x7 matrix of residual-ZZ shifts alpha_ij in MHz.

    alpha_ij is the frequency shift of the joint |11> level of pair (i, j);
    the idle Hamiltonian picks up 2*pi*alpha_ij |11><11| on that pair.
    """

    alpha: tuple[tuple[float, ...], ...]

    @classmethod
    def zeros(cls) -> "ZZMatrix":
        return cls(alpha=tuple(tuple(0.0 for _ in range(NUM_QUBITS)) for _ in range(NUM_QUBITS)))

    @classmethod
    def from_rows(cls, rows: list[list[float]]) -> "ZZMatrix":
        return cls(alpha=tuple(tuple(float(x) for x in row) for row in rows))

    def validate(self, path: str) -> list[str]:
        errors = []
        if len(self.alpha) != NUM_QUBITS or any(len(row) != NUM_QUBITS for row in self.alpha):
            return [f"{path}.alpha: must be a {NUM_QUBITS}x{NUM_QUBITS} matrix"]
        for i in range(NUM_QUBITS):
            if self.alpha[i][i] != 0.0:
                errors.append(f"{path}.alpha: diagonal entry [{i}][{i}] must be 0")
            for j in range(i + 1, NUM_QUBITS):
                if self.alpha[i][j] != self.alpha[j][i]:
                    errors.append(f"{path}.alpha: asymmetric at [{i}][{j}] vs [{j}][{i}]")
        for i in range(NUM_QUBITS):
            for j in range(NUM_QUBITS):
                if not math.isfinite(self.alpha[i][j]):
                    errors.append(f"{path}.alpha[{i}][{j}]: not finite")
        return errors


@dataclass(frozen=True)
class Timing:
    """Segment durations in nanoseconds.

    Only the total cycle duration is a hard physical anchor; the per-gate
    splits are tunable.  ``prep_offset_ns`` is an opaque preparation/readout
    offset used only for the reported time axis t = (cycle*n + offset).
    """

    single_gate_ns: float = 40.0
    cz_gate_ns: float = 120.0
    readout_a2_ns: float = 300.0
    readout_a1a3_ns: float = 300.0
    cycle_ns: float = 1920.0
    prep_offset_ns: float = 300.0

    def validate(self, path: str) -> list[str]:
        errors = []
        for name in ("single_gate_ns", "cz_gate_ns", "readout_a2_ns", "readout_a1a3_ns", "cycle_ns"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                errors.append(f"{path}.{name}: must be a positive finite number, got {value!r}")
        if not (math.isfinite(self.prep_offset_ns) and self.prep_offset_ns >= 0):
            errors.append(f"{path}.prep_offset_ns: must be non-negative, got {self.prep_offset_ns!r}")
        return errors


@dataclass(frozen=True)
class Options:
    """Optional model knobs.

    ``dd_enabled`` inserts echo pulses on the data qubits during the ancilla
    readout window.  ``meas_dephasing`` is an optional 7x7 table of extra
    dephasing rates (1/us): entry [i][j] acts on qubit i while qubit j is
    being read out; default off.  ``integrator_dt_ns`` is the fixed RK4 step.
    """

    dd_enabled: bool = True
    meas_dephasing: tuple[tuple[float, ...], ...] | None = None
    integrator_dt_ns: float = 1.0

    def validate(self, path: str) -> list[str]:
        errors = []
        if not (math.isfinite(self.integrator_dt_ns) and self.integrator_dt_ns > 0):
            errors.append(f"{path}.integrator_dt_ns: must be positive, got {self.integrator_dt_ns!r}")
        if self.meas_dephasing is not None:
            md = self.meas_dephasing
            if len(md) != NUM_QUBITS or any(len(row) != NUM_QUBITS for row in md):
                errors.append(f"{path}.meas_dephasing: must be a {NUM_QUBITS}x{NUM_QUBITS} table")
            elif any(not math.isfinite(x) or x < 0 for row in md for x in row):
                errors.append(f"{path}.meas_dephasing: rates must be finite and non-negative")
        return errors


@dataclass(frozen=True)
class DeviceConfig:
    """Full validated parameter set handed to every other module."""

    qubits: dict[Qubit, QubitParams]
    zz: ZZMatrix = field(default_factory=ZZMatrix.zeros)
    timing: Timing = field(default_factory=Timing)
    options: Options = field(default_factory=Options)

    def validate(self) -> list[str]:
        errors = []
        for q in ALL_QUBITS:
            if q not in self.qubits:
                errors.append(f"qubits.{q.name}: missing entry")
            else:
                errors.extend(self.qubits[q].validate(f"qubits.{q.name}"))
        errors.extend(self.zz.validate("zz"))
        errors.extend(self.timing.validate("timing"))
        errors.extend(self.options.validate("options"))
        return errors

    def digest(self) -> str:
        """Content hash of the resolved configuration (canonical form)."""
        canonical = json.dumps(serialize_config(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def default_config() -> DeviceConfig:
    """The shipped default device model: measured-style qubit parameters,
    zero residual ZZ, standard timings, dynamical decoupling on."""
    qubits = {
        q: QubitParams(
            t1=DEFAULT_T1_US[q.name],
            t2_star=DEFAULT_T2_STAR_US[q.name],
            p00=DEFAULT_ASSIGNMENT_PROB[q.name],
            p11=DEFAULT_ASSIGNMENT_PROB[q.name],
        )
        for q in ALL_QUBITS
    }
    return DeviceConfig(qubits=qubits)


def serialize_config(config: DeviceConfig) -> dict[str, Any]:
    """Plain-dict form of a config; round-trips exactly through load_config."""
    return {
        "qubits": {
            q.name: {
                "t1": config.qubits[q].t1,
                "t2_star": config.qubits[q].t2_star,
                "p00": config.qubits[q].p00,
                "p11": config.qubits[q].p11,
            }
            for q in ALL_QUBITS
        },
        "zz": {"alpha": [list(row) for row in config.zz.alpha]},
        "timing": {f.name: getattr(config.timing, f.name) for f in dataclasses.fields(Timing)},
        "options": {
            "dd_enabled": config.options.dd_enabled,
            "meas_dephasing": None
            if config.options.meas_dephasing is None
            else [list(row) for row in config.options.meas_dephasing],
            "integrator_dt_ns": config.options.integrator_dt_ns,
        },
    }


def config_to_json(config: DeviceConfig) -> str:
    return json.dumps(serialize_config(config), indent=2) + "\n"


def _require_number(value: Any, path: str, errors: list[str]) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{path}: expected a number, got {value!r}")
        return math.nan
    return float(value)


def load_config(text: str) -> DeviceConfig:
    """Parse and validate a JSON config document.

    Unspecified fields fall back to the defaults of :func:`default_config`;
    unknown keys are rejected.  Raises :class:`ConfigError` carrying the full
    list of problems.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["config document must be a JSON object"])

    errors: list[str] = []
    unknown = set(doc) - {"qubits", "zz", "timing", "options"}
    if unknown:
        errors.append(f"unknown top-level keys: {sorted(unknown)}")

    base = default_config()
    qubits = dict(base.qubits)
    qubits_doc = doc.get("qubits", {})
    if not isinstance(qubits_doc, dict):
        errors.append("qubits: expected an object")
        qubits_doc = {}
    for label, fields_doc in qubits_doc.items():
        try:
            q = Qubit.from_label(label)
        except ValueError:
            errors.append(f"qubits.{label}: unknown qubit label")
            continue
        if not isinstance(fields_doc, dict):
            errors.append(f"qubits.{label}: expected an object")
            continue
        bad = set(fields_doc) - {"t1", "t2_star", "p00", "p11"}
        if bad:
            errors.append(f"qubits.{label}: unknown keys {sorted(bad)}")
        merged = dataclasses.asdict(qubits[q])
        for key in ("t1", "t2_star", "p00", "p11"):
            if key in fields_doc:
                merged[key] = _require_number(fields_doc[key], f"qubits.{label}.{key}", errors)
        qubits[q] = QubitParams(**merged)

    zz = base.zz
    if "zz" in doc:
        zz_doc = doc["zz"]
        if not isinstance(zz_doc, dict) or set(zz_doc) - {"alpha"}:
            errors.append("zz: expected an object with the single key 'alpha'")
        elif "alpha" in zz_doc:
            rows = zz_doc["alpha"]
            if (
                isinstance(rows, list)
                and len(rows) == NUM_QUBITS
                and all(isinstance(r, list) and len(r) == NUM_QUBITS for r in rows)
            ):
                zz = ZZMatrix.from_rows(
                    [[_require_number(x, f"zz.alpha[{i}][{j}]", errors) for j, x in enumerate(row)] for i, row in enumerate(rows)]
                )
            else:
                errors.append(f"zz.alpha: must be a {NUM_QUBITS}x{NUM_QUBITS} matrix")

    timing = base.timing
    if "timing" in doc:
        timing_doc = doc["timing"]
        if not isinstance(timing_doc, dict):
            errors.append("timing: expected an object")
        else:
            names = {f.name for f in dataclasses.fields(Timing)}
            bad = set(timing_doc) - names
            if bad:
                errors.append(f"timing: unknown keys {sorted(bad)}")
            merged = dataclasses.asdict(timing)
            for key in names & set(timing_doc):
                merged[key] = _require_number(timing_doc[key], f"timing.{key}", errors)
            timing = Timing(**merged)

    options = base.options
    if "options" in doc:
        options_doc = doc["options"]
        if not isinstance(options_doc, dict):
            errors.append("options: expected an object")
        else:
            bad = set(options_doc) - {"dd_enabled", "meas_dephasing", "integrator_dt_ns"}
            if bad:
                errors.append(f"options: unknown keys {sorted(bad)}")
            dd = options_doc.get("dd_enabled", options.dd_enabled)
            if not isinstance(dd, bool):
                errors.append(f"options.dd_enabled: expected a boolean, got {dd!r}")
                dd = options.dd_enabled
            md_doc = options_doc.get("meas_dephasing", None)
            md: tuple[tuple[float, ...], ...] | None = None
            if md_doc is not None:
                if (
                    isinstance(md_doc, list)
                    and len(md_doc) == NUM_QUBITS
                    and all(isinstance(r, list) and len(r) == NUM_QUBITS for r in md_doc)
                ):
                    md = tuple(
                        tuple(_require_number(x, f"options.meas_dephasing[{i}][{j}]", errors) for j, x in enumerate(row))
                        for i, row in enumerate(md_doc)
                    )
                else:
                    errors.append(f"options.meas_dephasing: must be a {NUM_QUBITS}x{NUM_QUBITS} table or null")
            dt = options_doc.get("integrator_dt_ns", options.integrator_dt_ns)
            dt = _require_number(dt, "options.integrator_dt_ns", errors) if "integrator_dt_ns" in options_doc else dt
            options = Options(dd_enabled=dd, meas_dephasing=md, integrator_dt_ns=dt)

    config = DeviceConfig(qubits=qubits, zz=zz, timing=timing, options=options)
    errors.extend(config.validate())
    if errors:
        raise ConfigError(errors)
    return config


def load_config_file(path: str) -> DeviceConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc}"]) from exc
    return load_config(text)


def relaxation_rate(params: QubitParams) -> float:
    """Energy-relaxation rate 1/T1 in 1/us."""
    return 1.0 / params.t1


def dephasing_prefactor(params: QubitParams) -> float:
    """Squared prefactor g of the sqrt(g)*sigma_z collapse operator, in 1/us.

    g = (1/T2* - 1/(2 T1)) / 2; zero when T2* is T1-limited (T2* = 2 T1).
    """
    g = 0.5 * (1.0 / params.t2_star - 0.5 / params.t1)
    # Guard against -0.0 from rounding when t2_star == 2*t1 exactly.
    return max(g, 0.0)
