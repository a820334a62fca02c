"""Domain types shared by the sizing, loss, circuit and simulation modules.

Every quantity is held in SI base units (V, A, H, F, s, Hz, ohm, W). Ripple
budgets are stored as dimensionless fractions; absolute budgets are derived
where they are used.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional


class SpecError(ValueError):
    """Raised when a specification violates one or more invariants.

    ``violations`` holds ``(field, message)`` pairs, one per broken rule.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        text = "; ".join(f"{name}: {msg}" for name, msg in self.violations)
        super().__init__(text)


class Topology(str, enum.Enum):
    SEPIC = "sepic"
    INVERTING_BUCK_BOOST = "inverting_buck_boost"

    @property
    def n_inductors(self) -> int:
        return 2 if self is Topology.SEPIC else 1

    @property
    def n_capacitors(self) -> int:
        return 2 if self is Topology.SEPIC else 1


@dataclass(frozen=True)
class StageSpec:
    """Electrical requirements of one converter stage.

    ``source_current`` is the optional current rating of the source feeding
    the stage. It only enters the power-ratio bookkeeping of a cascade.
    """

    topology: Topology
    source_voltage: float
    output_voltage: float
    output_current: float
    switching_frequency: float
    output_ripple_frac: float
    coupling_cap_ripple_frac: Optional[float] = None
    source_current: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))

    @property
    def period(self) -> float:
        return 1.0 / self.switching_frequency

    @property
    def load_resistance(self) -> float:
        return abs(self.output_voltage) / self.output_current

    @property
    def output_power(self) -> float:
        return abs(self.output_voltage) * self.output_current

    @property
    def polarity(self) -> int:
        return -1 if self.topology is Topology.INVERTING_BUCK_BOOST else 1


def _is_pos(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x) and x > 0


def validate_spec(spec: StageSpec) -> StageSpec:
    """Check every StageSpec invariant and return ``spec`` unchanged.

    All violations are collected before raising, so one call reports every
    broken field.
    """
    bad = []
    if not _is_pos(spec.source_voltage):
        bad.append(("source_voltage", f"must be > 0, got {spec.source_voltage!r}"))
    if not _is_pos(spec.output_current):
        bad.append(("output_current", f"must be > 0, got {spec.output_current!r}"))
    if not _is_pos(spec.switching_frequency):
        bad.append(("switching_frequency", f"must be > 0, got {spec.switching_frequency!r}"))

    vo = spec.output_voltage
    if not (isinstance(vo, (int, float)) and math.isfinite(vo)) or vo == 0:
        bad.append(("output_voltage", f"must be finite and non-zero, got {vo!r}"))
    elif spec.topology is Topology.SEPIC and vo < 0:
        bad.append(("output_voltage", "polarity mismatch: SEPIC output must be positive"))
    elif spec.topology is Topology.INVERTING_BUCK_BOOST and vo > 0:
        bad.append(("output_voltage", "polarity mismatch: inverting buck-boost output must be negative"))

    def frac_ok(x):
        return isinstance(x, (int, float)) and 0.0 < x < 1.0

    if not frac_ok(spec.output_ripple_frac):
        bad.append(("output_ripple_frac", f"must lie in (0, 1), got {spec.output_ripple_frac!r}"))
    if spec.topology is Topology.SEPIC and not frac_ok(spec.coupling_cap_ripple_frac):
        bad.append(
            ("coupling_cap_ripple_frac",
             f"SEPIC needs a coupling-capacitor ripple fraction in (0, 1), got {spec.coupling_cap_ripple_frac!r}")
        )
    if spec.source_current is not None and not _is_pos(spec.source_current):
        bad.append(("source_current", f"must be > 0 when given, got {spec.source_current!r}"))

    if bad:
        raise SpecError(bad)
    return spec


@dataclass(frozen=True)
class InductorValue:
    name: str
    l_min: float
    l_selected: float


@dataclass(frozen=True)
class CapacitorValue:
    name: str
    c: float
    ripple_budget_abs: float


@dataclass(frozen=True)
class CurrentBounds:
    i_l_avg: float
    i_max: float
    i_min: float

    @property
    def ccm(self) -> bool:
        return self.i_min > 0


@dataclass(frozen=True)
class DesignResult:
    duty: float
    period: float
    load_resistance: float
    inductances: tuple[InductorValue, ...]
    capacitances: tuple[CapacitorValue, ...]
    current_bounds: Optional[CurrentBounds] = None

    def inductor(self, name: str) -> InductorValue:
        for ind in self.inductances:
            if ind.name == name:
                return ind
        raise KeyError(name)

    def capacitor(self, name: str) -> CapacitorValue:
        for cap in self.capacitances:
            if cap.name == name:
                return cap
        raise KeyError(name)


def _as_tuple(value) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


@dataclass(frozen=True)
class ParasiticSet:
    """Non-ideal element values.

    ``inductor_esr`` and ``capacitor_esr`` take one value per element, in the
    order the circuit numbers them (SEPIC: L1, L2 / C1, C2). A single value is
    applied to every element. The default instance is the ideal set.
    """

    inductor_esr: tuple[float, ...] = (0.0,)
    switch_on_resistance: float = 0.0
    capacitor_esr: tuple[float, ...] = (0.0,)
    diode_forward_voltage: float = 0.0
    diode_series_resistance: float = 0.0
    constant_switching_loss: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "inductor_esr", _as_tuple(self.inductor_esr))
        object.__setattr__(self, "capacitor_esr", _as_tuple(self.capacitor_esr))
        bad = []
        for name in ("inductor_esr", "capacitor_esr"):
            vals = getattr(self, name)
            if not vals:
                bad.append((name, "needs at least one value"))
            elif any(not (math.isfinite(v) and v >= 0) for v in vals):
                bad.append((name, f"values must be finite and >= 0, got {vals}"))
        for name in ("switch_on_resistance", "diode_forward_voltage",
                     "diode_series_resistance", "constant_switching_loss"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                bad.append((name, f"must be finite and >= 0, got {v!r}"))
        if bad:
            raise SpecError(bad)

    @property
    def is_ideal(self) -> bool:
        return (
            all(v == 0 for v in self.inductor_esr)
            and all(v == 0 for v in self.capacitor_esr)
            and self.switch_on_resistance == 0
            and self.diode_forward_voltage == 0
            and self.diode_series_resistance == 0
            and self.constant_switching_loss == 0
        )

    def r_l(self, index: int) -> float:
        return _pick(self.inductor_esr, index, "inductor_esr")

    def r_c(self, index: int) -> float:
        return _pick(self.capacitor_esr, index, "capacitor_esr")


def _pick(values, index, name):
    if len(values) == 1:
        return values[0]
    try:
        return values[index]
    except IndexError:
        raise SpecError([(name, f"no value for element {index + 1} (got {len(values)})")]) from None


IDEAL = ParasiticSet()
