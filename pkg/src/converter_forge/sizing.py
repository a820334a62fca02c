"""Closed-form component sizing for SEPIC and inverting buck-boost stages.

All functions take and return SI values. Duty cycles assume lossless
conversion (no diode-drop compensation).
"""

from __future__ import annotations

from .quantities import (
    CapacitorValue,
    CurrentBounds,
    DesignResult,
    InductorValue,
    SpecError,
    StageSpec,
    Topology,
    validate_spec,
)

DEFAULT_CONTINUITY_MARGIN = 1.25


def _require(cond, name, msg):
    if not cond:
        raise SpecError([(name, msg)])


def _check_duty(D):
    _require(0.0 < D < 1.0, "duty", f"must lie in (0, 1), got {D!r}")


def sepic_duty_cycle(Vs: float, Vo: float) -> float:
    """D = Vo / (Vo + Vs) for a non-inverting SEPIC."""
    _require(Vs > 0, "Vs", f"must be > 0, got {Vs!r}")
    _require(Vo > 0, "Vo", f"must be > 0, got {Vo!r}")
    return Vo / (Vo + Vs)


def inverting_duty_cycle(Vs: float, Vo: float) -> float:
    """D = |Vo| / (|Vo| + Vs); ``Vo`` must be negative."""
    _require(Vs > 0, "Vs", f"must be > 0, got {Vs!r}")
    _require(Vo < 0, "Vo", f"polarity mismatch: inverting stage needs Vo < 0, got {Vo!r}")
    return -Vo / (-Vo + Vs)


def sepic_min_inductances(D: float, R: float, f: float) -> tuple[float, float]:
    """Smallest L1, L2 that keep both SEPIC inductor currents continuous."""
    _check_duty(D)
    _require(R > 0, "R", f"must be > 0, got {R!r}")
    _require(f > 0, "f", f"must be > 0, got {f!r}")
    l1 = (1 - D) ** 2 * R / (2 * D * f)
    l2 = (1 - D) * R / (2 * f)
    return l1, l2


def sepic_capacitances(D, Vo, R, dvc1_abs, dvo_abs, f) -> tuple[float, float]:
    """Coupling and output capacitance from absolute ripple budgets in volts.

    Either budget may be ``None`` to skip that capacitor (returned as None).
    """
    _check_duty(D)
    _require(Vo > 0 and R > 0 and f > 0, "Vo/R/f", "must all be > 0")

    def cap(budget, name):
        if budget is None:
            return None
        _require(budget > 0, name, f"ripple budget must be > 0, got {budget!r}")
        return D * Vo / (R * budget * f)

    return cap(dvc1_abs, "dvc1_abs"), cap(dvo_abs, "dvo_abs")


def buckboost_min_inductance(D: float, R: float, f: float) -> float:
    _check_duty(D)
    _require(R > 0, "R", f"must be > 0, got {R!r}")
    _require(f > 0, "f", f"must be > 0, got {f!r}")
    return (1 - D) ** 2 * R / (2 * f)


def buckboost_capacitance(D: float, R: float, ripple_frac: float, f: float) -> float:
    _check_duty(D)
    _require(R > 0 and f > 0, "R/f", "must be > 0")
    _require(ripple_frac > 0, "ripple_frac", f"must be > 0, got {ripple_frac!r}")
    return D / (R * ripple_frac * f)


def apply_continuity_margin(L_min: float, factor: float = DEFAULT_CONTINUITY_MARGIN) -> float:
    _require(factor >= 1.0, "factor", f"continuity margin must be >= 1, got {factor!r}")
    return factor * L_min


def buckboost_current_bounds(Vs, D, T, R, L) -> CurrentBounds:
    """Average, peak and valley inductor current of an inverting buck-boost.

    A non-positive valley (``CurrentBounds.ccm`` False) means the inductor
    would leave continuous conduction; it is reported, not raised.
    """
    _check_duty(D)
    i_l = Vs * D / (R * (1 - D) ** 2)
    half = Vs * D * T / (2 * L)
    return CurrentBounds(i_l_avg=i_l, i_max=i_l + half, i_min=i_l - half)


def coupling_cap_reference_voltage(spec: StageSpec) -> float:
    """Voltage the coupling-capacitor ripple fraction is taken against.

    The design procedure uses the source/output difference |Vs - Vo|.
    """
    return abs(spec.source_voltage - spec.output_voltage)


def design_stage(spec: StageSpec, margin: float = DEFAULT_CONTINUITY_MARGIN) -> DesignResult:
    """Size every component of one stage from its specification."""
    validate_spec(spec)
    Vs, Vo, f = spec.source_voltage, spec.output_voltage, spec.switching_frequency
    R = spec.load_resistance
    T = spec.period

    if spec.topology is Topology.SEPIC:
        D = sepic_duty_cycle(Vs, Vo)
        l1_min, l2_min = sepic_min_inductances(D, R, f)
        ref = coupling_cap_reference_voltage(spec)
        _require(ref > 0, "output_voltage",
                 "coupling-capacitor ripple is referenced to |Vs - Vo|, which is zero when Vo equals Vs")
        dvc1 = spec.coupling_cap_ripple_frac * ref
        dvo = spec.output_ripple_frac * abs(Vo)
        c1, c2 = sepic_capacitances(D, Vo, R, dvc1, dvo, f)
        return DesignResult(
            duty=D,
            period=T,
            load_resistance=R,
            inductances=(
                InductorValue("L1", l1_min, apply_continuity_margin(l1_min, margin)),
                InductorValue("L2", l2_min, apply_continuity_margin(l2_min, margin)),
            ),
            capacitances=(CapacitorValue("C1", c1, dvc1), CapacitorValue("C2", c2, dvo)),
        )

    if spec.topology is Topology.INVERTING_BUCK_BOOST:
        D = inverting_duty_cycle(Vs, Vo)
        l_min = buckboost_min_inductance(D, R, f)
        l_sel = apply_continuity_margin(l_min, margin)
        c = buckboost_capacitance(D, R, spec.output_ripple_frac, f)
        return DesignResult(
            duty=D,
            period=T,
            load_resistance=R,
            inductances=(InductorValue("L", l_min, l_sel),),
            capacitances=(CapacitorValue("C", c, spec.output_ripple_frac * abs(Vo)),),
            current_bounds=buckboost_current_bounds(Vs, D, T, R, l_sel),
        )

    raise SpecError([("topology", f"unsupported topology {spec.topology!r}")])
