"""Conduction-loss models, efficiency and power-ratio bookkeeping.

The closed forms assume ripple-free inductor currents: during the on-time the
switch carries Io/(1-D), during the off-time the diode carries the same
current, and the output capacitor sees -Io then Io*D/(1-D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .quantities import DesignResult, ParasiticSet, SpecError, StageSpec, Topology


def _check(Io, D):
    if not Io > 0:
        raise SpecError([("Io", f"must be > 0, got {Io!r}")])
    if not 0.0 < D < 1.0:
        raise SpecError([("D", f"must lie in (0, 1), got {D!r}")])


def _nonneg(name, value):
    if not value >= 0:
        raise SpecError([(name, f"must be >= 0, got {value!r}")])


@dataclass(frozen=True)
class LossBreakdown:
    inductor_loss: float
    switch_conduction_loss: float
    capacitor_loss: float
    diode_loss: float
    other_losses: float
    output_power: float

    @property
    def total(self) -> float:
        return (self.inductor_loss + self.switch_conduction_loss + self.capacitor_loss
                + self.diode_loss + self.other_losses)

    @property
    def efficiency(self) -> float:
        return efficiency(self.output_power, self)


def inductor_conduction_loss(r_L: float, Io: float, D: float) -> float:
    """Loss in an inductor carrying the buck-boost average Io/(1-D)."""
    _nonneg("r_L", r_L)
    _check(Io, D)
    return r_L * Io**2 / (1 - D) ** 2


def switch_rms_current(Io: float, D: float) -> float:
    _check(Io, D)
    return math.sqrt(D) * Io / (1 - D)


def mosfet_conduction_loss(R_DS: float, Io: float, D: float) -> float:
    _nonneg("R_DS", R_DS)
    _check(Io, D)
    return D * R_DS * Io**2 / (1 - D) ** 2


def capacitor_rms_current(Io: float, D: float) -> float:
    _check(Io, D)
    return Io * math.sqrt(D / (1 - D))


def capacitor_loss(r_C: float, Io: float, D: float) -> float:
    # negative ESR is nonphysical and rejected outright
    _nonneg("r_C", r_C)
    _check(Io, D)
    return D * r_C * Io**2 / (1 - D)


def diode_rms_current(Io: float, D: float) -> float:
    _check(Io, D)
    return Io / math.sqrt(1 - D)


def diode_loss(Vf: float, Rf: float, Io: float, D: float) -> float:
    """Forward-drop loss on the average current Io plus Rf on the RMS current."""
    _nonneg("Vf", Vf)
    _nonneg("Rf", Rf)
    _check(Io, D)
    return Vf * Io + Rf * Io**2 / (1 - D)


def esr_from_ripple(dv_esr: float, di_c: float) -> float:
    """ESR magnitude that produces ``dv_esr`` of ripple for a ``di_c`` swing."""
    if not di_c > 0:
        raise SpecError([("di_c", f"current swing must be > 0, got {di_c!r}")])
    return abs(dv_esr) / di_c


def inductor_esr_from_drop(Vs: float, Vo: float, I_L: float, drop_frac: float = 0.01) -> float:
    """Inductor ESR giving a ``drop_frac`` share of |Vs - Vo| at current ``I_L``.

    A fallback for when no datasheet value is available.
    """
    if not I_L > 0:
        raise SpecError([("I_L", f"must be > 0, got {I_L!r}")])
    return drop_frac * abs(Vs - Vo) / I_L


def efficiency(P_out: float, breakdown: LossBreakdown) -> float:
    return P_out / (P_out + breakdown.total)


@dataclass(frozen=True)
class PowerRatio:
    p_in: float
    p_out: float

    @property
    def ratio(self) -> float:
        return self.p_out / self.p_in

    @property
    def feasible(self) -> bool:
        return self.ratio <= 1.0


def chain_power_ratios(stage_powers) -> list[PowerRatio]:
    """Raw P_out/P_in per stage. Ratios above one are flagged, never clamped.

    ``stage_powers`` is an iterable of ``(P_in, P_out)`` pairs.
    """
    out = []
    for i, (p_in, p_out) in enumerate(stage_powers):
        if not (p_in > 0 and p_out > 0):
            raise SpecError([(f"stage {i + 1}", f"powers must be > 0, got ({p_in!r}, {p_out!r})")])
        out.append(PowerRatio(float(p_in), float(p_out)))
    return out


@dataclass(frozen=True)
class ScenarioStage:
    source_current: float
    load_resistance: float


def scenario_stage_parameters(P_in: float, Vs: float, Vo: float) -> ScenarioStage:
    """Source current and load for a stage drawing ``P_in`` from ``Vs``.

    The load is the one that absorbs ``P_in`` at ``|Vo|`` (lossless stage).
    """
    if not (P_in > 0 and Vs > 0 and Vo != 0):
        raise SpecError([("P_in/Vs/Vo", "P_in and Vs must be > 0 and Vo non-zero")])
    return ScenarioStage(source_current=P_in / Vs, load_resistance=Vo**2 / P_in)


def stage_losses(spec: StageSpec, design: DesignResult, parasitics: ParasiticSet) -> LossBreakdown:
    """Closed-form loss breakdown of one designed stage.

    The switch, diode and output-capacitor terms are shared by both
    topologies. For the SEPIC each inductor is charged with its own average
    current (L1 carries Io*D/(1-D), L2 carries Io) and the coupling capacitor
    sees the same RMS current as the output capacitor.
    """
    Io, D = spec.output_current, design.duty
    p_sw = mosfet_conduction_loss(parasitics.switch_on_resistance, Io, D)
    p_d = diode_loss(parasitics.diode_forward_voltage, parasitics.diode_series_resistance, Io, D)

    if spec.topology is Topology.SEPIC:
        i_l1 = Io * D / (1 - D)
        p_l = parasitics.r_l(0) * i_l1**2 + parasitics.r_l(1) * Io**2
        p_c = capacitor_loss(parasitics.r_c(0), Io, D) + capacitor_loss(parasitics.r_c(1), Io, D)
    else:
        p_l = inductor_conduction_loss(parasitics.r_l(0), Io, D)
        p_c = capacitor_loss(parasitics.r_c(0), Io, D)

    return LossBreakdown(
        inductor_loss=p_l,
        switch_conduction_loss=p_sw,
        capacitor_loss=p_c,
        diode_loss=p_d,
        other_losses=parasitics.constant_switching_loss,
        output_power=spec.output_power,
    )
