"""Multi-stage chains in which each stage is fed by an ideal source at the
previous stage's specified output voltage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .circuit import build_stage_circuit
from .losses import LossBreakdown, chain_power_ratios, stage_losses
from .measure import waveform_power, waveform_power_factor, waveform_stats
from .quantities import IDEAL, DesignResult, ParasiticSet, SpecError, StageSpec, validate_spec
from .simulator import SimConfig, SimResult, SimulationDiverged, run_to_steady_state
from .sizing import DEFAULT_CONTINUITY_MARGIN, design_stage

COUPLING_IDEAL_SOURCE = "ideal_source"
CHAIN_RTOL = 1e-9


@dataclass(frozen=True)
class CascadeStage:
    spec: StageSpec
    design: DesignResult
    parasitics: ParasiticSet = IDEAL


@dataclass(frozen=True)
class CascadeDesign:
    stages: tuple[CascadeStage, ...]
    coupling: str = COUPLING_IDEAL_SOURCE


def check_chain(specs: Sequence[StageSpec]) -> None:
    if not specs:
        raise SpecError([("stages", "cascade needs at least one stage")])
    for k in range(1, len(specs)):
        want = abs(specs[k - 1].output_voltage)
        got = specs[k].source_voltage
        if abs(got - want) > CHAIN_RTOL * max(abs(want), abs(got)):
            raise SpecError([(f"stage {k + 1}.source_voltage",
                              f"chain mismatch: stage {k} delivers {want:g} V but stage {k + 1} expects {got:g} V")])


def compose(specs: Sequence[StageSpec], parasitics: Optional[Sequence[ParasiticSet]] = None,
            margins: Optional[Sequence[float]] = None) -> CascadeDesign:
    specs = [validate_spec(s) for s in specs]
    check_chain(specs)
    parasitics = list(parasitics) if parasitics is not None else [IDEAL] * len(specs)
    margins = list(margins) if margins is not None else [DEFAULT_CONTINUITY_MARGIN] * len(specs)
    if len(parasitics) != len(specs) or len(margins) != len(specs):
        raise SpecError([("stages", "one parasitic set and one margin per stage required")])
    stages = tuple(
        CascadeStage(spec=s, design=design_stage(s, margin=mg), parasitics=p)
        for s, p, mg in zip(specs, parasitics, margins)
    )
    return CascadeDesign(stages=stages)


@dataclass
class StageReport:
    index: int
    spec: StageSpec
    design: DesignResult
    parasitics: ParasiticSet
    losses: LossBreakdown
    result: Optional[SimResult] = None
    stats: dict = field(default_factory=dict)
    measured_output_power: float = math.nan
    switch_power: float = math.nan
    switch_power_factor: float = math.nan
    error: Optional[str] = None


def evaluate_stage(spec: StageSpec, design: DesignResult, parasitics: ParasiticSet = IDEAL,
                   sim_config: SimConfig = SimConfig(), index: int = 1, *,
                   inductances=None, duty=None) -> StageReport:
    """Simulate, measure and loss-model one stage."""
    report = StageReport(index=index, spec=spec, design=design, parasitics=parasitics,
                         losses=stage_losses(spec, design, parasitics))
    circuit = build_stage_circuit(design, spec, parasitics, inductances=inductances, duty=duty)
    try:
        result = run_to_steady_state(circuit, sim_config)
    except SimulationDiverged as exc:
        report.error = str(exc)
        return report
    wf = result.waveforms
    report.result = result
    report.stats = {name: waveform_stats(wf, name) for name in wf.signals}
    if "v_out" in wf.signals and "i_out" in wf.signals:
        report.measured_output_power = abs(waveform_power(wf, "v_out", "i_out"))
    if "v_sw" in wf.signals and "i_sw" in wf.signals:
        report.switch_power = waveform_power(wf, "v_sw", "i_sw")
        try:
            report.switch_power_factor = waveform_power_factor(wf, "v_sw", "i_sw")
        except ValueError:
            pass
    return report


def stage_power_pairs(stages: Sequence[CascadeStage]) -> list[tuple[float, float]]:
    """(P_in, P_out) per stage from specified values.

    P_out is |Vo|*Io. P_in is Vs times the rated source current when one is
    given; otherwise it is the previous stage's P_out, and for a first stage
    without a rating the output power plus the modelled losses.
    """
    pairs = []
    for k, st in enumerate(stages):
        p_out = st.spec.output_power
        if st.spec.source_current is not None:
            p_in = st.spec.source_voltage * st.spec.source_current
        elif k > 0:
            p_in = pairs[-1][1]
        else:
            p_in = p_out + stage_losses(st.spec, st.design, st.parasitics).total
        pairs.append((p_in, p_out))
    return pairs


@dataclass
class CascadeReport:
    stages: list
    ratios: list

    @property
    def feasible(self) -> bool:
        return all(r.feasible for r in self.ratios)


def evaluate(cascade: CascadeDesign, sim_config: SimConfig = SimConfig()) -> CascadeReport:
    if cascade.coupling != COUPLING_IDEAL_SOURCE:
        raise SpecError([("coupling", f"unsupported coupling {cascade.coupling!r}")])
    reports = [
        evaluate_stage(st.spec, st.design, st.parasitics, sim_config, index=k + 1)
        for k, st in enumerate(cascade.stages)
    ]
    ratios = chain_power_ratios(stage_power_pairs(cascade.stages))
    return CascadeReport(stages=reports, ratios=ratios)
