"""JSON report documents and their readers.

Floats are written with at most 10 significant digits and keys keep a fixed
insertion order, so identical inputs give byte-identical output. Non-finite
floats become ``null``.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .losses import LossBreakdown, PowerRatio, switch_rms_current, capacitor_rms_current, diode_rms_current
from .quantities import CapacitorValue, CurrentBounds, DesignResult, InductorValue

SIG_DIGITS = 10


def _round(x: float):
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def normalize(obj):
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    return obj


def dumps(obj) -> str:
    return json.dumps(normalize(obj), indent=2, allow_nan=False) + "\n"


def design_to_dict(design: DesignResult) -> dict:
    cb = design.current_bounds
    return {
        "duty": design.duty,
        "period_s": design.period,
        "load_resistance_ohms": design.load_resistance,
        "inductances": [
            {"name": i.name, "l_min_h": i.l_min, "l_selected_h": i.l_selected} for i in design.inductances
        ],
        "capacitances": [
            {"name": c.name, "c_f": c.c, "ripple_budget_v": c.ripple_budget_abs} for c in design.capacitances
        ],
        "current_bounds": None if cb is None else {
            "i_l_avg_a": cb.i_l_avg, "i_max_a": cb.i_max, "i_min_a": cb.i_min, "ccm": cb.ccm,
        },
    }


def design_from_dict(d: dict) -> DesignResult:
    cb = d.get("current_bounds")
    return DesignResult(
        duty=d["duty"],
        period=d["period_s"],
        load_resistance=d["load_resistance_ohms"],
        inductances=tuple(InductorValue(i["name"], i["l_min_h"], i["l_selected_h"]) for i in d["inductances"]),
        capacitances=tuple(CapacitorValue(c["name"], c["c_f"], c["ripple_budget_v"]) for c in d["capacitances"]),
        current_bounds=None if cb is None else CurrentBounds(cb["i_l_avg_a"], cb["i_max_a"], cb["i_min_a"]),
    )


def losses_to_dict(b: LossBreakdown, Io: float, D: float) -> dict:
    return {
        "inductor_loss_w": b.inductor_loss,
        "switch_conduction_loss_w": b.switch_conduction_loss,
        "capacitor_loss_w": b.capacitor_loss,
        "diode_loss_w": b.diode_loss,
        "other_losses_w": b.other_losses,
        "total_w": b.total,
        "output_power_w": b.output_power,
        "efficiency": b.efficiency,
        "switch_rms_a": switch_rms_current(Io, D),
        "capacitor_rms_a": capacitor_rms_current(Io, D),
        "diode_rms_a": diode_rms_current(Io, D),
    }


def losses_from_dict(d: dict) -> LossBreakdown:
    return LossBreakdown(
        inductor_loss=d["inductor_loss_w"],
        switch_conduction_loss=d["switch_conduction_loss_w"],
        capacitor_loss=d["capacitor_loss_w"],
        diode_loss=d["diode_loss_w"],
        other_losses=d["other_losses_w"],
        output_power=d["output_power_w"],
    )


def ratios_to_list(ratios) -> list:
    return [
        {"stage": k + 1, "p_in_w": r.p_in, "p_out_w": r.p_out, "ratio": r.ratio, "feasible": r.feasible}
        for k, r in enumerate(ratios)
    ]


def ratios_from_list(rows) -> list:
    return [PowerRatio(r["p_in_w"], r["p_out_w"]) for r in rows]


def measurement_rows(stage_report) -> list:
    """One row per recorded signal: ``{signal, unit, mean, rms, p2p, min, max}``."""
    wf = stage_report.result.waveforms
    rows = []
    for name, st in stage_report.stats.items():
        rows.append({"signal": name, "unit": wf.units[name], **st.as_dict()})
    return rows


def simulation_to_dict(stage_report) -> dict:
    r = stage_report.result
    out = {"stage": stage_report.index}
    if r is None:
        out.update({"error": stage_report.error, "converged": False})
        return out
    out.update({
        "cycles_run": r.cycles_run,
        "converged": r.converged,
        "conduction_mode": r.conduction_mode,
        "final_cycle_change": r.final_change,
        "measured_output_power_w": stage_report.measured_output_power,
        "switch_average_power_w": stage_report.switch_power,
        "switch_power_factor": stage_report.switch_power_factor,
        "measurements": measurement_rows(stage_report),
    })
    return out


def stage_report_to_dict(stage_report) -> dict:
    spec = stage_report.spec
    return {
        "stage": stage_report.index,
        "topology": spec.topology.value,
        "design": design_to_dict(stage_report.design),
        "losses": losses_to_dict(stage_report.losses, spec.output_current, stage_report.design.duty),
        "simulation": simulation_to_dict(stage_report),
    }


def cascade_to_dict(report) -> dict:
    return {
        "coupling": "ideal_source",
        "stages": [stage_report_to_dict(s) for s in report.stages],
        "ratios": ratios_to_list(report.ratios),
        "feasible": report.feasible,
    }
