"""JSON spec documents: parsing into StageSpec / ParasiticSet / SimConfig.

Example::

    {
      "stages": [
        {"topology": "sepic", "vs_volts": 55, "vo_volts": 12, "io_amperes": 2,
         "f_hz": 100000, "coupling_cap_ripple_frac": 0.005,
         "output_ripple_frac": 0.01, "source_current_amperes": 10}
      ],
      "sim": {"steps_per_period": 2000}
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from .quantities import IDEAL, ParasiticSet, SpecError, StageSpec, Topology, validate_spec
from .simulator import SimConfig
from .sizing import DEFAULT_CONTINUITY_MARGIN

STAGE_KEYS = {
    "topology", "vs_volts", "vo_volts", "io_amperes", "f_hz",
    "coupling_cap_ripple_frac", "output_ripple_frac", "parasitics",
    "source_current_amperes", "continuity_margin",
}
REQUIRED_STAGE_KEYS = {"topology", "vs_volts", "vo_volts", "io_amperes", "f_hz", "output_ripple_frac"}
PARASITIC_KEYS = {"r_l_ohms", "r_ds_ohms", "r_c_ohms", "v_f_volts", "r_f_ohms", "switching_loss_watts"}
SIM_KEYS = {"steps_per_period", "max_cycles", "steady_state_tol", "accelerate"}
TOP_KEYS = {"stages", "sim"}


class SpecParseError(ValueError):
    """Malformed JSON; carries the 1-based line and column of the fault."""

    def __init__(self, msg, line=None, col=None):
        self.line, self.col = line, col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + msg)


@dataclass(frozen=True)
class StageEntry:
    spec: StageSpec
    parasitics: ParasiticSet
    has_parasitics: bool
    continuity_margin: float = DEFAULT_CONTINUITY_MARGIN


@dataclass(frozen=True)
class SpecDocument:
    stages: tuple[StageEntry, ...]
    sim: SimConfig

    @property
    def specs(self) -> list[StageSpec]:
        return [s.spec for s in self.stages]


def _number(value, where, bad, allow_list=False):
    if allow_list and isinstance(value, list):
        out = [_number(v, f"{where}[{i}]", bad) for i, v in enumerate(value)]
        return tuple(out) if None not in out else None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        bad.append((where, f"expected a finite number, got {value!r}"))
        return None
    return float(value)


def _unknown(obj, allowed, where, bad):
    for key in obj:
        if key not in allowed:
            bad.append((f"{where}.{key}" if where else key, "unknown key"))


def parse_parasitics(obj, where, bad) -> Optional[ParasiticSet]:
    if not isinstance(obj, dict):
        bad.append((where, "expected an object"))
        return None
    _unknown(obj, PARASITIC_KEYS, where, bad)
    kw = {}
    names = {
        "r_l_ohms": ("inductor_esr", True),
        "r_ds_ohms": ("switch_on_resistance", False),
        "r_c_ohms": ("capacitor_esr", True),
        "v_f_volts": ("diode_forward_voltage", False),
        "r_f_ohms": ("diode_series_resistance", False),
        "switching_loss_watts": ("constant_switching_loss", False),
    }
    for key, (attr, listy) in names.items():
        if key in obj:
            v = _number(obj[key], f"{where}.{key}", bad, allow_list=listy)
            if v is not None:
                kw[attr] = v
    try:
        return ParasiticSet(**kw)
    except SpecError as exc:
        bad.extend((f"{where}.{n}", m) for n, m in exc.violations)
        return None


def parse_stage(obj, where, bad) -> Optional[StageEntry]:
    if not isinstance(obj, dict):
        bad.append((where, "expected an object"))
        return None
    n_before = len(bad)
    _unknown(obj, STAGE_KEYS, where, bad)
    for key in sorted(REQUIRED_STAGE_KEYS - set(obj)):
        bad.append((f"{where}.{key}", "missing"))
    try:
        topology = Topology(obj.get("topology"))
    except ValueError:
        bad.append((f"{where}.topology", f"must be 'sepic' or 'inverting_buck_boost', got {obj.get('topology')!r}"))
        topology = None

    def num(key, optional=False):
        if key not in obj or (optional and obj[key] is None):
            return None
        return _number(obj[key], f"{where}.{key}", bad)

    vals = {k: num(k) for k in ("vs_volts", "vo_volts", "io_amperes", "f_hz", "output_ripple_frac")}
    ccr = num("coupling_cap_ripple_frac", optional=True)
    isrc = num("source_current_amperes", optional=True)
    margin = num("continuity_margin", optional=True)
    parasitics, has_par = IDEAL, "parasitics" in obj
    if has_par:
        parasitics = parse_parasitics(obj["parasitics"], f"{where}.parasitics", bad)
    if len(bad) > n_before:
        return None

    spec = StageSpec(
        topology=topology,
        source_voltage=vals["vs_volts"],
        output_voltage=vals["vo_volts"],
        output_current=vals["io_amperes"],
        switching_frequency=vals["f_hz"],
        output_ripple_frac=vals["output_ripple_frac"],
        coupling_cap_ripple_frac=ccr,
        source_current=isrc,
    )
    try:
        validate_spec(spec)
    except SpecError as exc:
        bad.extend((f"{where}.{n}", m) for n, m in exc.violations)
        return None
    if margin is None:
        margin = DEFAULT_CONTINUITY_MARGIN
    elif margin < 1:
        bad.append((f"{where}.continuity_margin", f"must be >= 1, got {margin!r}"))
        return None
    for count, esr, label in ((topology.n_inductors, parasitics.inductor_esr, "r_l_ohms"),
                              (topology.n_capacitors, parasitics.capacitor_esr, "r_c_ohms")):
        if len(esr) not in (1, count):
            bad.append((f"{where}.parasitics.{label}", f"give 1 or {count} values, got {len(esr)}"))
            return None
    return StageEntry(spec=spec, parasitics=parasitics, has_parasitics=has_par, continuity_margin=margin)


def parse_sim(obj, bad) -> SimConfig:
    if not isinstance(obj, dict):
        bad.append(("sim", "expected an object"))
        return SimConfig()
    _unknown(obj, SIM_KEYS, "sim", bad)
    kw = {}
    for key in ("steps_per_period", "max_cycles"):
        if key in obj:
            v = obj[key]
            if isinstance(v, bool) or not isinstance(v, int):
                bad.append((f"sim.{key}", f"expected an integer, got {v!r}"))
            else:
                kw[key] = v
    if "steady_state_tol" in obj:
        v = _number(obj["steady_state_tol"], "sim.steady_state_tol", bad)
        if v is not None:
            kw["steady_state_tol"] = v
    if "accelerate" in obj:
        if not isinstance(obj["accelerate"], bool):
            bad.append(("sim.accelerate", "expected true or false"))
        else:
            kw["accelerate"] = obj["accelerate"]
    try:
        return SimConfig(**kw)
    except ValueError as exc:
        bad.append(("sim", str(exc)))
        return SimConfig()


def parse_document(data) -> SpecDocument:
    """Validate an already-decoded JSON value. Raises SpecError listing every problem."""
    bad = []
    if not isinstance(data, dict):
        raise SpecError([("", "top level must be an object")])
    _unknown(data, TOP_KEYS, "", bad)
    stages_raw = data.get("stages")
    stages = []
    if not isinstance(stages_raw, list) or not stages_raw:
        bad.append(("stages", "must be a non-empty array"))
    else:
        for i, obj in enumerate(stages_raw):
            entry = parse_stage(obj, f"stages[{i}]", bad)
            if entry is not None:
                stages.append(entry)
    sim = parse_sim(data.get("sim", {}), bad)
    if bad:
        raise SpecError(bad)
    return SpecDocument(stages=tuple(stages), sim=sim)


def loads(text: str) -> SpecDocument:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, exc.lineno, exc.colno) from None
    return parse_document(data)


def load(path) -> SpecDocument:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
