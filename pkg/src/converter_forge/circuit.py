"""Piecewise-affine state-space models of the supported converter stages.

Each stage has three configurations:

* ``ON``    gate on, diode blocking
* ``DIODE`` gate off, diode conducting
* ``IDLE``  gate off, diode blocking (discontinuous conduction)

Inside one configuration the dynamics are ``dx/dt = A x + b`` and every
branch quantity is an affine map of the state. The branch equations are
written out once per topology (``sepic_circuit`` / ``buckboost_circuit``) and the
matrices are read off them by probing with unit vectors, which is exact
because the equations are affine.

Sign conventions
----------------
SEPIC, state ``[i_L1, i_L2, v_C1, v_C2]``: ``i_L1`` flows from the source into
the switch node, ``i_L2`` flows from ground up into the diode anode, so both
are positive in normal operation and the diode carries ``i_L1 + i_L2``.

Inverting buck-boost, state ``[i_L, v_C]``: ``i_L`` flows from the switch node
to ground and ``v_C`` (hence ``v_out``) is negative in normal operation.

Capacitor ESR sits in series with each capacitor; the output voltage includes
the ESR drop. The diode is an ideal switch in series with ``Vf`` and ``Rf``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .quantities import DesignResult, ParasiticSet, SpecError, StageSpec, Topology, validate_spec


class Config(enum.IntEnum):
    ON = 0
    DIODE = 1
    IDLE = 2


@dataclass(frozen=True)
class Configuration:
    id: Config
    gate_on: bool
    diode_conducting: bool
    A: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class OutputMap:
    """Affine map ``y = rows[cfg] @ x + offsets[cfg]`` for one branch quantity."""

    rows: np.ndarray
    offsets: np.ndarray
    unit: str

    def __call__(self, x, cfg) -> float:
        return float(self.rows[cfg] @ x + self.offsets[cfg])

    def apply(self, states: np.ndarray, cfgs: np.ndarray) -> np.ndarray:
        """Evaluate on a trajectory: ``states`` is (n, n_state), ``cfgs`` (n,)."""
        return np.einsum("ij,ij->i", self.rows[cfgs], states) + self.offsets[cfgs]


@dataclass(frozen=True)
class SwitchedCircuit:
    topology: Optional[Topology]
    state_labels: tuple[str, ...]
    state_units: tuple[str, ...]
    configurations: tuple[Configuration, ...]
    output_maps: dict
    parasitics: ParasiticSet
    duty: float
    period: float
    source_voltage: float
    load_resistance: float
    # inductor states whose sum the blocking diode forces to zero in IDLE
    pinned: tuple[int, ...]
    # element values in state order, used for stored-energy bookkeeping
    storage: tuple[float, ...] = field(default=())

    @property
    def n_states(self) -> int:
        return len(self.state_labels)

    def config(self, cfg) -> Configuration:
        return self.configurations[int(cfg)]

    def derivative(self, x, cfg) -> np.ndarray:
        c = self.configurations[int(cfg)]
        return c.A @ x + c.b

    def stored_energy(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(np.dot(self.storage, x * x))


def _probe(evaluate: Callable, n: int, sources: dict) -> tuple[list[Configuration], dict]:
    """Read A, b and output maps off an affine evaluator.

    ``evaluate(cfg, x, **sources)`` returns ``(dxdt, outputs)``. Columns of A
    come from unit states with every source zeroed; b and the output offsets
    from the zero state with the real sources.
    """
    zero_src = {k: 0.0 for k in sources}
    configs = []
    rows: dict[str, np.ndarray] = {}
    offsets: dict[str, np.ndarray] = {}
    units: dict[str, str] = {}
    for cfg in Config:
        b, outs0 = evaluate(cfg, np.zeros(n), **sources)
        A = np.zeros((n, n))
        out_cols: dict[str, np.ndarray] = {name: np.zeros(n) for name in outs0}
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            dx, outs = evaluate(cfg, e, **zero_src)
            A[:, j] = dx
            for name, (val, _) in outs.items():
                out_cols[name][j] = val
        configs.append(Configuration(
            id=cfg,
            gate_on=cfg is Config.ON,
            diode_conducting=cfg is Config.DIODE,
            A=A,
            b=np.asarray(b, dtype=float),
        ))
        for name, (val, unit) in outs0.items():
            rows.setdefault(name, np.zeros((len(Config), n)))[cfg] = out_cols[name]
            offsets.setdefault(name, np.zeros(len(Config)))[cfg] = val
            units[name] = unit
    maps = {name: OutputMap(rows[name], offsets[name], units[name]) for name in rows}
    return configs, maps


def sepic_circuit(L1, L2, C1, C2, R, Vs, parasitics: ParasiticSet = ParasiticSet(),
                  duty=0.5, period=1e-5) -> SwitchedCircuit:
    """SEPIC model from raw element values (no validation of the operating point)."""
    p = parasitics
    r1, r2 = p.r_l(0), p.r_l(1)
    rc1, rc2 = p.r_c(0), p.r_c(1)
    rs, Rf = p.switch_on_resistance, p.diode_series_resistance
    k = R / (R + rc2)

    def evaluate(cfg, x, Vs, Vf):
        i1, i2, v1, v2 = x
        if cfg is Config.ON:
            i_sw, i_d = i1 + i2, 0.0
            ic1 = -i2
            v_a = rs * i_sw
            v_b = v_a - v1 - rc1 * ic1
            v_o = k * v2
            vL1 = Vs - v_a - r1 * i1
            vL2 = -v_b - r2 * i2
            i_src = i1
        elif cfg is Config.DIODE:
            i_sw, i_d = 0.0, i1 + i2
            ic1 = i1
            v_o = k * (v2 + rc2 * i_d)
            v_b = v_o + Vf + Rf * i_d
            v_a = v_b + v1 + rc1 * ic1
            vL1 = Vs - v_a - r1 * i1
            vL2 = -v_b - r2 * i2
            i_src = i1
        else:
            # L1 and L2 form one series loop through the source and C1; i_L1 = -i_L2
            i_sw, i_d = 0.0, 0.0
            i_loop = 0.5 * (i1 - i2)
            v_loop = Vs - v1 - (r1 + rc1 + r2) * i_loop
            di = v_loop / (L1 + L2)
            vL1, vL2 = L1 * di, -L2 * di
            ic1 = i_loop
            v_a = Vs - vL1 - r1 * i_loop
            v_b = v_a - v1 - rc1 * ic1
            v_o = k * v2
            i_src = i_loop
        ic2 = i_d - v_o / R
        dx = np.array([vL1 / L1, vL2 / L2, ic1 / C1, ic2 / C2])
        outs = {
            "v_out": (v_o, "V"),
            "i_out": (v_o / R, "A"),
            "i_sw": (i_sw, "A"),
            "v_sw": (v_a, "V"),
            "i_D": (i_d, "A"),
            "v_D": (v_b - v_o, "V"),
            "i_source": (i_src, "A"),
            "v_L1": (vL1, "V"),
            "v_L2": (vL2, "V"),
            "i_C1": (ic1, "A"),
            "i_C2": (ic2, "A"),
            "i_C_out": (ic2, "A"),
        }
        return dx, outs

    configs, maps = _probe(evaluate, 4, {"Vs": Vs, "Vf": p.diode_forward_voltage})
    return SwitchedCircuit(
        topology=Topology.SEPIC,
        state_labels=("i_L1", "i_L2", "v_C1", "v_C2"),
        state_units=("A", "A", "V", "V"),
        configurations=tuple(configs),
        output_maps=maps,
        parasitics=p,
        duty=duty,
        period=period,
        source_voltage=Vs,
        load_resistance=R,
        pinned=(0, 1),
        storage=(L1, L2, C1, C2),
    )


def buckboost_circuit(L, C, R, Vs, parasitics: ParasiticSet = ParasiticSet(),
                      duty=0.5, period=1e-5) -> SwitchedCircuit:
    """Inverting buck-boost model from raw element values."""
    p = parasitics
    rL, rc = p.r_l(0), p.r_c(0)
    rs, Rf = p.switch_on_resistance, p.diode_series_resistance
    k = R / (R + rc)

    def evaluate(cfg, x, Vs, Vf):
        i, v = x
        if cfg is Config.ON:
            i_sw, i_d = i, 0.0
            v_x = Vs - rs * i
            vL = v_x - rL * i
            v_o = k * v
            i_src = i
        elif cfg is Config.DIODE:
            i_sw, i_d = 0.0, i
            v_o = k * (v - rc * i)
            v_x = v_o - Vf - Rf * i
            vL = v_x - rL * i
            i_src = 0.0
        else:
            # inductor current pinned at zero while the diode blocks
            i_sw, i_d = 0.0, 0.0
            vL = 0.0 * i
            v_x = rL * i
            v_o = k * v
            i_src = 0.0
        ic = -i_d - v_o / R
        dx = np.array([vL / L, ic / C])
        outs = {
            "v_out": (v_o, "V"),
            "i_out": (-v_o / R, "A"),
            "i_sw": (i_sw, "A"),
            "v_sw": (Vs - v_x, "V"),
            "i_D": (i_d, "A"),
            "v_D": (v_o - v_x, "V"),
            "i_source": (i_src, "A"),
            "v_L": (vL, "V"),
            "i_C": (ic, "A"),
            "i_C_out": (ic, "A"),
        }
        return dx, outs

    configs, maps = _probe(evaluate, 2, {"Vs": Vs, "Vf": p.diode_forward_voltage})
    return SwitchedCircuit(
        topology=Topology.INVERTING_BUCK_BOOST,
        state_labels=("i_L", "v_C"),
        state_units=("A", "V"),
        configurations=tuple(configs),
        output_maps=maps,
        parasitics=p,
        duty=duty,
        period=period,
        source_voltage=Vs,
        load_resistance=R,
        pinned=(0,),
        storage=(L, C),
    )


def build_stage_circuit(design: DesignResult, spec: StageSpec,
                        parasitics: ParasiticSet = ParasiticSet(), *,
                        inductances: Optional[Sequence[float]] = None,
                        duty: Optional[float] = None) -> SwitchedCircuit:
    """Circuit for a designed stage.

    ``inductances`` and ``duty`` override the sized values for off-design
    studies (e.g. running below the continuity bound).
    """
    validate_spec(spec)
    ls = list(inductances) if inductances is not None else [i.l_selected for i in design.inductances]
    cs = [c.c for c in design.capacitances]
    D = design.duty if duty is None else duty
    if not 0.0 < D < 1.0:
        raise SpecError([("duty", f"must lie in (0, 1), got {D!r}")])
    if any(not v > 0 for v in ls + cs):
        raise SpecError([("design", "inductances and capacitances must be > 0")])
    R, Vs, T = design.load_resistance, spec.source_voltage, design.period

    if spec.topology is Topology.SEPIC:
        if len(ls) != 2 or len(cs) != 2:
            raise SpecError([("design", "SEPIC needs two inductors and two capacitors")])
        return sepic_circuit(ls[0], ls[1], cs[0], cs[1], R, Vs, parasitics, D, T)
    if spec.topology is Topology.INVERTING_BUCK_BOOST:
        if len(ls) != 1 or len(cs) != 1:
            raise SpecError([("design", "buck-boost needs one inductor and one capacitor")])
        return buckboost_circuit(ls[0], cs[0], R, Vs, parasitics, D, T)
    raise SpecError([("topology", f"unsupported topology {spec.topology!r}")])


def branch_currents(circuit: SwitchedCircuit, state, config_id) -> dict:
    x = np.asarray(state, dtype=float)
    if x.shape != (circuit.n_states,):
        raise ValueError(f"state has shape {x.shape}, circuit expects ({circuit.n_states},)")
    cfg = Config(config_id)
    m = circuit.output_maps
    return {name: m[name](x, cfg) for name in ("i_sw", "i_D", "i_C_out", "v_out")}


def configuration_transition(circuit: SwitchedCircuit, state, gate: bool) -> Config:
    """Active configuration for ``state`` under the given gate signal.

    With the gate off the diode conducts only if the current it would carry
    is strictly positive.
    """
    if gate:
        return Config.ON
    if circuit.output_maps["i_D"](np.asarray(state, dtype=float), Config.DIODE) > 0:
        return Config.DIODE
    return Config.IDLE
