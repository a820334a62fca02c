"""Fixed-step transient simulation of a SwitchedCircuit to periodic steady state.

Integration is classical RK4 on the active configuration's affine dynamics.
Gate edges are snapped to the step grid; a diode turning off inside a step is
located by bisection to ``dt/1024``.

Because each configuration is affine, ``RK4(x, h) = P x + q`` for a fixed
``(P, q)``. ``step`` applies the textbook four-stage formula one step at a
time; the cycle engine used by ``run_to_steady_state`` tabulates powers of
``(P, q)`` so a whole cycle costs a handful of vectorised operations. The two
routes agree to rounding error (checked in the test suite).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circuit import Config, SwitchedCircuit, configuration_transition

BISECTION_DIVISOR = 1024


class SimulationDiverged(RuntimeError):
    def __init__(self, t: float):
        self.t = t
        super().__init__(f"state became non-finite at t = {t:.6g} s")


@dataclass(frozen=True)
class SimConfig:
    steps_per_period: int = 2000
    max_cycles: int = 20000
    steady_state_tol: float = 1e-6
    record: Optional[tuple[str, ...]] = None
    accelerate: bool = True

    def __post_init__(self):
        if int(self.steps_per_period) != self.steps_per_period or self.steps_per_period < 100:
            raise ValueError(f"steps_per_period must be an integer >= 100, got {self.steps_per_period!r}")
        if int(self.max_cycles) != self.max_cycles or self.max_cycles < 1:
            raise ValueError(f"max_cycles must be a positive integer, got {self.max_cycles!r}")
        if not self.steady_state_tol > 0:
            raise ValueError(f"steady_state_tol must be > 0, got {self.steady_state_tol!r}")
        if self.record is not None:
            object.__setattr__(self, "record", tuple(self.record))


def duty_schedule(D: float, T: float, t: float) -> bool:
    """Gate is on for ``t mod T`` in ``[0, D*T)``."""
    return math.fmod(t, T) % T < D * T


def rk4_step(A: np.ndarray, b: np.ndarray, x: np.ndarray, h: float) -> np.ndarray:
    k1 = A @ x + b
    k2 = A @ (x + 0.5 * h * k1) + b
    k3 = A @ (x + 0.5 * h * k2) + b
    k4 = A @ (x + h * k3) + b
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_affine_map(A: np.ndarray, b: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``(P, q)`` with ``rk4_step(A, b, x, h) == P @ x + q`` for every ``x``."""
    n = A.shape[0]
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    P = np.eye(n) + hA + hA2 / 2.0 + hA3 / 6.0 + hA3 @ hA / 24.0
    q = h * (np.eye(n) + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ b
    return P, q


def project_idle(circuit: SwitchedCircuit, x: np.ndarray) -> np.ndarray:
    """Force the blocked diode current to exactly zero.

    SEPIC: ``i_L1 = -i_L2``; buck-boost: ``i_L = 0``. Works on a single state
    or on a stack of states (last axis).
    """
    x = np.array(x, dtype=float, copy=True)
    pinned = circuit.pinned
    if len(pinned) == 1:
        x[..., pinned[0]] = 0.0
    elif len(pinned) == 2:
        i, j = pinned
        # written as +a / -a so the pair sums to exactly zero in floating point
        a = 0.5 * (x[..., i] - x[..., j])
        x[..., i] = a
        x[..., j] = -a
    return x


def _diode_current(circuit, x) -> float:
    return circuit.output_maps["i_D"](x, Config.DIODE)


def _diode_turnoff(circuit: SwitchedCircuit, x: np.ndarray, dt: float) -> tuple[float, np.ndarray]:
    """Bisect the diode zero crossing inside a step that starts conducting.

    Returns ``(tau, state_at_tau)`` with ``tau`` the first bracket end at
    which the diode current is no longer positive.
    """
    cfg = circuit.config(Config.DIODE)
    lo, hi = 0.0, dt
    x_hi = rk4_step(cfg.A, cfg.b, x, hi)
    while hi - lo > dt / BISECTION_DIVISOR:
        mid = 0.5 * (lo + hi)
        x_mid = rk4_step(cfg.A, cfg.b, x, mid)
        if _diode_current(circuit, x_mid) > 0:
            lo = mid
        else:
            hi, x_hi = mid, x_mid
    return hi, x_hi


def step(circuit: SwitchedCircuit, state, t: float, dt: float) -> np.ndarray:
    """Advance ``state`` from ``t`` to ``t + dt``.

    The gate is sampled at the step midpoint, which snaps the switching edge
    to the nearest grid point.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    with np.errstate(invalid="ignore", over="ignore"):
        x = np.asarray(state, dtype=float)
        gate = duty_schedule(circuit.duty, circuit.period, t + 0.5 * dt)
        cfg = configuration_transition(circuit, x, gate)
        if cfg is Config.ON:
            c = circuit.config(Config.ON)
            out = rk4_step(c.A, c.b, x, dt)
        elif cfg is Config.IDLE:
            c = circuit.config(Config.IDLE)
            out = project_idle(circuit, rk4_step(c.A, c.b, project_idle(circuit, x), dt))
        else:
            c = circuit.config(Config.DIODE)
            out = rk4_step(c.A, c.b, x, dt)
            if not _diode_current(circuit, out) > 0:
                tau, x_tau = _diode_turnoff(circuit, x, dt)
                idle = circuit.config(Config.IDLE)
                x_tau = project_idle(circuit, x_tau)
                out = project_idle(circuit, rk4_step(idle.A, idle.b, x_tau, dt - tau))
    if not np.all(np.isfinite(out)):
        raise SimulationDiverged(t + dt)
    return out


def gate_on_steps(D: float, T: float, steps_per_period: int) -> int:
    dt = T / steps_per_period
    return sum(duty_schedule(D, T, (k + 0.5) * dt) for k in range(steps_per_period))


@dataclass
class WaveformSet:
    """Uniformly sampled signals. ``configs`` holds the configuration index
    active on the interval starting at each sample.

    ``ends[name][k]`` is the signal at sample ``k + 1`` evaluated in the
    configuration of interval ``k``, i.e. its left-hand limit there. It
    differs from ``signals[name][k + 1]`` only across a switching instant.
    """

    dt: float
    t: np.ndarray
    signals: dict
    units: dict
    cycle_boundaries: list
    configs: np.ndarray
    ends: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, name) -> np.ndarray:
        return self.signals[name]

    def cycle(self, index: int = -1) -> "WaveformSet":
        """One whole period (both endpoints) as its own WaveformSet."""
        starts = self.cycle_boundaries
        n = len(starts) - 1
        if n < 1:
            raise ValueError("waveform holds no complete cycle")
        i = index % n
        a, b = starts[i], starts[i + 1] + 1
        return WaveformSet(
            dt=self.dt,
            t=self.t[a:b],
            signals={k: v[a:b] for k, v in self.signals.items()},
            units=dict(self.units),
            cycle_boundaries=[0, b - a - 1],
            configs=self.configs[a:b],
            ends={k: v[a:b - 1] for k, v in self.ends.items()},
        )

    def write_csv(self, path_or_file, names: Optional[Sequence[str]] = None) -> None:
        names = list(names) if names is not None else list(self.signals)
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"{n} ({self.units[n]})" for n in names])
            cols = [self.t] + [self.signals[n] for n in names]
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])
        finally:
            if own:
                fh.close()


def read_waveform_csv(path) -> tuple[np.ndarray, dict]:
    """Parse a CSV written by ``WaveformSet.write_csv`` into ``(t, signals)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    names = [h.rsplit(" (", 1)[0] for h in header[1:]]
    return data[:, 0], {n: data[:, i + 1] for i, n in enumerate(names)}


@dataclass
class SimResult:
    waveforms: WaveformSet
    cycles_run: int
    converged: bool
    conduction_mode: str
    final_state: np.ndarray
    final_change: float = math.nan


def projection_matrix(circuit: SwitchedCircuit) -> np.ndarray:
    return project_idle(circuit, np.eye(circuit.n_states)).T


@dataclass
class CycleOutcome:
    x_end: np.ndarray
    entered_idle: bool
    states: Optional[np.ndarray] = None
    cfgs: Optional[np.ndarray] = None
    # affine cycle map x_end = M x0 + m with the switching instants of this cycle frozen
    M: Optional[np.ndarray] = None
    m: Optional[np.ndarray] = None


def _compose(outer, inner):
    """Affine composition ``outer(inner(x))`` of ``(M, m)`` pairs."""
    Mo, mo = outer
    Mi, mi = inner
    return Mo @ Mi, Mo @ mi + mo


class CycleEngine:
    """Precomputed per-configuration step tables for one circuit and grid."""

    def __init__(self, circuit: SwitchedCircuit, steps_per_period: int):
        self.circuit = circuit
        self.N = int(steps_per_period)
        self.dt = circuit.period / self.N
        self.n_on = gate_on_steps(circuit.duty, circuit.period, self.N)
        self.proj = projection_matrix(circuit)
        n = circuit.n_states
        self.tables = {}
        for cfg in Config:
            c = circuit.config(cfg)
            P, q = rk4_affine_map(c.A, c.b, self.dt)
            Pk = np.empty((self.N + 1, n, n))
            Qk = np.empty((self.N + 1, n))
            Pk[0], Qk[0] = np.eye(n), 0.0
            for k in range(self.N):
                Pk[k + 1] = P @ Pk[k]
                Qk[k + 1] = P @ Qk[k] + q
            self.tables[cfg] = (Pk, Qk)
        m = self.N - self.n_on
        imap = circuit.output_maps["i_D"]
        Pd, Qd = self.tables[Config.DIODE]
        c_row, c_off = imap.rows[Config.DIODE], imap.offsets[Config.DIODE]
        # diode current along an uninterrupted off-interval, as an affine map of its start state
        self._id_G = np.einsum("j,kjl->kl", c_row, Pd[: m + 1])
        self._id_g = Qd[: m + 1] @ c_row + c_off

    def _table(self, cfg, k):
        Pk, Qk = self.tables[cfg]
        return Pk[k], Qk[k]

    def _trajectory(self, cfg, x, count):
        Pk, Qk = self.tables[cfg]
        return Pk[: count + 1] @ x + Qk[: count + 1]

    def advance(self, x0: np.ndarray, record: bool = False, with_map: bool = False) -> CycleOutcome:
        """Integrate one period from ``x0``.

        With ``record`` the N+1 samples of the period and the configuration
        of each sample interval are returned; with ``with_map`` the affine
        map of this cycle (switching instants held fixed) is returned too.
        """
        c = self.circuit
        N, n_on = self.N, self.n_on
        m = N - n_on
        n = c.n_states
        proj = (self.proj, np.zeros(n))
        states, labels = [], []

        cmap = self._table(Config.ON, n_on)
        if record:
            seg = self._trajectory(Config.ON, x0, n_on)
            x_sw = seg[-1]
            states.append(seg[:-1])
            labels.append(np.full(n_on, Config.ON, dtype=np.int8))
        else:
            x_sw = cmap[0] @ x0 + cmap[1]

        entered_idle = False
        if m == 0:
            x_end = x_sw
        elif configuration_transition(c, x_sw, False) is Config.IDLE:
            entered_idle = True
            seg = project_idle(c, self._trajectory(Config.IDLE, project_idle(c, x_sw), m))
            x_end = seg[-1]
            if record:
                states.append(seg[:-1])
                labels.append(np.full(m, Config.IDLE, dtype=np.int8))
            if with_map:
                cmap = _compose(proj, _compose(self._table(Config.IDLE, m), _compose(proj, cmap)))
        else:
            i_d = self._id_G @ x_sw + self._id_g
            bad = np.nonzero(i_d[1:] <= 0)[0]
            if bad.size == 0:
                if record:
                    seg = self._trajectory(Config.DIODE, x_sw, m)
                    states.append(seg[:-1])
                    labels.append(np.full(m, Config.DIODE, dtype=np.int8))
                    x_end = seg[-1]
                else:
                    Pd, Qd = self._table(Config.DIODE, m)
                    x_end = Pd @ x_sw + Qd
                if with_map:
                    cmap = _compose(self._table(Config.DIODE, m), cmap)
            else:
                entered_idle = True
                j = int(bad[0]) + 1  # first off-interval sample with non-positive diode current
                seg_d = self._trajectory(Config.DIODE, x_sw, j - 1)
                x_prev = seg_d[-1]
                tau, x_tau = _diode_turnoff(c, x_prev, self.dt)
                idle = c.config(Config.IDLE)
                x_j = project_idle(c, rk4_step(idle.A, idle.b, project_idle(c, x_tau), self.dt - tau))
                seg_i = project_idle(c, self._trajectory(Config.IDLE, x_j, m - j))
                x_end = seg_i[-1]
                if record:
                    states.append(seg_d)
                    labels.append(np.full(j, Config.DIODE, dtype=np.int8))
                    states.append(seg_i[:-1])
                    labels.append(np.full(m - j, Config.IDLE, dtype=np.int8))
                if with_map:
                    dcfg = c.config(Config.DIODE)
                    cmap = _compose(self._table(Config.DIODE, j - 1), cmap)
                    cmap = _compose(rk4_affine_map(dcfg.A, dcfg.b, tau), cmap)
                    cmap = _compose(proj, cmap)
                    cmap = _compose(rk4_affine_map(idle.A, idle.b, self.dt - tau), cmap)
                    cmap = _compose(proj, cmap)
                    cmap = _compose(self._table(Config.IDLE, m - j), cmap)
                    cmap = _compose(proj, cmap)

        if not np.all(np.isfinite(x_end)):
            raise SimulationDiverged(c.period)
        out = CycleOutcome(x_end=x_end, entered_idle=entered_idle)
        if record:
            states.append(x_end[None, :])
            labels.append(np.array([Config.ON], dtype=np.int8))
            out.states = np.vstack(states)
            out.cfgs = np.concatenate(labels)
        if with_map:
            out.M, out.m = cmap
        return out


def _relative_change(x_new, x_old) -> float:
    scale = float(np.max(np.abs(x_new)))
    diff = float(np.max(np.abs(x_new - x_old)))
    if scale == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / scale


def signal_names(circuit: SwitchedCircuit) -> list[str]:
    return list(circuit.state_labels) + [k for k in circuit.output_maps if k not in circuit.state_labels] + ["p_sw"]


def build_waveforms(circuit: SwitchedCircuit, states: np.ndarray, cfgs: np.ndarray, dt: float,
                    t0: float = 0.0, record: Optional[Sequence[str]] = None,
                    cycle_boundaries: Optional[list] = None) -> WaveformSet:
    names = list(record) if record is not None else signal_names(circuit)
    idx = {label: i for i, label in enumerate(circuit.state_labels)}
    cfg_idx = np.asarray(cfgs, dtype=np.intp)
    cache, end_cache = {}, {}

    def get(name):
        if name not in cache:
            if name in idx:
                cache[name] = states[:, idx[name]].copy()
            elif name == "p_sw":
                cache[name] = get("v_sw") * get("i_sw")
            elif name in circuit.output_maps:
                cache[name] = circuit.output_maps[name].apply(states, cfg_idx)
            else:
                raise KeyError(f"unknown signal {name!r}")
        return cache[name]

    def get_end(name):
        # value at each sample as seen from the interval that ends there
        if name not in end_cache:
            if name in idx:
                end_cache[name] = states[1:, idx[name]].copy()
            elif name == "p_sw":
                end_cache[name] = get_end("v_sw") * get_end("i_sw")
            else:
                end_cache[name] = circuit.output_maps[name].apply(states[1:], cfg_idx[:-1])
        return end_cache[name]

    signals, units, ends = {}, {}, {}
    for name in names:
        signals[name] = get(name)
        ends[name] = get_end(name)
        if name in idx:
            units[name] = circuit.state_units[idx[name]]
        elif name == "p_sw":
            units[name] = "W"
        else:
            units[name] = circuit.output_maps[name].unit
    n = len(states)
    t = t0 + dt * np.arange(n)
    if cycle_boundaries is None:
        cycle_boundaries = [0, n - 1]
    return WaveformSet(dt=dt, t=t, signals=signals, units=units,
                       cycle_boundaries=list(cycle_boundaries), configs=np.asarray(cfgs, dtype=np.int8),
                       ends=ends)


def run_cycles(circuit: SwitchedCircuit, n_cycles: int, sim_config: SimConfig = SimConfig(),
               x0=None, record_last: Optional[int] = None):
    """Plain integration of ``n_cycles`` periods from ``x0`` (default: rest).

    Records the final ``record_last`` cycles (default: all of them, i.e. the
    full start-up transient). Returns ``(WaveformSet, final_state, idle_flags)``.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    eng = CycleEngine(circuit, sim_config.steps_per_period)
    x = np.zeros(circuit.n_states) if x0 is None else np.asarray(x0, dtype=float)
    keep_from = 0 if record_last is None else max(0, n_cycles - record_last)
    states, cfgs, bounds, flags = [], [], [0], []
    for k in range(n_cycles):
        rec = k >= keep_from
        out = eng.advance(x, record=rec)
        x = out.x_end
        flags.append(out.entered_idle)
        if rec:
            states.append(out.states[:-1])
            cfgs.append(out.cfgs[:-1])
            bounds.append(bounds[-1] + eng.N)
    states.append(x[None, :])
    cfgs.append(np.array([Config.ON], dtype=np.int8))
    wf = build_waveforms(circuit, np.vstack(states), np.concatenate(cfgs), eng.dt,
                         t0=keep_from * circuit.period, record=sim_config.record,
                         cycle_boundaries=bounds)
    return wf, x, flags


def run_to_steady_state(circuit: SwitchedCircuit, sim_config: SimConfig = SimConfig()) -> SimResult:
    """Integrate whole periods from rest until the period-boundary state stops moving.

    Convergence means the max-norm change of the state over one integrated
    period, relative to the max-norm of the state, is below
    ``steady_state_tol``. The returned waveform is that last integrated
    period. If ``max_cycles`` runs out, the last period comes back with
    ``converged`` False.

    With ``sim_config.accelerate`` each integrated period also yields its
    affine cycle map (switching instants frozen), and the next period starts
    from that map's fixed point. Ideal SEPIC stages have an almost undamped
    coupling-capacitor resonance, so plain repetition alone would need
    millions of periods. The jump is only taken while the cycle-to-cycle
    change keeps shrinking; otherwise the plain next state is used.
    """
    eng = CycleEngine(circuit, sim_config.steps_per_period)
    n = circuit.n_states
    eye = np.eye(n)
    x = np.zeros(n)
    x_start = x
    converged = False
    change = math.inf
    prev_change = math.inf
    cycles = 0
    for cycles in range(1, sim_config.max_cycles + 1):
        x_start = x
        out = eng.advance(x, with_map=sim_config.accelerate)
        change = _relative_change(out.x_end, x_start)
        if change < sim_config.steady_state_tol:
            converged = True
            break
        x = out.x_end
        if sim_config.accelerate and change < prev_change:
            try:
                guess = np.linalg.solve(eye - out.M, out.m)
            except np.linalg.LinAlgError:
                guess = None
            if guess is not None and np.all(np.isfinite(guess)):
                x = guess
        prev_change = change

    final = eng.advance(x_start, record=True)
    wf = build_waveforms(circuit, final.states, final.cfgs, eng.dt,
                         t0=(cycles - 1) * circuit.period, record=sim_config.record)
    return SimResult(waveforms=wf, cycles_run=cycles, converged=converged,
                     conduction_mode="DCM" if final.entered_idle else "CCM",
                     final_state=final.x_end, final_change=change)
