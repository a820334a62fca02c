"""Command-line front end.

Exit codes: 0 success, 1 spec parse error, 2 validation or semantic error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import report as rpt
from .cascade import compose, evaluate, evaluate_stage
from .circuit import build_stage_circuit
from .losses import stage_losses
from .measure import waveform_power, waveform_power_factor, waveform_stats
from .quantities import SpecError
from .simulator import WaveformSet, run_cycles, run_to_steady_state, signal_names
from .sizing import design_stage
from .specdoc import PARASITIC_KEYS, SIM_KEYS, STAGE_KEYS, SpecParseError, parse_document

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2, 3
THREADS_ENV = "CONVERTER_FORGE_THREADS"
DEFAULT_TRANSIENT_CYCLES = 50
DEFAULT_SWEEP_METRICS = ("mean:v_out", "p2p:v_out", "mode")
OVERRIDE_KEYS = ("l_scale", "duty")


def _diag(level, msg):
    print(f"{level}: {msg}", file=sys.stderr)


class CliError(Exception):
    def __init__(self, msg, code=EXIT_INVALID):
        super().__init__(msg)
        self.code = code


def _read_raw(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_PARSE) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, exc.lineno, exc.colno) from None


def _emit(text: str, out_path=None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _stage_index(doc, stage):
    n = len(doc.stages)
    if not 1 <= stage <= n:
        raise CliError(f"--stage {stage} out of range: spec has {n} stage(s), numbered 1..{n}")
    return stage - 1


def _design(entry):
    return design_stage(entry.spec, margin=entry.continuity_margin)


def _si(value, unit):
    for scale, prefix in ((1e-6, "µ"), (1e-3, "m"), (1.0, "")):
        if abs(value) < scale * 1000 or scale == 1.0:
            return f"{value / scale:.4g} {prefix}{unit}"
    return f"{value:.4g} {unit}"


def format_design_table(doc, designs) -> str:
    lines = []
    for k, (entry, d) in enumerate(zip(doc.stages, designs), start=1):
        s = entry.spec
        lines.append(f"Stage {k}: {s.topology.value}  {s.source_voltage:g} V -> {s.output_voltage:g} V "
                     f"@ {s.output_current:g} A, f = {s.switching_frequency / 1e3:g} kHz")
        rows = [("duty", f"{d.duty:.4f}"), ("period", _si(d.period, "s")), ("R load", f"{d.load_resistance:.4g} Ω")]
        for ind in d.inductances:
            rows.append((f"{ind.name} (min / selected)", f"{_si(ind.l_min, 'H')} / {_si(ind.l_selected, 'H')}"))
        for cap in d.capacitances:
            rows.append((f"{cap.name} (ripple {_si(cap.ripple_budget_abs, 'V')})", _si(cap.c, "F")))
        if d.current_bounds is not None:
            cb = d.current_bounds
            rows.append(("I_L avg / max / min", f"{cb.i_l_avg:.4g} / {cb.i_max:.4g} / {cb.i_min:.4g} A"))
        width = max(len(r[0]) for r in rows)
        lines.extend(f"  {name.ljust(width)}  {val}" for name, val in rows)
        lines.append("")
    return "\n".join(lines)


def cmd_design(args) -> int:
    doc = parse_document(_read_raw(args.spec))
    designs = [_design(e) for e in doc.stages]
    if args.pretty:
        _emit(format_design_table(doc, designs), args.out)
    else:
        body = {"stages": [{"stage": k, "topology": e.spec.topology.value, **rpt.design_to_dict(d)}
                           for k, (e, d) in enumerate(zip(doc.stages, designs), start=1)]}
        _emit(rpt.dumps(body), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = parse_document(_read_raw(args.spec))
    idx = _stage_index(doc, args.stage)
    entry = doc.stages[idx]
    design = _design(entry)
    circuit = build_stage_circuit(design, entry.spec, entry.parasitics)
    cycles = args.cycles
    converged, mode, n_run = True, None, None

    if args.full_transient:
        n = cycles or DEFAULT_TRANSIENT_CYCLES
        wf, _, flags = run_cycles(circuit, n, doc.sim)
        mode = "DCM" if flags[-1] else "CCM"
        n_run = n
        last = wf.cycle(-1)
    else:
        res = run_to_steady_state(circuit, doc.sim)
        converged, mode, n_run = res.converged, res.conduction_mode, res.cycles_run
        last = res.waveforms
        if cycles and cycles > 1:
            wf, _, _ = run_cycles(circuit, cycles - 1, doc.sim, x0=res.final_state)
            wf.t = wf.t + res.waveforms.t[-1]
            wf = _join(res.waveforms, wf)
        else:
            wf = res.waveforms

    if args.csv:
        wf.write_csv(args.csv)
    rep = measurements(last)
    body = {
        "stage": idx + 1,
        "topology": entry.spec.topology.value,
        "cycles_run": n_run,
        "converged": converged,
        "conduction_mode": mode,
        "csv": args.csv,
        **rep,
    }
    _emit(rpt.dumps(body), args.out)
    if not converged:
        _diag("error", f"stage {idx + 1} did not reach steady state within {doc.sim.max_cycles} cycles; "
                       "written data are partial")
        return EXIT_NONCONVERGED
    return EXIT_OK


def _join(a, b):
    """Concatenate two recordings that share the boundary sample."""
    n = len(a) - 1
    return WaveformSet(
        dt=a.dt,
        t=np.concatenate([a.t[:-1], b.t]),
        signals={k: np.concatenate([a.signals[k][:-1], b.signals[k]]) for k in a.signals},
        units=a.units,
        cycle_boundaries=a.cycle_boundaries[:-1] + [n + c for c in b.cycle_boundaries],
        configs=np.concatenate([a.configs[:-1], b.configs]),
        ends={k: np.concatenate([a.ends[k], b.ends[k]]) for k in a.ends},
    )


def measurements(wf) -> dict:
    rows = [{"signal": name, "unit": wf.units[name], **waveform_stats(wf, name).as_dict()} for name in wf.signals]
    out = {"measurements": rows}
    if "v_out" in wf.signals and "i_out" in wf.signals:
        out["measured_output_power_w"] = abs(waveform_power(wf, "v_out", "i_out"))
    if "v_sw" in wf.signals and "i_sw" in wf.signals:
        out["switch_average_power_w"] = waveform_power(wf, "v_sw", "i_sw")
        try:
            out["switch_power_factor"] = waveform_power_factor(wf, "v_sw", "i_sw")
        except ValueError:
            out["switch_power_factor"] = None
    return out


def cmd_losses(args) -> int:
    doc = parse_document(_read_raw(args.spec))
    indices = [_stage_index(doc, args.stage)] if args.stage is not None else range(len(doc.stages))
    rows = []
    for i in indices:
        entry = doc.stages[i]
        if not entry.has_parasitics:
            _diag("warning", f"stage {i + 1} has no parasitics block; using the ideal set")
        design = _design(entry)
        b = stage_losses(entry.spec, design, entry.parasitics)
        rows.append({"stage": i + 1, "topology": entry.spec.topology.value, "duty": design.duty,
                     **rpt.losses_to_dict(b, entry.spec.output_current, design.duty)})
    _emit(rpt.dumps({"stages": rows}), args.out)
    return EXIT_OK


def cmd_cascade(args) -> int:
    doc = parse_document(_read_raw(args.spec))
    cas = compose(doc.specs, [e.parasitics for e in doc.stages], [e.continuity_margin for e in doc.stages])
    report = evaluate(cas, doc.sim)
    _emit(rpt.dumps(rpt.cascade_to_dict(report)), args.out)
    bad = [s.index for s in report.stages if s.result is None or not s.result.converged]
    if bad:
        _diag("error", f"stage(s) {', '.join(map(str, bad))} did not reach steady state")
        return EXIT_NONCONVERGED
    return EXIT_OK


def _parse_param(path, raw):
    """Split a sweep path into ``(kind, stage_index, key)``.

    ``stageK.<key>`` addresses a stage field (``parasitics.<key>`` allowed) or
    one of the off-design overrides ``l_scale`` / ``duty``; ``sim.<key>`` a
    simulation setting.
    """
    head, _, rest = path.partition(".")
    if head == "sim" and rest:
        return "sim", None, rest
    if head.startswith("stage") and head[5:].isdigit() and rest:
        k = int(head[5:])
        n = len(raw.get("stages", []))
        if not 1 <= k <= n:
            raise CliError(f"parameter {path!r}: stage {k} out of range 1..{n}")
        if rest in OVERRIDE_KEYS:
            return "override", k - 1, rest
        return "stage", k - 1, rest
    raise CliError(f"unknown parameter path {path!r}; use stageK.<key>, stageK.l_scale, stageK.duty or sim.<key>")


def _check_param(path, kind, key):
    if kind == "sim":
        ok = key in SIM_KEYS - {"accelerate"}
    elif kind == "stage":
        head, _, sub = key.partition(".")
        ok = sub in PARASITIC_KEYS if head == "parasitics" else key in STAGE_KEYS - {"topology", "parasitics"}
    else:
        ok = True
    if not ok:
        raise CliError(f"unknown parameter path {path!r}: not a numeric spec field")


def _set_value(raw, kind, k, key, value):
    raw = copy.deepcopy(raw)
    if kind == "sim":
        sim = raw.setdefault("sim", {})
        sim[key] = int(round(value)) if key in ("steps_per_period", "max_cycles") else value
        return raw
    stage = raw["stages"][k]
    if key.startswith("parasitics."):
        stage.setdefault("parasitics", {})[key.split(".", 1)[1]] = value
    else:
        stage[key] = value
    return raw


def _metric(name, rep):
    res = rep.result
    if name == "mode":
        return res.conduction_mode if res else "error"
    if name == "converged":
        return bool(res and res.converged)
    if name == "cycles":
        return res.cycles_run if res else ""
    if name == "efficiency":
        return rep.losses.efficiency
    if name == "duty":
        return rep.design.duty
    stat, _, signal = name.partition(":")
    if res is None:
        return ""
    st = rep.stats[signal]
    return {"mean": st.mean, "rms": st.rms, "p2p": st.peak_to_peak, "min": st.min, "max": st.max}[stat]


def _sweep_point(job):
    raw, kind, k, key, value, stage_idx, metrics = job
    overrides = {}
    if kind == "override":
        overrides[key] = value
    else:
        raw = _set_value(raw, kind, k, key, value)
    doc = parse_document(raw)
    entry = doc.stages[stage_idx]
    design = _design(entry)
    kw = {}
    if "l_scale" in overrides:
        kw["inductances"] = [overrides["l_scale"] * ind.l_min for ind in design.inductances]
    if "duty" in overrides:
        kw["duty"] = overrides["duty"]
    rep = evaluate_stage(entry.spec, design, entry.parasitics, doc.sim, index=stage_idx + 1, **kw)
    return [_metric(m, rep) for m in metrics]


def _check_metric(name, signals):
    if name in ("mode", "converged", "cycles", "efficiency", "duty"):
        return
    stat, sep, signal = name.partition(":")
    if not sep or stat not in ("mean", "rms", "p2p", "min", "max") or not signal:
        raise CliError(f"unknown metric {name!r}; use mode, converged, cycles, efficiency, duty or <stat>:<signal>")
    if signal not in signals:
        raise CliError(f"metric {name!r}: no signal {signal!r}; available: {', '.join(signals)}")


def _workers(n_points):
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise CliError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_points))


def cmd_sweep(args) -> int:
    raw = _read_raw(args.spec)
    doc = parse_document(raw)
    kind, k, key = _parse_param(args.param, raw)
    _check_param(args.param, kind, key)
    if args.points < 1:
        raise CliError("--points must be >= 1")
    stage = args.stage if args.stage is not None else (k + 1 if k is not None else 1)
    stage_idx = _stage_index(doc, stage)
    metrics = list(args.metric) if args.metric else list(DEFAULT_SWEEP_METRICS)
    entry = doc.stages[stage_idx]
    signals = signal_names(build_stage_circuit(_design(entry), entry.spec, entry.parasitics))
    for m in metrics:
        _check_metric(m, signals)
    values = [args.start] if args.points == 1 else list(np.linspace(args.start, args.stop, args.points))
    jobs = [(raw, kind, k, key, float(v), stage_idx, metrics) for v in values]
    # surface bad paths and values before fanning out
    if kind != "override":
        parse_document(_set_value(raw, kind, k, key, float(values[0])))

    workers = _workers(len(jobs))
    if workers == 1:
        results = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([args.param] + metrics)
        for v, row in zip(values, results):
            w.writerow([_fmt(v)] + [_fmt(x) for x in row])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10g}"
    return str(x)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="converter-forge",
                                description="Size, loss-model and simulate SEPIC / inverting buck-boost stages.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="size every stage")
    d.add_argument("spec")
    d.add_argument("--out")
    d.add_argument("--pretty", action="store_true", help="aligned table instead of JSON")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="simulate one stage to steady state")
    s.add_argument("spec")
    s.add_argument("--stage", type=int, default=1, help="1-based stage number (default 1)")
    s.add_argument("--csv", help="write waveforms here")
    s.add_argument("--cycles", type=int, help="cycles to write (default 1, or %d with --full-transient)"
                   % DEFAULT_TRANSIENT_CYCLES)
    s.add_argument("--full-transient", action="store_true", help="write the start-up transient from t = 0")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    lo = sub.add_parser("losses", help="closed-form loss breakdown")
    lo.add_argument("spec")
    lo.add_argument("--stage", type=int, help="1-based stage number (default: all)")
    lo.add_argument("--out")
    lo.set_defaults(func=cmd_losses)

    c = sub.add_parser("cascade", help="evaluate the whole chain")
    c.add_argument("spec")
    c.add_argument("--out")
    c.set_defaults(func=cmd_cascade)

    w = sub.add_parser("sweep", help="sweep one parameter and tabulate metrics")
    w.add_argument("spec")
    w.add_argument("--param", required=True, help="stageK.<key>, stageK.l_scale, stageK.duty or sim.<key>")
    w.add_argument("--from", dest="start", type=float, required=True)
    w.add_argument("--to", dest="stop", type=float, required=True)
    w.add_argument("--points", type=int, default=11)
    w.add_argument("--stage", type=int, help="stage to simulate (default: the swept stage)")
    w.add_argument("--metric", action="append", help="mode, converged, cycles, efficiency, duty or stat:signal")
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecParseError as exc:
        print(f"error: {args.spec}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SpecError as exc:
        for name, msg in exc.violations:
            print(f"error: {name}: {msg}" if name else f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
