"""Waveform statistics over one sampled period.

Signals are uniform samples covering exactly one period with both endpoints
included. Means and RMS values use trapezoidal weights.

Switched waveforms jump at switching instants, and a sample taken at a jump
holds the value on its right. Callers that know the left-hand limits can pass
them as ``ends``: ``ends[k]`` is the signal at the end of interval ``k`` as
seen from inside that interval. Each interval is then integrated as a
trapezoid between its own two endpoint values, which is exact for signals
that are piecewise linear between switching instants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SignalStats:
    mean: float
    rms: float
    peak_to_peak: float
    min: float
    max: float

    def as_dict(self) -> dict:
        return {"mean": self.mean, "rms": self.rms, "p2p": self.peak_to_peak,
                "min": self.min, "max": self.max}


def _weights(n: int) -> np.ndarray:
    if n == 1:
        return np.ones(1)
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w / (n - 1)


def _as_signal(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("signal must be a non-empty 1-D sequence")
    return y


def _ends(y, ends):
    if ends is None or y.size == 1:
        return None
    e = np.asarray(ends, dtype=float)
    if e.shape != (y.size - 1,):
        raise ValueError(f"ends must hold {y.size - 1} values, got shape {e.shape}")
    return e


def _integrate(y, e) -> float:
    """Period average of ``y`` (with optional interval end values ``e``)."""
    if e is None:
        return float(_weights(y.size) @ y)
    return float((np.sum(y[:-1]) + np.sum(e)) / (2 * (y.size - 1)))


def period_mean(y, ends=None) -> float:
    y = _as_signal(y)
    return _integrate(y, _ends(y, ends))


def stats(signal, ends=None) -> SignalStats:
    y = _as_signal(signal)
    e = _ends(y, ends)
    mean = _integrate(y, e)
    ms = _integrate(y * y, None if e is None else e * e)
    lo, hi = float(y.min()), float(y.max())
    if e is not None and e.size:
        lo, hi = min(lo, float(e.min())), max(hi, float(e.max()))
    # keep the invariants exact when rounding nudges mean past an extremum
    mean = min(max(mean, lo), hi)
    rms = max(math.sqrt(ms), abs(mean))
    return SignalStats(mean=mean, rms=rms, peak_to_peak=hi - lo, min=lo, max=hi)


def average_power(v, i, v_ends=None, i_ends=None) -> float:
    v, i = _as_signal(v), _as_signal(i)
    if v.shape != i.shape:
        raise ValueError(f"length mismatch: {v.size} voltage samples vs {i.size} current samples")
    ve, ie = _ends(v, v_ends), _ends(i, i_ends)
    if (ve is None) != (ie is None):
        ve = ie = None
    return _integrate(v * i, None if ve is None else ve * ie)


def power_factor(v, i, v_ends=None, i_ends=None) -> float:
    """Real power over apparent power, on arbitrary periodic waveforms."""
    sv, si = stats(v, v_ends), stats(i, i_ends)
    if sv.rms == 0 or si.rms == 0:
        raise ValueError("power factor undefined for a signal with zero RMS")
    # divide in two steps so tiny RMS values do not underflow their product
    pf = abs(average_power(v, i, v_ends, i_ends)) / sv.rms / si.rms
    return min(pf, 1.0)


def waveform_stats(wf, name) -> SignalStats:
    """``stats`` of one recorded signal, using its interval end values."""
    return stats(wf.signals[name], wf.ends.get(name))


def waveform_power(wf, v, i) -> float:
    return average_power(wf.signals[v], wf.signals[i], wf.ends.get(v), wf.ends.get(i))


def waveform_power_factor(wf, v, i) -> float:
    return power_factor(wf.signals[v], wf.signals[i], wf.ends.get(v), wf.ends.get(i))
