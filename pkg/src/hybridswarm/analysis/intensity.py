"""Expected number of jumps starting from a region, and its rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.specs import Trajectory
from ..swarm.trace import SwarmTrace


@dataclass(frozen=True, eq=False)
class Region:
    """Closed box [lo, hi] on pre-jump states; ``empty`` matches nothing."""

    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    empty: bool = False

    @classmethod
    def everything(cls) -> "Region":
        return cls()

    @classmethod
    def nothing(cls) -> "Region":
        return cls(empty=True)

    def contains(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        n = states.shape[0]
        if self.empty:
            return np.zeros(n, dtype=bool)
        ok = np.ones(n, dtype=bool)
        if self.lo is not None:
            ok &= np.all(states >= np.asarray(self.lo, dtype=float), axis=1)
        if self.hi is not None:
            ok &= np.all(states <= np.asarray(self.hi, dtype=float), axis=1)
        return ok

    def to_dict(self) -> dict:
        if self.empty:
            return {"empty": True}
        as_list = lambda v: None if v is None else np.asarray(v, dtype=float).tolist()  # noqa: E731
        return {"lo": as_list(self.lo), "hi": as_list(self.hi)}


@dataclass(eq=False)
class IntensityEstimate:
    region: Region
    times: np.ndarray
    cumulative: np.ndarray
    cumulative_se: np.ndarray
    rate: np.ndarray
    rate_se: np.ndarray
    n_traces: int

    def integrated_rate(self) -> np.ndarray:
        """Trapezoid integral of ``rate`` from the first grid time."""
        steps = 0.5 * (self.rate[1:] + self.rate[:-1]) * np.diff(self.times)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def to_dict(self) -> dict:
        return {
            "region": self.region.to_dict(),
            "times": self.times.tolist(),
            "cumulative": self.cumulative.tolist(),
            "cumulative_se": self.cumulative_se.tolist(),
            "rate": self.rate.tolist(),
            "rate_se": self.rate_se.tolist(),
            "n_traces": self.n_traces,
        }


def _jumps_of(trace, field: str):
    """(times, pre-jump states) of one trace."""
    if isinstance(trace, SwarmTrace):
        jl = trace.jumps
        return jl.time, getattr(jl, field)
    if isinstance(trace, Trajectory):
        t = np.array([j.time for j in trace.jumps], dtype=float)
        pre = np.array([j.pre.position for j in trace.jumps], dtype=float)
        return t, pre.reshape(len(t), -1) if len(t) else np.zeros((0, 1))
    raise TypeError(f"cannot read jumps from {type(trace).__name__}")


def mean_jump_intensity(traces, region: Region, times, field: str = "pre_z") -> IntensityEstimate:
    """Ensemble-mean count of jumps from ``region`` by each time, and its derivative.

    For swarm traces ``field`` picks the pre-jump quantity tested against
    the region (``pre_z``, ``pre_z_tilde`` or ``pre_beta``); trajectories use
    the pre-jump position. The rate is a central difference of the count
    (one-sided at the ends).
    """
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("need at least two increasing grid times")
    counts = np.zeros((len(traces), times.size))
    for r, tr in enumerate(traces):
        t, pre = _jumps_of(tr, field)
        t = np.sort(t[region.contains(pre)]) if len(t) else t
        counts[r] = np.searchsorted(t, times, side="right")
    rates = np.gradient(counts, times, axis=1)
    n = len(traces)

    def se(a):
        return a.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(a.shape[1], np.nan)

    return IntensityEstimate(
        region, times, counts.mean(axis=0), se(counts), rates.mean(axis=0), se(rates), n
    )
