"""Raw trace to fixed-shape curve preprocessing.

Simulation-style traces are split at known deposition times; experiment-style
traces are split at sharp temperature rises.  Segments are tail-smoothed,
resampled to a fixed number of evenly spaced values, and overlap-truncated to
align curve pairs of successive layers.  Interpolation is linear throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CURVES_PER_PROFILE,
    CoverageError,
    Curve,
    DomainError,
    DwellSchedule,
    PointId,
    ProcessSettings,
    ShapeError,
    deposition_time,
)
from .synthgen import RawTrace


@dataclass(frozen=True, eq=False)
class Segment:
    """A raw curve segment on its local time grid (first sample at 0 s)."""

    times: np.ndarray
    temps: np.ndarray
    index: int = 1

    def __post_init__(self) -> None:
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        temps = np.ascontiguousarray(self.temps, dtype=np.float64)
        if times.shape != temps.shape or times.ndim != 1 or times.size < 1:
            raise ShapeError("segment times and temps must be equal-length 1-D vectors")
        if times.size > 1 and np.any(np.diff(times) <= 0.0):
            raise DomainError("segment times must be strictly increasing")
        times.flags.writeable = False
        temps.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "temps", temps)

    def __len__(self) -> int:
        return self.times.size

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


def _one_sided_value(times: np.ndarray, temps: np.ndarray, t_star: float,
                     side: str) -> float:
    """Trace value at ``t_star`` extrapolated from one side only.

    Deposition boundaries are derivative kinks (the re-heat peak), so a
    straddling interpolation would mix the two adjacent cycles; a short
    one-sided quadratic keeps the boundary value on its own cycle.
    """
    if side == "below":
        idx = np.flatnonzero(times <= t_star + 1e-12)[-3:]
    else:
        idx = np.flatnonzero(times >= t_star - 1e-12)[:3]
    ts, ys = times[idx], temps[idx]
    if ts.size == 1:
        return float(ys[0])
    coeffs = np.polyfit(ts - t_star, ys, deg=min(2, ts.size - 1))
    return float(coeffs[-1])


def split_simulation(trace: RawTrace, schedule: DwellSchedule,
                     settings: ProcessSettings, point: PointId) -> list[Segment]:
    """Split a trace into the point's five curves at its deposition-time
    boundaries.  Boundary samples are extrapolated one-sidedly so each
    segment spans its window exactly without bleeding across the re-heat
    kink."""
    boundaries = []
    for k in range(CURVES_PER_PROFILE + 1):
        layer = point.layer + k
        if layer > settings.num_layers:
            raise CoverageError(
                f"layer {point.layer} admits only curves 1..{k - 1}: boundary "
                f"layer {layer} is past the top layer {settings.num_layers}"
            )
        boundaries.append(deposition_time(schedule, settings, layer, point.axial_distance))

    if trace.times[0] > boundaries[0] + 1e-9 or trace.times[-1] < boundaries[-1] - 1e-9:
        covered = sum(1 for b in boundaries[1:] if trace.times[-1] >= b - 1e-9)
        raise CoverageError(
            f"trace [{trace.times[0]:.3f}, {trace.times[-1]:.3f}] s does not span the "
            f"five curve windows; last fully representable curve is k={covered}"
        )

    segments = []
    for k in range(CURVES_PER_PROFILE):
        lo, hi = boundaries[k], boundaries[k + 1]
        inside = (trace.times > lo + 1e-12) & (trace.times < hi - 1e-12)
        times = np.concatenate([[lo], trace.times[inside], [hi]])
        temps = np.concatenate([
            [_one_sided_value(trace.times, trace.temps, lo, "above")],
            trace.temps[inside],
            [_one_sided_value(trace.times[inside], trace.temps[inside], hi, "below")],
        ])
        segments.append(Segment(times - lo, temps, index=k + 1))
    return segments


def split_experiment(trace: RawTrace, rise_threshold: float = 50.0,
                     min_separation: float = 5.0) -> list[Segment]:
    """Split a trace immediately before each sharp rise.

    A maximal run of consecutive forward differences above ``rise_threshold``
    counts as one rise event, and rises closer than ``min_separation``
    seconds to the previous one are treated as the same deposition event
    (noise can briefly dip a rise below the threshold; true rises are at
    least one print cycle apart).  A trace with no rise comes back as a
    single segment."""
    if rise_threshold <= 0.0:
        raise DomainError(f"rise_threshold must be positive, got {rise_threshold!r}")
    steep = np.diff(trace.temps) > rise_threshold
    starts = np.flatnonzero(steep & ~np.concatenate([[False], steep[:-1]]))
    kept = []
    for i in starts:
        if not kept or (i + 1 - kept[-1]) * trace.sample_period >= min_separation:
            kept.append(int(i) + 1)
    cuts = [0] + kept + [trace.times.size]
    cuts = sorted(set(c for c in cuts if 0 <= c <= trace.times.size))
    if cuts[0] != 0:
        cuts = [0] + cuts

    segments = []
    index = 1
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo < 1:
            continue
        times = trace.times[lo:hi] - trace.times[lo]
        segments.append(Segment(times, trace.temps[lo:hi], index=index))
        index += 1
    return segments


def smooth_tail(segment: Segment, tail_fraction: float = 0.05) -> Segment:
    """Replace a strictly increasing suffix inside the final ``tail_fraction``
    of the segment with a hold of the pre-rise minimum."""
    if len(segment) < 4:
        raise DomainError(f"segment needs >= 4 samples to smooth, got {len(segment)}")
    if tail_fraction <= 0.0:
        return segment
    temps = segment.temps
    n = temps.size

    s = n - 1
    while s > 0 and temps[s - 1] < temps[s]:
        s -= 1
    if s == n - 1:
        return segment  # no rising suffix

    window_start = segment.times[0] + (1.0 - tail_fraction) * segment.duration
    w = int(np.searchsorted(segment.times, window_start))
    r0 = max(s, w)
    if r0 >= n:
        return segment
    if r0 == 0:
        r0 = 1
    hold = float(np.min(temps[max(0, s - 1):r0]))
    out = temps.copy()
    out[r0:] = hold
    return Segment(segment.times, out, index=segment.index)


def resample(segment: Segment, n: int, curve_index: int | None = None) -> Curve:
    """Evenly resample a segment to ``n`` temperatures over [0, duration] with
    linear interpolation; the segment endpoints are preserved exactly."""
    if len(segment) < 2:
        raise DomainError(f"segment needs >= 2 samples to resample, got {len(segment)}")
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    if segment.duration <= 0.0:
        raise DomainError("segment duration is degenerate")
    grid = np.linspace(segment.times[0], segment.times[-1], n)
    temps = np.interp(grid, segment.times, segment.temps)
    return Curve(temps, segment.duration,
                 segment.index if curve_index is None else curve_index)


def overlap_truncate(upper, lower_duration: float, n: int | None = None,
                     curve_index: int | None = None) -> Curve:
    """Restrict an upper-layer curve (raw segment or resampled Curve) to the
    first ``lower_duration`` seconds and resample it to ``n`` values.  This is
    the supervised partial-curve target for curve pairs."""
    if isinstance(upper, Curve):
        times, temps = upper.times(), upper.temps
        duration = upper.duration
        if n is None:
            n = upper.n
        if curve_index is None:
            curve_index = upper.curve_index
    elif isinstance(upper, Segment):
        times, temps = upper.times - upper.times[0], upper.temps
        duration = upper.duration
        if n is None:
            raise DomainError("n is required when truncating a raw segment")
        if curve_index is None:
            curve_index = upper.index
    else:
        raise ShapeError(f"expected Segment or Curve, got {type(upper).__name__}")

    if lower_duration <= 0.0:
        raise DomainError(f"lower_duration must be positive, got {lower_duration!r}")
    if lower_duration > duration + 1e-9:
        raise DomainError(
            f"lower_duration {lower_duration} s exceeds the upper curve's "
            f"{duration} s; dwell times must be nondecreasing"
        )
    grid = np.linspace(0.0, min(lower_duration, duration), n)
    return Curve(np.interp(grid, times, temps), lower_duration, curve_index)
