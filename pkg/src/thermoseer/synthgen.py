"""Analytic thin-wall thermal oracle.

Generates wall datasets whose temperature curves follow an exponential
cooling law plus an exponential re-heat approach, with per-layer dwell times
solved so each layer returns to the interpass target before the next one is
deposited.  Curves of successive layers are similar by construction and the
similarity grows with height, which is the structure the mapping model
learns.  A pyrometer emulator (clamping plus noise) produces
experiment-style raw traces from the same oracle.

No claim of physical fidelity is made; every constant lives in
:class:`SynthParams` so the oracle is fully specified by its parameters and
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CURVES_PER_PROFILE,
    Curve,
    DomainError,
    DwellSchedule,
    PointId,
    ProcessSettings,
    Profile,
    ShapeError,
    WallDataset,
    curve_duration,
    deposition_time,
)

PYROMETER_CLAMP_LOW = 150.0
PYROMETER_CLAMP_HIGH = 1000.0


@dataclass(frozen=True)
class SynthParams:
    """Constants of the analytic oracle.

    ambient/peak_base degC; cool_tau0 s; cool_height_gain 1/mm; reheat_tau s;
    reheat_decay and reheat_scale unitless; dr_gain degC per (mm^3/s);
    delay_gain and delay_tau_gain unitless per normalized in-layer delay;
    noise_sd degC.
    """

    ambient: float = 25.0
    peak_base: float = 1450.0
    cool_tau0: float = 55.0
    cool_height_gain: float = 0.02
    substrate_chill: float = 0.3
    chill_height: float = 10.0
    reheat_tau: float = 2.0
    reheat_decay: float = 0.9
    reheat_scale: float = 0.45
    dr_gain: float = 0.5
    delay_gain: float = 0.05
    delay_tau_gain: float = 0.08
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.cool_tau0 <= 0.0 or self.reheat_tau <= 0.0:
            raise DomainError("cooling and re-heat time constants must be positive")
        if not 0.0 < self.reheat_decay < 1.0:
            raise DomainError(f"reheat_decay must lie in (0, 1), got {self.reheat_decay!r}")
        if self.noise_sd < 0.0:
            raise DomainError(f"noise_sd must be >= 0, got {self.noise_sd!r}")
        if self.peak_base <= self.ambient:
            raise DomainError("peak_base must exceed ambient")
        if not 0.0 <= self.substrate_chill < 1.0:
            raise DomainError(f"substrate_chill must lie in [0, 1), got {self.substrate_chill!r}")
        if self.chill_height <= 0.0:
            raise DomainError(f"chill_height must be positive, got {self.chill_height!r}")
        for name in ("cool_height_gain", "reheat_scale", "dr_gain",
                     "delay_gain", "delay_tau_gain"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"{name} must be >= 0")


@dataclass(frozen=True, eq=False)
class RawTrace:
    """Unsegmented temperature history of one point on a fixed-period global
    time grid."""

    times: np.ndarray
    temps: np.ndarray
    point: PointId
    sample_period: float

    def __post_init__(self) -> None:
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        temps = np.ascontiguousarray(self.temps, dtype=np.float64)
        if times.shape != temps.shape or times.ndim != 1 or times.size < 2:
            raise ShapeError("times and temps must be equal-length 1-D vectors")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(temps))):
            raise DomainError("trace contains non-finite values")
        steps = np.diff(times)
        if np.any(steps <= 0.0) or np.any(np.abs(steps - self.sample_period) > 1e-9):
            raise DomainError("trace times must increase at the fixed sample period")
        times.flags.writeable = False
        temps.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "temps", temps)


def _delay_fraction(settings: ProcessSettings, relative_delay: float) -> float:
    return relative_delay / settings.layer_print_time


def _amplitude_scale(params: SynthParams, settings: ProcessSettings,
                     layer: int, relative_delay: float) -> float:
    # later-deposited points sit on longer-heated substrate: hotter overall
    return 1.0 + params.delay_gain * _delay_fraction(settings, relative_delay)


def cooling_tau(params: SynthParams, settings: ProcessSettings,
                layer: int, relative_delay: float = 0.0) -> float:
    """Cooling time constant (s).

    Grows linearly with layer height, shortened near the substrate (the cold
    baseplate drains the first layers fast, an effect that decays
    exponentially with height), and lengthened slightly for later-deposited
    points."""
    h = layer * settings.layer_thickness
    chill = 1.0 - params.substrate_chill * math.exp(-h / params.chill_height)
    return params.cool_tau0 * (1.0 + params.cool_height_gain * h) * chill \
        * (1.0 + params.delay_tau_gain * _delay_fraction(settings, relative_delay))


def deposition_peak(params: SynthParams, settings: ProcessSettings,
                    layer: int, relative_delay: float = 0.0) -> float:
    """Temperature (degC) right after deposition at a point."""
    rise = params.peak_base + params.dr_gain * settings.deposition_rate - params.ambient
    return params.ambient + _amplitude_scale(params, settings, layer,
                                             relative_delay) * rise


def cooling_time(tau: float, start_temp: float, ambient: float, target: float) -> float:
    """Time for an exponential decay toward ``ambient`` with constant ``tau``
    to fall from ``start_temp`` to ``target``."""
    if target <= ambient:
        raise DomainError(f"target {target} degC must exceed ambient {ambient} degC")
    if target > start_temp:
        raise DomainError(f"target {target} degC above the start temperature {start_temp} degC")
    return tau * math.log((start_temp - ambient) / (target - ambient))


def solve_dwell(params: SynthParams, settings: ProcessSettings, layer: int) -> float:
    """Dwell time (s) after printing ``layer``: the analytic time for the
    layer-end point (the last and hottest deposit, the binding one) to cool
    from its deposition peak to the interpass target."""
    end_delay = settings.layer_length / settings.travel_speed
    tau = cooling_tau(params, settings, layer, end_delay)
    peak = deposition_peak(params, settings, layer, end_delay)
    return cooling_time(tau, peak, params.ambient, settings.interpass_target)


def build_schedule(params: SynthParams, settings: ProcessSettings) -> DwellSchedule:
    """Per-layer dwell schedule from :func:`solve_dwell`."""
    return DwellSchedule(tuple(
        solve_dwell(params, settings, i) for i in range(1, settings.num_layers + 1)
    ))


def _cycle_constants(params: SynthParams, settings: ProcessSettings,
                     schedule: DwellSchedule, point: PointId):
    """Per-cycle (amplitude, re-heat amplitude, duration) triples plus the
    point's cooling constant, chained so cycles join continuously."""
    tau = cooling_tau(params, settings, point.layer, point.relative_delay)
    amp = deposition_peak(params, settings, point.layer,
                          point.relative_delay) - params.ambient
    reheat0 = params.reheat_scale * amp
    out = []
    for k in range(1, CURVES_PER_PROFILE + 1):
        duration = curve_duration(schedule, settings, point.layer, k)
        reheat = params.reheat_decay ** (k - 1) * reheat0
        out.append((amp, reheat, duration))
        # next cycle starts at this cycle's re-heat peak
        amp = amp * math.exp(-duration / tau) + reheat
    return out, tau


def analytic_curve(params: SynthParams, settings: ProcessSettings,
                   schedule: DwellSchedule, point: PointId, curve_index: int,
                   local_times: np.ndarray) -> np.ndarray:
    """Noise-free oracle temperatures of curve ``curve_index`` of ``point``
    at the given local times (s since the cycle start)."""
    cycles, tau = _cycle_constants(params, settings, schedule, point)
    amp, reheat, duration = cycles[curve_index - 1]
    t = np.asarray(local_times, dtype=np.float64)
    return params.ambient + amp * np.exp(-t / tau) \
        + reheat * np.exp((t - duration) / params.reheat_tau)


def point_trace(params: SynthParams, settings: ProcessSettings,
                schedule: DwellSchedule, point: PointId,
                sample_period: float = 0.1, lead_in: float = 0.0) -> RawTrace:
    """Global-time raw trace of one point spanning its five cycles, optionally
    preceded by ``lead_in`` seconds of ambient readings before deposition."""
    if sample_period <= 0.0:
        raise DomainError(f"sample_period must be positive, got {sample_period!r}")
    cycles, tau = _cycle_constants(params, settings, schedule, point)
    durations = [c[2] for c in cycles]
    total = float(sum(durations))
    start = deposition_time(schedule, settings, point.layer, point.axial_distance)

    n_lead = int(round(lead_in / sample_period))
    n_span = int(math.ceil(total / sample_period))
    offsets = (np.arange(-n_lead, n_span + 1)) * sample_period
    temps = np.empty_like(offsets)
    temps[:n_lead] = params.ambient

    bounds = np.concatenate([[0.0], np.cumsum(durations)])
    local = offsets[n_lead:]
    for k in range(CURVES_PER_PROFILE):
        lo, hi = bounds[k], bounds[k + 1]
        # last cycle keeps the final samples that overrun the exact span
        sel = (local >= lo) & ((local < hi) | (k == CURVES_PER_PROFILE - 1))
        temps[n_lead:][sel] = analytic_curve(
            params, settings, schedule, point, k + 1, local[sel] - lo)
    return RawTrace(times=start + offsets, temps=temps, point=point,
                    sample_period=sample_period)


def emulate_pyrometer(source, clamp_low: float = PYROMETER_CLAMP_LOW,
                      clamp_high: float = PYROMETER_CLAMP_HIGH,
                      noise_sd: float = 0.0, seed: int = 0) -> RawTrace:
    """Pyrometer view of a trace or profile: additive zero-mean Gaussian noise
    followed by clamping to the instrument band."""
    if clamp_low >= clamp_high:
        raise DomainError(f"clamp_low {clamp_low} must be below clamp_high {clamp_high}")
    if isinstance(source, Profile):
        trace = _profile_to_trace(source)
    elif isinstance(source, RawTrace):
        trace = source
    else:
        raise ShapeError(f"expected RawTrace or Profile, got {type(source).__name__}")
    temps = trace.temps.copy()
    if noise_sd > 0.0:
        temps += np.random.default_rng(seed).normal(0.0, noise_sd, size=temps.shape)
    np.clip(temps, clamp_low, clamp_high, out=temps)
    return RawTrace(times=trace.times, temps=temps, point=trace.point,
                    sample_period=trace.sample_period)


def _profile_to_trace(profile: Profile, sample_period: float = 0.1) -> RawTrace:
    """Concatenate a profile's curves onto one fixed-period local time grid."""
    bounds = np.concatenate([[0.0], np.cumsum(profile.durations)])
    n = int(math.ceil(bounds[-1] / sample_period))
    times = np.arange(n + 1) * sample_period
    temps = np.empty_like(times)
    for k, curve in enumerate(profile.curves):
        lo, hi = bounds[k], bounds[k + 1]
        sel = (times >= lo) & ((times < hi) | (k == CURVES_PER_PROFILE - 1))
        temps[sel] = np.interp(times[sel] - lo, curve.times(), curve.temps)
    return RawTrace(times=times, temps=temps, point=profile.point,
                    sample_period=sample_period)


def _point_distances(settings: ProcessSettings, points_per_layer: int,
                     spacing_mm: float | None) -> list[float]:
    if points_per_layer < 2:
        raise DomainError(f"points_per_layer must be >= 2, got {points_per_layer}")
    if spacing_mm is None:
        spacing_mm = settings.layer_length / (points_per_layer + 1)
    if spacing_mm <= 0.0 or points_per_layer * spacing_mm >= settings.layer_length:
        raise DomainError(
            f"{points_per_layer} points at {spacing_mm} mm spacing do not fit "
            f"inside a {settings.layer_length} mm layer"
        )
    return [j * spacing_mm for j in range(1, points_per_layer + 1)]


def generate_wall(settings: ProcessSettings, params: SynthParams,
                  points_per_layer: int, n: int = 100,
                  spacing_mm: float | None = None) -> WallDataset:
    """Simulation-style dataset: noise-free (unless ``params.noise_sd`` > 0)
    analytic profiles of evenly spaced interior points on every layer that
    admits five curves."""
    if settings.num_layers < 6:
        raise DomainError("num_layers must be >= 6 so at least one layer has five curves")
    distances = _point_distances(settings, points_per_layer, spacing_mm)
    schedule = build_schedule(params, settings)

    profiles = {}
    for layer in range(1, settings.num_layers - CURVES_PER_PROFILE + 1):
        for j, d in enumerate(distances, start=1):
            point = PointId.from_distance(layer, d, settings.travel_speed)
            rng = np.random.default_rng((params.seed, layer, j)) if params.noise_sd > 0 else None
            curves = []
            for k in range(1, CURVES_PER_PROFILE + 1):
                duration = curve_duration(schedule, settings, layer, k)
                temps = analytic_curve(params, settings, schedule, point, k,
                                       np.linspace(0.0, duration, n))
                if rng is not None:
                    temps = temps + rng.normal(0.0, params.noise_sd, size=n)
                curves.append(Curve(temps, duration, k))
            profiles[point] = Profile(point, tuple(curves))

    provenance = {
        "kind": "synthetic",
        "style": "simulation",
        "seed": params.seed,
        "n": n,
        "points_per_layer": points_per_layer,
        "noise": "gaussian",
        "noise_sd": params.noise_sd,
    }
    return WallDataset(settings, schedule, profiles, provenance)


def generate_experiment_wall(settings: ProcessSettings, params: SynthParams,
                             points_per_layer: int, n: int = 100,
                             spacing_mm: float | None = None,
                             jitter_mm: float = 2.0,
                             sample_period: float = 0.5,
                             rise_threshold: float = 50.0,
                             clamp_low: float = PYROMETER_CLAMP_LOW,
                             clamp_high: float = PYROMETER_CLAMP_HIGH) -> WallDataset:
    """Experiment-style dataset: each point's oracle trace is evaluated at a
    jittered location (manual pyrometer placement), passed through the
    pyrometer emulator, split at sharp rises, and resampled.  Recorded point
    identities keep the nominal locations."""
    from .preprocess import resample, split_experiment

    if settings.num_layers < 6:
        raise DomainError("num_layers must be >= 6 so at least one layer has five curves")
    if params.noise_sd <= 0.0:
        params = replace(params, noise_sd=2.0)
    distances = _point_distances(settings, points_per_layer, spacing_mm)
    schedule = build_schedule(params, settings)

    profiles = {}
    for layer in range(1, settings.num_layers - CURVES_PER_PROFILE + 1):
        for j, d in enumerate(distances, start=1):
            rng = np.random.default_rng((params.seed, layer, j))
            true_d = float(np.clip(d + rng.uniform(-jitter_mm, jitter_mm),
                                   0.0, settings.layer_length))
            true_point = PointId.from_distance(layer, true_d, settings.travel_speed)
            trace = point_trace(params, settings, schedule, true_point,
                                sample_period=sample_period, lead_in=5.0)
            seen = emulate_pyrometer(trace, clamp_low, clamp_high,
                                     noise_sd=params.noise_sd,
                                     seed=int(rng.integers(2 ** 31)))
            segments = split_experiment(seen, rise_threshold)
            if len(segments) < CURVES_PER_PROFILE + 1:
                raise DomainError(
                    f"expected at least {CURVES_PER_PROFILE + 1} segments from the "
                    f"pyrometer trace of layer {layer} point {j}, got {len(segments)}"
                )
            # first segment is the pre-deposition stub; the next five are curves
            point = PointId.from_distance(layer, d, settings.travel_speed)
            curves = tuple(
                resample(segments[k], n, curve_index=k)
                for k in range(1, CURVES_PER_PROFILE + 1)
            )
            profiles[point] = Profile(point, curves)

    provenance = {
        "kind": "synthetic",
        "style": "experiment",
        "seed": params.seed,
        "n": n,
        "points_per_layer": points_per_layer,
        "noise": "gaussian",
        "noise_sd": params.noise_sd,
        "jitter_mm": jitter_mm,
        "sample_period": sample_period,
        "rise_threshold": rise_threshold,
        "clamp": [clamp_low, clamp_high],
    }
    return WallDataset(settings, schedule, profiles, provenance)
