"""Domain types and shared arithmetic for thin-wall thermal prediction.

Everything downstream (generation, preprocessing, mapping, reconstruction,
pipeline) speaks in these types.  Temperatures are degrees Celsius stored as
float64 end to end; layers are indexed 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CURVES_PER_PROFILE = 5
ABSOLUTE_ZERO_C = -273.15

# Arc current/voltage fits (amperes/volts as functions of wire feed rate in
# m/min) and the process efficiency used for the energy-per-volume estimate.
CURRENT_FIT = (1.22, 5.2444)
VOLTAGE_FIT = (27.267, 10.556)
PROCESS_EFFICIENCY = 0.85


class ThermoseerError(Exception):
    """Base class for all package errors."""


class DomainError(ThermoseerError, ValueError):
    """An argument is outside its physical or index domain."""


class ShapeError(ThermoseerError, ValueError):
    """Array/curve shapes are inconsistent (for example mixed N)."""


class MetricError(ThermoseerError, ValueError):
    """A metric is undefined for the given operands."""


class CoverageError(ThermoseerError, ValueError):
    """A trace does not cover the time span an operation requires."""


class HorizonError(ThermoseerError):
    """A query lies beyond the representable five-curve time horizon."""


class NumericsError(ThermoseerError):
    """A numerical routine failed to converge or is ill-conditioned."""


class PairingError(ThermoseerError, ValueError):
    """Predicted and truth point sets cannot be matched one-to-one."""


class ProtocolError(ThermoseerError):
    """A benchmark or prediction protocol precondition is violated."""


class ConfigError(ThermoseerError, ValueError):
    """A configuration file or flag set is invalid."""


class CheckpointError(ThermoseerError, ValueError):
    """A checkpoint file is malformed or has an unsupported version."""


def _require_positive(name: str, value: float) -> None:
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


def wire_deposition_rate(wire_feed_rate: float, wire_diameter: float) -> float:
    """Volumetric deposition rate in mm^3/s from wire feed rate (m/min) and
    wire diameter (mm)."""
    _require_positive("wire_feed_rate", wire_feed_rate)
    _require_positive("wire_diameter", wire_diameter)
    return math.pi * (wire_diameter / 2.0) ** 2 * wire_feed_rate * 1000.0 / 60.0


def default_layer_print_time(layer_length: float, travel_speed: float) -> float:
    """Layer print time with the 0.5 s acceleration/deceleration allowance."""
    return layer_length / travel_speed + 0.5


@dataclass(frozen=True)
class ProcessSettings:
    """Fixed process parameters of one printed thin wall.

    Units: travel_speed mm/s, wire_feed_rate m/min, wire_diameter mm,
    layer_length mm, layer_thickness mm, layer_print_time s,
    deposition_rate mm^3/s, interpass_target degC.
    """

    travel_speed: float
    wire_feed_rate: float
    wire_diameter: float
    layer_length: float
    layer_thickness: float
    layer_print_time: float
    deposition_rate: float
    interpass_target: float
    num_layers: int

    def __post_init__(self) -> None:
        for name in (
            "travel_speed",
            "wire_feed_rate",
            "wire_diameter",
            "layer_length",
            "layer_thickness",
            "layer_print_time",
            "deposition_rate",
            "interpass_target",
        ):
            _require_positive(name, getattr(self, name))
        if int(self.num_layers) != self.num_layers or self.num_layers < 1:
            raise DomainError(f"num_layers must be a positive integer, got {self.num_layers!r}")
        travel_time = self.layer_length / self.travel_speed
        if self.layer_print_time < travel_time - 1e-9:
            raise DomainError(
                "layer_print_time %.6g s is shorter than the travel time %.6g s"
                % (self.layer_print_time, travel_time)
            )

    @classmethod
    def build(
        cls,
        travel_speed: float,
        wire_feed_rate: float,
        layer_length: float,
        layer_thickness: float,
        num_layers: int,
        wire_diameter: float = 1.2,
        interpass_target: float = 200.0,
        layer_print_time: float | None = None,
        deposition_rate: float | None = None,
    ) -> "ProcessSettings":
        """Settings with the usual derived defaults: print time from travel
        speed plus the 0.5 s allowance, deposition rate from the wire."""
        _require_positive("travel_speed", travel_speed)
        if layer_print_time is None:
            layer_print_time = default_layer_print_time(layer_length, travel_speed)
        if deposition_rate is None:
            deposition_rate = wire_deposition_rate(wire_feed_rate, wire_diameter)
        return cls(
            travel_speed=travel_speed,
            wire_feed_rate=wire_feed_rate,
            wire_diameter=wire_diameter,
            layer_length=layer_length,
            layer_thickness=layer_thickness,
            layer_print_time=layer_print_time,
            deposition_rate=deposition_rate,
            interpass_target=interpass_target,
            num_layers=int(num_layers),
        )


@dataclass(frozen=True)
class DwellSchedule:
    """Per-layer dwell times in seconds, indexed 1..num_layers."""

    dwell: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dwell", tuple(float(d) for d in self.dwell))
        for i, d in enumerate(self.dwell, start=1):
            if not math.isfinite(d) or d < 0.0:
                raise DomainError(f"dwell[{i}] must be >= 0 and finite, got {d!r}")

    def __len__(self) -> int:
        return len(self.dwell)

    def for_layer(self, layer: int) -> float:
        if not 1 <= layer <= len(self.dwell):
            raise DomainError(f"layer {layer} outside schedule range 1..{len(self.dwell)}")
        return self.dwell[layer - 1]


@dataclass(frozen=True)
class PointId:
    """Identity of a point: its layer, axial distance from the layer start
    boundary (mm), and relative delay d/TS (s)."""

    layer: int
    axial_distance: float
    relative_delay: float

    def __post_init__(self) -> None:
        if int(self.layer) != self.layer or self.layer < 1:
            raise DomainError(f"layer must be a positive integer, got {self.layer!r}")
        if not math.isfinite(self.axial_distance) or self.axial_distance < 0.0:
            raise DomainError(f"axial_distance must be >= 0, got {self.axial_distance!r}")
        if not math.isfinite(self.relative_delay) or self.relative_delay < 0.0:
            raise DomainError(f"relative_delay must be >= 0, got {self.relative_delay!r}")

    @classmethod
    def from_distance(cls, layer: int, axial_distance: float, travel_speed: float) -> "PointId":
        return cls(layer=layer, axial_distance=axial_distance,
                   relative_delay=axial_distance / travel_speed)


@dataclass(frozen=True, eq=False)
class Curve:
    """One print+dwell cycle of a point's temperature history, resampled to a
    fixed number of evenly spaced values over [0, duration]."""

    temps: np.ndarray
    duration: float
    curve_index: int

    def __post_init__(self) -> None:
        temps = np.ascontiguousarray(self.temps, dtype=np.float64)
        if temps.ndim != 1 or temps.size < 2:
            raise ShapeError(f"curve temps must be a 1-D vector of >= 2 values, got shape {temps.shape}")
        if not np.all(np.isfinite(temps)):
            raise DomainError("curve temps contain non-finite values")
        if np.any(temps <= ABSOLUTE_ZERO_C):
            raise DomainError("curve temps at or below absolute zero")
        if not math.isfinite(self.duration) or self.duration <= 0.0:
            raise DomainError(f"curve duration must be positive, got {self.duration!r}")
        if not 1 <= self.curve_index <= CURVES_PER_PROFILE:
            raise DomainError(f"curve_index must be in 1..{CURVES_PER_PROFILE}, got {self.curve_index}")
        temps.flags.writeable = False
        object.__setattr__(self, "temps", temps)

    @property
    def n(self) -> int:
        return self.temps.size

    def times(self) -> np.ndarray:
        """The curve's own even local-time grid over [0, duration]."""
        return np.linspace(0.0, self.duration, self.n)


@dataclass(frozen=True, eq=False)
class Profile:
    """The ordered first five curves of one point."""

    point: PointId
    curves: tuple[Curve, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "curves", tuple(self.curves))
        if len(self.curves) != CURVES_PER_PROFILE:
            raise ShapeError(f"profile needs exactly {CURVES_PER_PROFILE} curves, got {len(self.curves)}")
        indices = [c.curve_index for c in self.curves]
        if indices != list(range(1, CURVES_PER_PROFILE + 1)):
            raise ShapeError(f"curve indices must be 1..{CURVES_PER_PROFILE} in order, got {indices}")
        sizes = {c.n for c in self.curves}
        if len(sizes) != 1:
            raise ShapeError(f"curves of one profile must share N, got sizes {sorted(sizes)}")

    @property
    def n(self) -> int:
        return self.curves[0].n

    @property
    def durations(self) -> tuple[float, ...]:
        return tuple(c.duration for c in self.curves)

    def stacked(self) -> np.ndarray:
        """Concatenation [C1; C2; C3; C4; C5] as a 5N vector."""
        return np.concatenate([c.temps for c in self.curves])


@dataclass(frozen=True)
class MappingFeatures:
    """The four scalar inputs fed to the mapping model alongside a curve:
    layer print time (s), dwell of the source layer (s), deposition rate
    (mm^3/s), and relative height of the source layer (mm)."""

    layer_print_time: float
    dwell_of_source_layer: float
    deposition_rate: float
    relative_height: float

    def __post_init__(self) -> None:
        for name in ("layer_print_time", "dwell_of_source_layer",
                     "deposition_rate", "relative_height"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise DomainError(f"{name} must be >= 0 and finite, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.layer_print_time, self.dwell_of_source_layer,
                         self.deposition_rate, self.relative_height])


@dataclass(frozen=True, eq=False)
class WallDataset:
    """All profiles of one generated or loaded thin wall."""

    settings: ProcessSettings
    schedule: DwellSchedule
    profiles: dict[PointId, Profile]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.schedule) != self.settings.num_layers:
            raise ShapeError(
                "schedule has %d entries for %d layers"
                % (len(self.schedule), self.settings.num_layers)
            )
        if not self.profiles:
            raise ShapeError("dataset holds no profiles")
        sizes = {p.n for p in self.profiles.values()}
        if len(sizes) != 1:
            raise ShapeError(f"all profiles must share N, got sizes {sorted(sizes)}")
        for point in self.profiles:
            if not 1 <= point.layer <= self.settings.num_layers:
                raise DomainError(f"point layer {point.layer} outside 1..{self.settings.num_layers}")
            if point.axial_distance > self.settings.layer_length + 1e-9:
                raise DomainError(
                    f"axial_distance {point.axial_distance} beyond layer length "
                    f"{self.settings.layer_length}"
                )
            expected = point.axial_distance / self.settings.travel_speed
            if abs(point.relative_delay - expected) > 1e-9:
                raise DomainError(
                    f"relative_delay {point.relative_delay} inconsistent with travel speed "
                    f"(expected {expected})"
                )

    @property
    def n(self) -> int:
        return next(iter(self.profiles.values())).n

    def layers(self) -> list[int]:
        return sorted({p.layer for p in self.profiles})

    def profiles_on(self, layer: int) -> list[Profile]:
        """Profiles of one layer ordered by axial distance."""
        rows = [prof for pt, prof in self.profiles.items() if pt.layer == layer]
        return sorted(rows, key=lambda prof: prof.point.axial_distance)


def deposition_time(
    schedule: DwellSchedule,
    settings: ProcessSettings,
    layer: int,
    axial_distance: float,
) -> float:
    """Global time (s) at which material is deposited at the given axial
    distance of the given layer: all prior print and dwell time plus the
    travel time within the layer."""
    if not 1 <= layer <= settings.num_layers:
        raise DomainError(f"layer {layer} outside 1..{settings.num_layers}")
    if not 0.0 <= axial_distance <= settings.layer_length:
        raise DomainError(
            f"axial_distance {axial_distance} outside 0..{settings.layer_length}"
        )
    prior_dwell = sum(schedule.dwell[: layer - 1])
    return (layer - 1) * settings.layer_print_time + prior_dwell \
        + axial_distance / settings.travel_speed


def curve_duration(
    schedule: DwellSchedule,
    settings: ProcessSettings,
    layer: int,
    curve_index: int,
) -> float:
    """Duration of curve k of any point on the given layer: one layer print
    time plus the dwell of layer (layer + k - 1).  Independent of the point's
    axial distance."""
    if layer < 1 or curve_index < 1:
        raise DomainError(f"layer and curve_index must be >= 1, got ({layer}, {curve_index})")
    top = layer + curve_index - 1
    if top > settings.num_layers:
        raise DomainError(
            f"curve {curve_index} of layer {layer} indexes dwell[{top}] past the "
            f"top layer {settings.num_layers}"
        )
    return settings.layer_print_time + schedule.for_layer(top)


def mapping_features(
    settings: ProcessSettings,
    schedule: DwellSchedule,
    source_layer: int,
) -> MappingFeatures:
    """The four complementary mapping inputs for curves measured on
    ``source_layer`` (the printed layer below the one being predicted)."""
    if not 1 <= source_layer <= settings.num_layers:
        raise DomainError(f"source_layer {source_layer} outside 1..{settings.num_layers}")
    return MappingFeatures(
        layer_print_time=settings.layer_print_time,
        dwell_of_source_layer=schedule.for_layer(source_layer),
        deposition_rate=settings.deposition_rate,
        relative_height=source_layer * settings.layer_thickness,
    )


def reop(predicted: Profile, truth: Profile) -> float:
    """Relative error of profile: mean of |T_hat - T| / T over all 5N samples
    of the five (partial) curves."""
    if predicted.n != truth.n:
        raise ShapeError(f"profiles disagree on N: {predicted.n} vs {truth.n}")
    t = truth.stacked()
    if np.any(t <= 0.0):
        raise MetricError("REOP undefined: truth contains temperatures <= 0 degC")
    p = predicted.stacked()
    return float(np.mean(np.abs(p - t) / t))


def energy_per_volume(
    wire_feed_rate: float,
    layer_thickness: float,
    layer_length: float,
    layer_width: float,
) -> float:
    """Melting energy per bead volume (J/mm^3) from the wire feed rate via the
    arc current/voltage fits and the fixed process efficiency."""
    for name, v in (("layer_thickness", layer_thickness),
                    ("layer_length", layer_length),
                    ("layer_width", layer_width)):
        _require_positive(name, v)
    if wire_feed_rate < 0.0 or not math.isfinite(wire_feed_rate):
        raise DomainError(f"wire_feed_rate must be >= 0, got {wire_feed_rate!r}")
    current = CURRENT_FIT[0] * wire_feed_rate + CURRENT_FIT[1]
    voltage = VOLTAGE_FIT[0] * wire_feed_rate + VOLTAGE_FIT[1]
    bead_volume = layer_width * layer_length * layer_thickness
    return PROCESS_EFFICIENCY * current * voltage / bead_volume
