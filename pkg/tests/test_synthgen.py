import math

import numpy as np
import pytest

from thermoseer.core import (
    Curve,
    DomainError,
    PointId,
    ProcessSettings,
    Profile,
    curve_duration,
    reop,
)
from thermoseer.preprocess import overlap_truncate
from thermoseer.synthgen import (
    RawTrace,
    SynthParams,
    analytic_curve,
    build_schedule,
    cooling_time,
    deposition_peak,
    emulate_pyrometer,
    generate_experiment_wall,
    generate_wall,
    point_trace,
    solve_dwell,
)


@pytest.fixture
def params():
    return SynthParams(seed=42)


@pytest.fixture
def wall(settings, params):
    return generate_wall(settings, params, points_per_layer=7, n=100)


class TestSolveDwell:
    def test_closed_form_hand_value(self):
        # 30 * ln(600/175)
        assert cooling_time(30.0, 625.0, 25.0, 200.0) == pytest.approx(36.9643, abs=1e-3)

    def test_target_at_peak_is_zero(self, params):
        s = ProcessSettings.build(8.0, 3.0, 160.0, 1.5, 40, deposition_rate=52.8)
        peak = deposition_peak(params, s, 5, s.layer_length / s.travel_speed)
        s_at_peak = ProcessSettings.build(8.0, 3.0, 160.0, 1.5, 40, deposition_rate=52.8,
                                          interpass_target=peak)
        assert solve_dwell(params, s_at_peak, 5) == pytest.approx(0.0, abs=1e-12)

    def test_height_independent_law_gives_identical_dwell(self, settings):
        # no height term anywhere: identical peaks and taus on every layer
        p = SynthParams(cool_height_gain=0.0, substrate_chill=0.0)
        dwells = {solve_dwell(p, settings, i) for i in range(1, 41)}
        assert len(dwells) == 1

    def test_nondecreasing_with_height(self, settings, params):
        sched = build_schedule(params, settings)
        assert all(sched.for_layer(i + 1) >= sched.for_layer(i) for i in range(1, 40))

    def test_target_at_or_below_ambient_rejected(self, params):
        s = ProcessSettings.build(8.0, 3.0, 160.0, 1.5, 40, interpass_target=20.0)
        with pytest.raises(DomainError):
            solve_dwell(SynthParams(ambient=25.0), s, 1)


class TestGenerateWall:
    def test_layers_and_point_placement(self, settings, wall):
        assert wall.layers() == list(range(1, 36))
        on_one = wall.profiles_on(1)
        assert [p.point.axial_distance for p in on_one] == pytest.approx(
            [20.0 * j for j in range(1, 8)])

    def test_curve_start_is_the_deposition_peak(self, settings, params, wall):
        prof = wall.profiles_on(12)[3]
        peak = deposition_peak(params, settings, 12, prof.point.relative_delay)
        assert prof.curves[0].temps[0] == pytest.approx(peak, abs=1.0)

    def test_durations_match_duration_law(self, settings, wall):
        for layer in (1, 10, 35):
            for prof in wall.profiles_on(layer):
                for k, c in enumerate(prof.curves, start=1):
                    assert c.duration == curve_duration(wall.schedule, settings, layer, k)

    def test_same_layer_points_share_durations(self, wall):
        rows = wall.profiles_on(7)
        assert all(r.durations == rows[0].durations for r in rows)

    def test_cycle_continuity(self, wall):
        for prof in (wall.profiles_on(1)[0], wall.profiles_on(20)[4]):
            for k in range(4):
                gap = abs(prof.curves[k].temps[-1] - prof.curves[k + 1].temps[0])
                assert gap < 1.0

    def test_end_of_dwell_near_interpass_target(self, settings, params, wall):
        # evaluate the oracle at the layer-end point, at the global end of the
        # layer's dwell, for every layer
        end_delay = settings.layer_length / settings.travel_speed
        for layer in range(1, 36):
            pt = PointId.from_distance(layer, settings.layer_length, settings.travel_speed)
            local = (settings.layer_print_time - end_delay) + wall.schedule.for_layer(layer)
            temp = analytic_curve(params, settings, wall.schedule, pt, 1,
                                  np.array([local]))[0]
            assert abs(temp - settings.interpass_target) <= 10.0

    def test_deterministic(self, settings, params):
        a = generate_wall(settings, params, points_per_layer=3, n=40)
        b = generate_wall(settings, params, points_per_layer=3, n=40)
        for pt in a.profiles:
            for ca, cb in zip(a.profiles[pt].curves, b.profiles[pt].curves):
                np.testing.assert_array_equal(ca.temps, cb.temps)

    def test_curve_similarity_bounded_and_shrinking(self, settings, wall):
        # REOP between the overlap-truncated upper curve and the lower curve
        # of each point pair: below 0.15 from layer 10 up, and its j-average
        # decreases with the layer.
        def layer_similarity(i):
            vals = []
            for low in wall.profiles_on(i):
                up = wall.profiles[PointId.from_distance(
                    i + 1, low.point.axial_distance, settings.travel_speed)]
                trunc = tuple(
                    overlap_truncate(up.curves[k], low.curves[k].duration)
                    for k in range(5)
                )
                vals.append(reop(Profile(up.point, trunc), low))
            return vals

        averages = {}
        for i in range(10, 35):
            vals = layer_similarity(i)
            assert max(vals) < 0.15
            averages[i] = float(np.mean(vals))
        assert all(averages[i + 1] < averages[i] for i in range(10, 34))

    def test_rejects_tiny_walls_and_point_counts(self, settings, params):
        with pytest.raises(DomainError):
            generate_wall(settings, params, points_per_layer=1)
        small = ProcessSettings.build(8.0, 3.0, 160.0, 1.5, 5)
        with pytest.raises(DomainError):
            generate_wall(small, params, points_per_layer=7)

    def test_rejects_overflowing_spacing(self, settings, params):
        with pytest.raises(DomainError):
            generate_wall(settings, params, points_per_layer=9, spacing_mm=20.0)


class TestEmulatePyrometer:
    def test_inside_band_unchanged(self):
        pt = PointId.from_distance(1, 10.0, 8.0)
        trace = RawTrace(np.arange(10) * 0.1, np.full(10, 500.0), pt, 0.1)
        out = emulate_pyrometer(trace, noise_sd=0.0)
        np.testing.assert_array_equal(out.temps, trace.temps)

    def test_clamps_both_bounds(self):
        pt = PointId.from_distance(1, 10.0, 8.0)
        trace = RawTrace(np.arange(3) * 0.1, np.array([1450.0, 500.0, 25.0]), pt, 0.1)
        out = emulate_pyrometer(trace, noise_sd=0.0)
        np.testing.assert_allclose(out.temps, [1000.0, 500.0, 150.0])

    def test_deterministic_given_seed(self):
        pt = PointId.from_distance(1, 10.0, 8.0)
        trace = RawTrace(np.arange(50) * 0.1, np.full(50, 500.0), pt, 0.1)
        a = emulate_pyrometer(trace, noise_sd=5.0, seed=9)
        b = emulate_pyrometer(trace, noise_sd=5.0, seed=9)
        np.testing.assert_array_equal(a.temps, b.temps)

    def test_accepts_profile(self):
        pt = PointId.from_distance(1, 10.0, 8.0)
        curves = tuple(Curve(np.linspace(1450.0, 200.0, 30), 60.0, k) for k in range(1, 6))
        out = emulate_pyrometer(Profile(pt, curves), noise_sd=0.0)
        assert out.temps.max() == 1000.0
        assert out.temps.min() >= 150.0

    def test_bad_band_rejected(self):
        pt = PointId.from_distance(1, 10.0, 8.0)
        trace = RawTrace(np.arange(3) * 0.1, np.full(3, 500.0), pt, 0.1)
        with pytest.raises(DomainError):
            emulate_pyrometer(trace, clamp_low=1000.0, clamp_high=150.0)


class TestPointTrace:
    def test_spans_five_cycles(self, settings, params):
        sched = build_schedule(params, settings)
        pt = PointId.from_distance(3, 40.0, settings.travel_speed)
        trace = point_trace(params, settings, sched, pt, sample_period=0.5)
        total = sum(curve_duration(sched, settings, 3, k) for k in range(1, 6))
        start = trace.times[0]
        assert trace.times[-1] - start >= total - 1e-9

    def test_lead_in_is_ambient(self, settings, params):
        sched = build_schedule(params, settings)
        pt = PointId.from_distance(3, 40.0, settings.travel_speed)
        trace = point_trace(params, settings, sched, pt, sample_period=0.5, lead_in=3.0)
        assert np.all(trace.temps[:6] == params.ambient)
        # deposition jump right after the lead-in
        assert trace.temps[6] > 1000.0


class TestExperimentWall:
    def test_shapes_and_clamping(self, params):
        s = ProcessSettings.build(8.0, 3.0, 160.0, 1.5, 12, deposition_rate=52.8)
        ds = generate_experiment_wall(s, params, points_per_layer=3, n=60)
        assert ds.layers() == list(range(1, 8))
        for prof in ds.profiles.values():
            assert prof.n == 60
            stacked = prof.stacked()
            assert stacked.max() <= 1000.0
            assert stacked.min() >= 150.0
        # first curve's deposition peak is clipped to the pyrometer band
        first = ds.profiles_on(3)[0].curves[0]
        assert first.temps[0] == pytest.approx(1000.0)

    def test_durations_close_to_duration_law(self, params):
        s = ProcessSettings.build(8.0, 3.0, 160.0, 1.5, 12, deposition_rate=52.8)
        ds = generate_experiment_wall(s, params, points_per_layer=3, n=60)
        for prof in ds.profiles_on(2):
            for k, c in enumerate(prof.curves, start=1):
                want = curve_duration(ds.schedule, s, 2, k)
                assert c.duration == pytest.approx(want, abs=3.0)

    def test_deterministic(self, params):
        s = ProcessSettings.build(8.0, 3.0, 160.0, 1.5, 12, deposition_rate=52.8)
        a = generate_experiment_wall(s, params, points_per_layer=2, n=40)
        b = generate_experiment_wall(s, params, points_per_layer=2, n=40)
        for pt in a.profiles:
            for ca, cb in zip(a.profiles[pt].curves, b.profiles[pt].curves):
                np.testing.assert_array_equal(ca.temps, cb.temps)
