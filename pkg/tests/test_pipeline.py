import numpy as np
import pytest

from thermoseer.core import (
    Curve,
    DomainError,
    HorizonError,
    PairingError,
    PointId,
    ProtocolError,
    Profile,
)
from thermoseer.mapping import TrainConfig, init_model
from thermoseer.pipeline import (
    ROOM_TEMPERATURE,
    evaluate,
    extract_curve_pairs,
    field_horizon,
    predict_layer,
    predict_next_layer,
    predict_point,
    render_field,
    run_benchmark,
)
from thermoseer.synthgen import SynthParams, generate_wall


def zero_model(n):
    model = init_model(n, seed=0)
    for w in model.weights:
        w[:] = 0.0
    model.scaler_fitted = True
    return model


@pytest.fixture(scope="module")
def wall(request):
    from thermoseer.core import ProcessSettings

    settings = ProcessSettings(
        travel_speed=8.0, wire_feed_rate=3.0, wire_diameter=1.2,
        layer_length=160.0, layer_thickness=1.5, layer_print_time=20.5,
        deposition_rate=52.8, interpass_target=200.0, num_layers=40,
    )
    return generate_wall(settings, SynthParams(seed=42), points_per_layer=7, n=100)


class TestPredictNextLayer:
    def test_zero_model_maps_identically(self, wall):
        measured = wall.profiles_on(12)
        pred = predict_next_layer(zero_model(100), measured,
                                  wall.settings, wall.schedule)
        assert pred.layer == 13
        assert len(pred.mapped_profiles) == 7
        for got, src in zip(pred.mapped_profiles, measured):
            np.testing.assert_array_equal(got.stacked(), src.stacked())
            assert got.point.layer == 13
            assert got.durations == src.durations

    def test_reconstruction_built(self, wall):
        pred = predict_next_layer(zero_model(100), wall.profiles_on(30),
                                  wall.settings, wall.schedule)
        assert pred.reconstruction.m_star <= 7
        assert pred.reconstruction.layer == 31

    def test_latency_budget(self, wall):
        measured = wall.profiles_on(30)
        model = zero_model(100)
        predict_next_layer(model, measured, wall.settings, wall.schedule)  # warm-up
        runs = [predict_next_layer(model, measured, wall.settings, wall.schedule)
                for _ in range(3)]
        assert all(p.elapsed < 0.1 for p in runs)
        assert min(p.map_seconds for p in runs) < 0.01
        assert min(p.reconstruct_seconds for p in runs) < 0.02

    def test_mixed_layers_rejected(self, wall):
        mixed = wall.profiles_on(3)[:2] + wall.profiles_on(4)[:1]
        with pytest.raises(DomainError):
            predict_next_layer(zero_model(100), mixed, wall.settings, wall.schedule)

    def test_first_layer_guard(self, wall):
        with pytest.raises(ProtocolError, match="first layer"):
            predict_layer(zero_model(100), wall, 1)

    def test_predict_layer_matches_manual(self, wall):
        a = predict_layer(zero_model(100), wall, 9)
        b = predict_next_layer(zero_model(100), wall.profiles_on(8),
                               wall.settings, wall.schedule)
        for pa, pb in zip(a.mapped_profiles, b.mapped_profiles):
            np.testing.assert_array_equal(pa.stacked(), pb.stacked())


class TestPredictPoint:
    def test_training_position_near_mapped_profile(self, wall):
        # at full effective rank the ELM exact-fit composition reproduces a
        # training point up to the discarded below-rank energy (~5e-7 here)
        pred = predict_next_layer(zero_model(100), wall.profiles_on(20),
                                  wall.settings, wall.schedule,
                                  energy_threshold=1.0)
        mapped = pred.mapped_profiles[2]
        got = predict_point(pred, mapped.point.axial_distance, wall.settings)
        rel = np.linalg.norm(got.stacked() - mapped.stacked()) \
            / np.linalg.norm(mapped.stacked())
        assert rel < 1e-5

    def test_training_position_within_truncation_error_at_default(self, wall):
        pred = predict_next_layer(zero_model(100), wall.profiles_on(20),
                                  wall.settings, wall.schedule)
        mapped = pred.mapped_profiles[2]
        got = predict_point(pred, mapped.point.axial_distance, wall.settings)
        rel = np.linalg.norm(got.stacked() - mapped.stacked()) \
            / np.linalg.norm(mapped.stacked())
        assert rel < 0.01

    def test_delay_arithmetic(self, wall):
        pred = predict_next_layer(zero_model(100), wall.profiles_on(20),
                                  wall.settings, wall.schedule)
        prof = predict_point(pred, 60.0, wall.settings)
        assert prof.point.relative_delay == pytest.approx(60.0 / 8.0)
        assert prof.point.layer == 21

    def test_shape_contract(self, wall):
        pred = predict_next_layer(zero_model(100), wall.profiles_on(20),
                                  wall.settings, wall.schedule)
        prof = predict_point(pred, 47.3, wall.settings)
        assert len(prof.curves) == 5 and prof.n == 100

    def test_out_of_range_rejected(self, wall):
        pred = predict_next_layer(zero_model(100), wall.profiles_on(20),
                                  wall.settings, wall.schedule)
        with pytest.raises(DomainError):
            predict_point(pred, 161.0, wall.settings)


@pytest.fixture(scope="module")
def pred(wall):
    return predict_next_layer(zero_model(100), wall.profiles_on(30),
                              wall.settings, wall.schedule)


class TestRenderField:
    def test_time_zero_all_room_but_origin(self, wall, pred):
        frame = render_field(pred, wall.settings, wall.schedule, 0.0)
        assert frame.temps.size == 160
        assert np.all(frame.temps[1:] == ROOM_TEMPERATURE)
        assert frame.temps[0] > 1000.0

    def test_monotone_gradient_after_full_print(self, wall, pred):
        frame = render_field(pred, wall.settings, wall.schedule, 20.5)
        # all deposited; later positions are hotter, judged inside the mapped
        # span where the ELM interpolates instead of extrapolating
        assert np.all(frame.temps > ROOM_TEMPERATURE)
        inner = frame.temps[frame.interior]
        assert inner[-1] > inner[0]
        assert np.mean(np.diff(inner) >= 0) > 0.95

    def test_interior_flags_mapped_span(self, wall, pred):
        frame = render_field(pred, wall.settings, wall.schedule, 20.5)
        span = frame.positions[frame.interior]
        assert span[0] >= 20.0 - 1e-9
        assert span[-1] <= 140.0 + 1e-9

    def test_default_resolution(self, wall, pred):
        frame = render_field(pred, wall.settings, wall.schedule, 5.0)
        assert frame.positions.size == 160
        assert frame.positions[0] == 0.0
        assert frame.positions[-1] == wall.settings.layer_length

    def test_continuity_away_from_front(self, wall, pred):
        a = render_field(pred, wall.settings, wall.schedule, 40.0)
        b = render_field(pred, wall.settings, wall.schedule, 40.1)
        assert np.max(np.abs(b.temps - a.temps)) < 50.0

    def test_horizon_error(self, wall, pred):
        limit = field_horizon(pred)
        render_field(pred, wall.settings, wall.schedule, limit - 1.0)
        with pytest.raises(HorizonError, match="maximum representable"):
            render_field(pred, wall.settings, wall.schedule, limit + 0.1)


class TestEvaluate:
    def test_identical_all_zero(self, wall):
        truth = wall.profiles_on(10)
        report = evaluate(truth, truth)
        assert all(r == 0.0 for r in report.reops())
        assert report.per_layer[10].median == 0.0

    def test_one_scaled_profile(self, wall):
        truth = wall.profiles_on(10)
        preds = list(truth)
        scaled = Profile(truth[0].point, tuple(
            Curve(c.temps * 1.02, c.duration, c.curve_index) for c in truth[0].curves
        ))
        preds[0] = scaled
        report = evaluate(preds, truth)
        values = dict((p.axial_distance, r) for p, r in report.per_point)
        assert values[truth[0].point.axial_distance] == pytest.approx(0.02, abs=1e-12)
        assert report.per_layer[10].median == 0.0
        assert report.per_layer[10].maximum == pytest.approx(0.02, abs=1e-12)

    def test_median_is_sorted_middle(self, wall):
        truth = wall.profiles_on(10)
        preds = [
            Profile(p.point, tuple(
                Curve(c.temps * (1.0 + 0.01 * j), c.duration, c.curve_index)
                for c in p.curves))
            for j, p in enumerate(truth)
        ]
        report = evaluate(preds, truth)
        values = sorted(report.reops())
        assert report.per_layer[10].median == pytest.approx(values[len(values) // 2])

    def test_orphans_rejected(self, wall):
        truth = wall.profiles_on(10)
        with pytest.raises(PairingError):
            evaluate(truth[:-1], truth)

    def test_truncates_truth_to_prediction_duration(self, wall):
        # a prediction carrying the lower layer's shorter durations scores
        # against truth truncated to the same horizon
        lower = wall.profiles_on(10)[0]
        upper = wall.profiles_on(11)[0]
        pred = Profile(upper.point, lower.curves)
        report = evaluate([pred], [upper])
        assert report.reops()[0] < 0.15


class TestCurvePairs:
    def test_full_wall_pair_count(self, wall):
        # 34 usable transitions x 7 points x 5 curves
        assert len(extract_curve_pairs(wall)) == 1190

    def test_training_split_count(self, wall):
        # transitions inside layers 1..30: sources 1..29
        pairs = extract_curve_pairs(wall, layers=list(range(1, 31)))
        assert len(pairs) == 1015

    def test_targets_are_truncated_upper_curves(self, wall):
        pairs = extract_curve_pairs(wall, layers=[5, 6])
        assert len(pairs) == 35
        sample = pairs[0]
        assert sample.target_partial.duration == sample.input_curve.duration
        assert sample.features.dwell_of_source_layer == wall.schedule.for_layer(5)


class TestRunBenchmark:
    def test_zero_epoch_benchmark_runs(self, wall):
        report = run_benchmark(
            wall, wall,
            train_layers=list(range(1, 31)),
            test_layers=[31, 32],
            train_config=TrainConfig(epochs=0, seed=0),
            model_seed=0,
        )
        assert report.train_pairs == 1015
        assert sorted(report.per_layer) == [31, 32]
        assert report.timing[31]["total_seconds"] > 0

    def test_split_overlap_rejected(self, wall):
        with pytest.raises(ProtocolError):
            run_benchmark(wall, wall,
                          train_layers=list(range(1, 31)),
                          test_layers=[30, 31],
                          train_config=TrainConfig(epochs=0))

    def test_deterministic_report(self, wall):
        import json

        kwargs = dict(
            train_layers=list(range(1, 31)), test_layers=[31],
            train_config=TrainConfig(epochs=1, batch_size=256, seed=5),
            model_seed=3,
        )
        a = run_benchmark(wall, wall, **kwargs)
        b = run_benchmark(wall, wall, **kwargs)
        ja = json.dumps({k: v for k, v in a.to_json_dict().items() if k != "timing"})
        jb = json.dumps({k: v for k, v in b.to_json_dict().items() if k != "timing"})
        assert ja == jb
