"""Experiment sweeps, report persistence, and the attribution removal sweep."""

import json

import pytest

from flipset import FlipsetError, Hyperparams, make_synthetic, train
from flipset.experiment import (PointRecord, aggregate, attribution_sweep,
                                flipset_point_record, load_records,
                                run_experiment, summary_dict)
import flipset.experiment as experiment_module


@pytest.fixture(scope="module")
def small_data():
    train_split, test_split = make_synthetic(3, 150, 25, 6, 2.0, 0.0)
    return train_split, test_split, Hyperparams(lam=0.1)


class TestRunExperiment:
    def test_rates_and_shapes(self, small_data, tmp_path):
        train_split, test_split, hyper = small_data
        report = run_experiment(train_split, test_split, hyper, "greedy",
                                dataset_name="blobs", feature_kind="synthetic",
                                out_dir=tmp_path)
        assert report.n_test == test_split.n
        assert 0.0 <= report.flip_rate <= report.found_rate <= 1.0
        assert len(report.k_values) == report.n_found
        assert len(report.k_vs_confidence) == report.n_found
        assert report.wall_time_seconds > 0
        records = load_records(tmp_path)
        assert len(records) == test_split.n
        assert [r.test_index for r in records] == sorted(r.test_index for r in records)

    def test_verified_outcomes_only_on_found(self, small_data, tmp_path):
        train_split, test_split, hyper = small_data
        run_experiment(train_split, test_split, hyper, "iterative",
                       dataset_name="blobs", feature_kind="synthetic", out_dir=tmp_path)
        for record in load_records(tmp_path):
            if record.found:
                assert record.verified in ("flipped", "not_flipped")
            else:
                assert record.verified is None

    def test_aggregation_is_idempotent_through_disk(self, small_data, tmp_path):
        train_split, test_split, hyper = small_data
        report = run_experiment(train_split, test_split, hyper, "greedy",
                                dataset_name="blobs", feature_kind="synthetic",
                                out_dir=tmp_path)
        recomputed = aggregate(load_records(tmp_path), dataset_name="blobs",
                               feature_kind="synthetic", algorithm="greedy",
                               wall_time_seconds=report.wall_time_seconds)
        assert summary_dict(recomputed) == summary_dict(report)

    def test_summary_json_deterministic_across_reruns(self, small_data, tmp_path):
        train_split, test_split, hyper = small_data
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        for out in (dir_a, dir_b):
            run_experiment(train_split, test_split, hyper, "iterative",
                           dataset_name="blobs", feature_kind="synthetic",
                           out_dir=out, parallelism=2)
        assert (dir_a / "summary.json").read_bytes() == (dir_b / "summary.json").read_bytes()
        assert (dir_a / "records.jsonl").read_bytes() == (dir_b / "records.jsonl").read_bytes()

    def test_resume_skips_done_points(self, small_data, tmp_path, monkeypatch):
        train_split, test_split, hyper = small_data
        report = run_experiment(train_split, test_split, hyper, "greedy",
                                dataset_name="blobs", feature_kind="synthetic",
                                out_dir=tmp_path)
        # drop half the records, then resume with the search stubbed out for
        # already-recorded indices: only missing points may be recomputed
        records = load_records(tmp_path)
        kept = records[::2]
        from flipset.ioutil import write_jsonl
        write_jsonl(tmp_path / "records.jsonl", (r.to_dict() for r in kept))
        done = {r.test_index for r in kept}

        real = experiment_module.flipset_point_record

        def guarded(model, tr, te, test_index, algorithm, max_passes=25, op=None):
            assert test_index not in done, "resume recomputed a finished point"
            return real(model, tr, te, test_index, algorithm, max_passes=max_passes, op=op)

        monkeypatch.setattr(experiment_module, "flipset_point_record", guarded)
        resumed = run_experiment(train_split, test_split, hyper, "greedy",
                                 dataset_name="blobs", feature_kind="synthetic",
                                 out_dir=tmp_path)
        assert summary_dict(resumed) == summary_dict(report)

    def test_per_point_failures_recorded_not_raised(self, small_data, tmp_path, monkeypatch):
        train_split, test_split, hyper = small_data
        real = experiment_module.greedy_flipset

        def flaky(model, split, x_t, tau=None, *, test_index=-1, op=None):
            if test_index == 2:
                raise FlipsetError("synthetic failure for testing")
            return real(model, split, x_t, tau, test_index=test_index, op=op)

        monkeypatch.setattr(experiment_module, "greedy_flipset", flaky)
        report = run_experiment(train_split, test_split, hyper, "greedy",
                                dataset_name="blobs", feature_kind="synthetic",
                                out_dir=tmp_path)
        records = {r.test_index: r for r in load_records(tmp_path)}
        assert records[2].error is not None and "synthetic failure" in records[2].error
        assert not records[2].found
        assert report.n_test == test_split.n

    def test_csv_exports(self, small_data, tmp_path):
        train_split, test_split, hyper = small_data
        run_experiment(train_split, test_split, hyper, "greedy",
                       dataset_name="blobs", feature_kind="synthetic", out_dir=tmp_path)
        for name in ("k_histogram.csv", "k_vs_confidence.csv"):
            lines = (tmp_path / name).read_text().splitlines()
            assert lines[0] == "test_index,k,prob,abs_margin"
            assert len(lines) - 1 == len(load_records(tmp_path)) - sum(
                1 for r in load_records(tmp_path) if not r.found)

    def test_timing_separate_from_summary(self, small_data, tmp_path):
        train_split, test_split, hyper = small_data
        run_experiment(train_split, test_split, hyper, "greedy",
                       dataset_name="blobs", feature_kind="synthetic", out_dir=tmp_path)
        summary = json.loads((tmp_path / "summary.json").read_text())
        timing = json.loads((tmp_path / "timing.json").read_text())
        assert "wall_time_seconds" not in summary
        assert timing["wall_time_seconds"] > 0


class TestPointRecord:
    def test_round_trip(self):
        rec = PointRecord(test_index=4, original_prob=0.81, original_label=1,
                          found=True, k=2, members=(5, 9), estimated_prob=0.42,
                          outer_passes=3, verified="flipped", retrained_prob=0.44,
                          error=None)
        assert PointRecord.from_dict(json.loads(json.dumps(rec.to_dict()))) == rec


class TestAttributionSweep:
    def test_random_at_k_zero_is_exactly_zero(self, small_data):
        train_split, test_split, hyper = small_data
        report = attribution_sweep(train_split, test_split, hyper, ["RANDOM"],
                                   [0], test_indices=range(5))
        assert report.curves["RANDOM"] == (0.0,)

    def test_identical_scores_give_identical_curves(self, small_data, monkeypatch):
        train_split, test_split, hyper = small_data
        from flipset.influence import AttributionScores
        real = experiment_module.attribution

        def aliased(method, model, split, z_t, seed=0):
            if method == "EUC":  # alias EUC to DOT's scores
                scores = real("DOT", model, split, z_t, seed=seed)
                return AttributionScores(method="EUC", scores=scores.scores)
            return real(method, model, split, z_t, seed=seed)

        monkeypatch.setattr(experiment_module, "attribution", aliased)
        report = attribution_sweep(train_split, test_split, hyper, ["DOT", "EUC"],
                                   [3, 9], test_indices=range(4))
        assert report.curves["DOT"] == report.curves["EUC"]

    def test_influence_dominates_random_on_small_grid(self, small_data):
        train_split, test_split, hyper = small_data
        report = attribution_sweep(train_split, test_split, hyper, ["IP", "RANDOM"],
                                   [5, 15], test_indices=range(8))
        for j in range(2):
            assert report.curves["IP"][j] > report.curves["RANDOM"][j]

    def test_shared_k_grid_and_csv(self, small_data, tmp_path):
        train_split, test_split, hyper = small_data
        report = attribution_sweep(train_split, test_split, hyper, ["IP", "EUC"],
                                   [2, 4], test_indices=range(3), out_dir=tmp_path)
        assert set(len(curve) for curve in report.curves.values()) == {2}
        lines = (tmp_path / "attribution_sweep.csv").read_text().splitlines()
        assert lines[0] == "method,k,mean_abs_delta"
        assert len(lines) == 1 + 2 * 2

    def test_k_grid_validation(self, small_data):
        train_split, test_split, hyper = small_data
        with pytest.raises(Exception):
            attribution_sweep(train_split, test_split, hyper, ["IP"], [train_split.n])
        with pytest.raises(Exception):
            attribution_sweep(train_split, test_split, hyper, ["BOGUS"], [2])
