import numpy as np
import pytest

from src.errors import ConfigurationError, ContractError, NumericError
from src.schemas.pydantic_schemas import BestMode, MetricReport, WorstMode
from src.tpeval import (
    SampleSet,
    WindowEvaluation,
    ade,
    aggregate,
    auc,
    auc_table,
    combine_reports,
    evaluate_scene,
    evaluate_window,
    fde,
    format_cell,
    format_report_table,
    merge_auc_tables,
    metric_rows,
    num_samples_sweep,
    oracle_scorer,
    psi_sweep,
    score_matrix,
    topk_filter,
    write_table,
)

rng = np.random.default_rng(0)


def _brute_force_auc(pos, neg):
    wins = sum(1.0 if p < n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_matches_pair_counting():
    for _ in range(100):
        pos = rng.integers(0, 20, size=rng.integers(1, 100)).astype(float)
        neg = rng.integers(0, 20, size=rng.integers(1, 100)).astype(float)
        assert auc(pos, neg) == pytest.approx(_brute_force_auc(pos, neg), abs=1e-9)


def test_auc_edge_cases():
    assert auc([0.0, 0.1], [1.0, 2.0]) == 1.0
    assert auc([1.0, 2.0], [0.0, 0.1]) == 0.0
    assert auc([1.0, 1.0], [1.0]) == 0.5
    with pytest.raises(ContractError):
        auc([], [1.0])
    with pytest.raises(ContractError):
        auc([np.nan], [1.0])


def test_ade_fde():
    gt = np.zeros((2, 3, 2))
    pred = np.zeros((2, 3, 2))
    pred[0, :, 0] = [3.0, 0.0, 6.0]
    np.testing.assert_allclose(ade(pred, gt), [3.0, 0.0])
    np.testing.assert_allclose(fde(pred, gt), [6.0, 0.0])
    assert ade(np.zeros((5, 2, 3, 2)), gt).shape == (5, 2)
    with pytest.raises(ContractError):
        ade(np.zeros((2, 4, 2)), gt)


def test_topk_filter_picks_lowest_with_stable_ties():
    matrix = np.array([[3.0, 1.0, 2.0, 1.0], [0.0, 0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(topk_filter(matrix, 2), [[1, 3], [0, 1]])
    with pytest.raises(ContractError):
        topk_filter(matrix, 5)
    with pytest.raises(ContractError):
        topk_filter(matrix, 0)


def test_score_matrix_shape_and_non_finite_scores():
    samples = SampleSet(rng.normal(size=(4, 3, 12, 2)))
    history = rng.normal(size=(3, 8, 2))
    matrix = score_matrix(lambda future, hist: future[:, -1, 0], samples, history)
    assert matrix.shape == (3, 4)
    np.testing.assert_allclose(matrix[:, 2], samples.samples[2, :, -1, 0])
    with pytest.raises(NumericError):
        score_matrix(lambda future, hist: np.full(3, np.nan), samples, history)
    with pytest.raises(ContractError):
        score_matrix(lambda future, hist: np.zeros(2), samples, history)


def _window(num_samples=10, n=4):
    truth = rng.normal(size=(n, 12, 2))
    samples = SampleSet(truth[None] + rng.normal(scale=0.5, size=(num_samples, n, 12, 2)))
    return samples, truth


def test_oracle_filter_matches_brute_force():
    for _ in range(100):
        psi = int(rng.integers(1, 11))
        samples, truth = _window()
        scores = score_matrix(oracle_scorer(truth), samples, None)
        full = aggregate(samples, truth)
        filtered = aggregate(samples, truth, topk_filter(scores, psi))
        per_ped = ade(samples.samples, truth).T
        expected = np.mean([np.mean(np.sort(row)[:psi]) for row in per_ped])
        assert filtered.average_ade == pytest.approx(expected, abs=1e-9)
        assert filtered.best_ade == pytest.approx(full.best_ade, abs=1e-9)


def test_aggregate_kinds():
    truth = np.zeros((2, 2, 2))
    offsets = np.array([[1.0, 4.0], [2.0, 1.0], [3.0, 2.0]])  # sample x pedestrian
    samples = np.zeros((3, 2, 2, 2))
    samples[..., 0] = offsets[:, :, None]
    report = aggregate(SampleSet(samples), truth)
    assert report.best_ade == pytest.approx((1.0 + 1.0) / 2)
    assert report.average_ade == pytest.approx((2.0 + 7.0 / 3) / 2)
    assert report.worst_ade == pytest.approx(2.5)  # sample 0 and 2 both average 2.5
    sample_best = aggregate(SampleSet(samples), truth, best_mode=BestMode.SAMPLE)
    assert sample_best.best_ade == pytest.approx(1.5)
    assembled_worst = aggregate(SampleSet(samples), truth, worst_mode=WorstMode.ASSEMBLED)
    assert assembled_worst.worst_ade == pytest.approx((3.0 + 4.0) / 2)


def test_filter_with_psi_equal_to_num_samples_is_identity():
    samples, truth = _window(num_samples=6)
    evaluation = WindowEvaluation(samples, truth, rng.normal(size=(4, 6)))
    full, filtered = evaluate_window(evaluation, psi=6)
    assert filtered.model_dump() == pytest.approx(full.model_dump(), abs=1e-12)


def test_best_is_non_increasing_in_psi():
    evaluations = []
    for _ in range(20):
        samples, truth = _window(num_samples=30)
        evaluations.append(WindowEvaluation(samples, truth, rng.normal(size=(4, 30))))
    sweep = psi_sweep(evaluations, [5, 10, 15, 20, 25, 40])
    assert list(sweep["psi"]) == [5, 10, 15, 20, 25]
    assert (np.diff(sweep["best_ade"]) <= 1e-12).all()


def test_num_samples_sweep_skips_infeasible_counts():
    evaluations = []
    for _ in range(3):
        samples, truth = _window(num_samples=20)
        evaluations.append(WindowEvaluation(samples, truth, rng.normal(size=(4, 20))))
    sweep = num_samples_sweep(evaluations, [4, 10, 20, 40], psi=5)
    assert list(sweep["num_samples"]) == [10, 20]
    assert {"all_average_ade", "top_average_ade"} <= set(sweep.columns)


def test_combine_reports_weights_by_pedestrians():
    a = MetricReport(best_ade=1, best_fde=1, average_ade=1, average_fde=1, worst_ade=1, worst_fde=1)
    b = MetricReport(best_ade=4, best_fde=4, average_ade=4, average_fde=4, worst_ade=4, worst_fde=4)
    assert combine_reports([a, b], [2, 1]).average_ade == pytest.approx(2.0)
    with pytest.raises(ContractError):
        combine_reports([])


def test_scene_report_is_weighted_over_windows():
    evaluations = []
    for n in (1, 3):
        samples, truth = _window(num_samples=5, n=n)
        evaluations.append(WindowEvaluation(samples, truth, rng.normal(size=(n, 5))))
    full, _ = evaluate_scene(evaluations, psi=2)
    per_window = [evaluate_window(e, 2)[0].average_ade for e in evaluations]
    assert full.average_ade == pytest.approx((per_window[0] + 3 * per_window[1]) / 4)


def test_report_tables(tmp_path):
    report = MetricReport(best_ade=0.449, best_fde=0.912, average_ade=1.0, average_fde=2.0, worst_ade=3, worst_fde=4)
    assert format_cell(0.449, 0.912) == "0.45 / 0.91"
    rows = metric_rows("cv-gaussian", report, report, 10)
    labels = [label for _, label, _ in rows]
    assert "Average" in labels and "Average (TPAD Top-10)" in labels
    frame = format_report_table(rows, "zara2")
    assert frame.loc[("cv-gaussian", "Best"), "zara2"] == "0.45 / 0.91"
    path = write_table(auc_table({"searched": 0.78612, "mnad": 0.5}, "zara2"), tmp_path / "auc.csv")
    assert path.read_text().splitlines()[1] == "searched,0.7861"


def test_merge_auc_tables_adds_the_average_over_scenes():
    eth = auc_table({"searched": 0.8, "mnad": 0.5, "untrained": 0.52}, "eth")
    hotel = auc_table({"searched": 0.7, "mnad": 0.6}, "hotel")
    merged = merge_auc_tables([eth, hotel])
    assert list(merged.columns) == ["eth", "hotel", "Average"]
    assert list(merged.index) == ["searched", "mnad", "untrained"]
    assert merged.loc["searched", "Average"] == pytest.approx(0.75)
    assert merged.loc["mnad", "Average"] == pytest.approx(0.55)
    # a model missing from one scene averages over the scenes it has
    assert merged.loc["untrained", "Average"] == pytest.approx(0.52)

    again = merge_auc_tables([merged[["eth", "hotel", "Average"]]])
    assert again.loc["searched", "Average"] == pytest.approx(0.75)
    with pytest.raises(ConfigurationError):
        merge_auc_tables([eth, eth])
    with pytest.raises(ContractError):
        merge_auc_tables([])
