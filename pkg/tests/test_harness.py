"""Tests for fixtures, trial campaigns and densification."""
import math
from unittest.mock import patch

import numpy as np
import pytest
import voluptuous as vol

from packrigid.const import (
    DEFAULT_TRIALS,
    RESULT_AMBIGUOUS,
    RESULT_FAILED,
    RESULT_SUCCESS,
    BodyFamily,
    TrialStage,
)
from packrigid.geometry.body import (
    Disc,
    ExpFamilyBody,
    PNormBody,
    ProfileBody,
    body_distance,
)
from packrigid.geometry.packer import PackingError, continue_packing
from packrigid.geometry.rigidity import independence_test
from packrigid.geometry.sparsity import (
    ContactGraph,
    pebble_sparse,
    random_sparse_planar_graph,
    random_triangulation,
)
from packrigid.harness import (
    DensifyConfig,
    DensifyError,
    FixtureError,
    TrialConfig,
    TrialRecord,
    TrialReport,
    analyze_packing,
    async_run_theorem_trials,
    contact_directions,
    densify_independent,
    run_theorem_trials,
    run_trial,
    sample_body,
    square_counterexample,
    stress_report,
)

from .conftest import K4_EDGES

SMALL_CAMPAIGN = TrialConfig(
    trials=3, families=(BodyFamily.PNorm,), n_range=(4, 5), master_seed=5, workers=2
)


def test_square_counterexample_layout(square):
    assert np.allclose(square.r, [5.0, 1.0, 5.0, 1.0])
    assert np.allclose(square.p, [[6.0, 0.0], [0.0, 4.0], [-6.0, 0.0], [0.0, -4.0]])
    assert square.graph.edges == ((0, 1), (1, 2), (2, 3), (0, 3))
    assert square.is_valid()
    directions = contact_directions(square)
    assert np.allclose(square.body.norm(directions), 1.0)


@pytest.mark.parametrize("t", [0.5, 0.2, -1.0])
def test_square_counterexample_needs_separated_squares(t):
    with pytest.raises(FixtureError):
        square_counterexample(t)


def test_stress_report_of_the_square(square):
    report = stress_report(square)
    assert report["framework_rank"] == 3
    assert report["length_matrix_rank"] == 4
    assert np.allclose(report["framework_stress"], [1.0, 1.0, -1.0, -1.0])
    assert report["support_residual"] <= 1e-9
    assert report["edge_length_stress"] is None
    assert report["vertex_indices"] == {"0": 2, "1": 0, "2": 2, "3": 0}
    assert report["index_upper_bound_holds"]


def test_analyze_disc_k4(disc_k4):
    report = analyze_packing(disc_k4)
    assert report["k"] == 3
    assert report["sparse"] == "violating"
    assert report["sparse_22"] == "tight"
    assert report["rank"] == 5
    assert not report["independent"]
    assert not report["rank_ambiguous"]
    assert report["kernel_dim"] == 3
    assert report["rigidity"] == "rigid"
    assert report["planar_graph"]
    assert report["crossings"] == 0
    assert report["min_gap"] is None
    assert report["valid"]


def test_analyze_exp_family_k4(exp_k4_open):
    report = analyze_packing(exp_k4_open)
    assert report["k"] == 2
    assert report["sparse"] == "sparse"
    assert report["independent"]
    assert report["rank"] == 5
    assert report["min_gap"] > 0.0


@pytest.mark.parametrize(
    "changes",
    [
        {"trials": 0},
        {"families": ()},
        {"n_range": (3, 6)},
        {"n_range": (8, 6)},
        {"radii_perturbation": (0.0, 1e-2)},
    ],
    ids=["trials", "families", "small-n", "reversed-n", "perturbation"],
)
def test_trial_config_validation(changes):
    with pytest.raises(ValueError):
        TrialConfig(**changes)


def test_trial_config_from_dict():
    cfg = TrialConfig.from_dict({})
    assert cfg.trials == DEFAULT_TRIALS
    assert cfg.subgraph_edges is None
    assert cfg.edge_range(6) == (5, 10)

    cfg = TrialConfig.from_dict(
        {"trials": 7, "families": ["disc"], "subgraph_edges": [2, 100], "unknown": 1}
    )
    assert cfg.trials == 7
    assert cfg.families == (BodyFamily.Disc,)
    assert cfg.edge_range(6) == (5, 12)
    with pytest.raises(vol.Invalid):
        TrialConfig.from_dict({"families": ["hexagon"]})
    with pytest.raises(vol.Invalid):
        TrialConfig.from_dict({"n_range": [4]})


@pytest.mark.parametrize(
    "family,kind",
    [
        (BodyFamily.Disc, Disc),
        (BodyFamily.PNorm, PNormBody),
        (BodyFamily.ExpFamily, ExpFamilyBody),
        (BodyFamily.Profile, ProfileBody),
    ],
)
def test_sample_body(family, kind):
    body = sample_body(family, np.random.default_rng(2))
    assert isinstance(body, kind)
    assert body.smooth
    if family is BodyFamily.ExpFamily:
        assert body.w > math.log(2 * len(body.directions))


def test_run_trial_is_reproducible():
    first = run_trial(SMALL_CAMPAIGN, 1)
    assert run_trial(SMALL_CAMPAIGN, 1) == first
    assert first.family == BodyFamily.PNorm.value
    assert 4 <= first.n <= 5


def test_run_trial_reports_the_failing_stage():
    with patch(
        "packrigid.harness.body_pack", side_effect=PackingError("no packing")
    ):
        record = run_trial(SMALL_CAMPAIGN, 0)
    assert record.status == RESULT_FAILED
    assert record.stage == TrialStage.Pack.value
    assert record.error == "PackingError: no packing"
    assert not record.completed


async def test_campaign_runs_the_same_on_a_pool():
    report = await async_run_theorem_trials(SMALL_CAMPAIGN)
    assert report.total == 3
    assert [rec.index for rec in report.records] == [0, 1, 2]
    assert len(report.completed) + report.failed + report.ambiguous == 3
    assert run_theorem_trials(SMALL_CAMPAIGN) == report


def _record(index, status=RESULT_SUCCESS, **values):
    return TrialRecord(index, "pnorm", 6, 9, status, **values)


def test_trial_report_aggregates_completed_trials():
    fields = {"k": 2, "sparse": True, "planar": True, "independent": True}
    records = (
        _record(3, RESULT_AMBIGUOUS, **fields),
        _record(0, tight=True, kernel_dim=2, **fields),
        _record(2, RESULT_FAILED, stage="flow", error="FlowError: stuck"),
        _record(1, tight=False, kernel_dim=3, **fields),
    )
    report = TrialReport(records)
    assert [rec.index for rec in report.records] == [0, 1, 2, 3]
    assert report.total == 4
    assert len(report.completed) == 2
    assert report.failed == 1
    assert report.ambiguous == 1
    assert report.failures_by_stage() == {"flow": 1}
    assert report.sparse_rate == 1.0
    assert report.independence_rate == 1.0
    assert report.tight_kernel_rate == 1.0
    assert report.ambiguous_rate == 0.25
    # too many rank-ambiguous trials
    assert not report.passed
    table = report.summary_table()
    assert "failed at flow" in table
    assert table.endswith("FAILED")
    assert report.as_dict()["records"][2]["stage"] == "flow"

    clean = TrialReport(records[1::2])
    assert clean.passed
    assert clean.summary_table().endswith("PASSED")

    # a failed trial counts against the campaign, whatever the completed ones say
    one_failure = TrialReport(records[1::2] + records[2:3])
    assert one_failure.failure_rate == pytest.approx(1.0 / 3.0)
    assert not one_failure.passed
    assert "1 (33.3%)" in one_failure.summary_table()
    assert one_failure.as_dict()["failure_rate"] == pytest.approx(1.0 / 3.0)


@pytest.mark.parametrize("completed,passed", [(20, True), (19, False), (1, False)])
def test_trial_report_failure_budget(completed, passed):
    fields = {"k": 2, "sparse": True, "planar": True, "independent": True}
    records = tuple(_record(i, tight=False, **fields) for i in range(completed))
    failure = _record(completed, RESULT_FAILED, stage="resolve", error="PackingError")
    report = TrialReport(records + (failure,))
    assert report.failed == 1
    assert report.passed is passed


def test_trial_report_flags_dependent_trials():
    fields = {"k": 2, "sparse": True, "planar": True, "tight": True}
    report = TrialReport(
        (
            _record(0, independent=True, kernel_dim=2, **fields),
            _record(1, independent=False, kernel_dim=3, **fields),
        )
    )
    assert report.independence_rate == 0.5
    assert report.tight_kernel_rate == 0.5
    assert not report.passed


def test_empty_trial_report():
    report = TrialReport(())
    assert report.total == 0
    assert report.sparse_rate is None
    assert report.ambiguous_rate == 0.0
    assert not report.passed
    assert "n/a" in report.summary_table()


def test_densify_config_validation():
    with pytest.raises(ValueError):
        DensifyConfig(eps=0.0)
    with pytest.raises(ValueError):
        DensifyConfig(retries=0)


def test_densify_k4_minus_an_edge(exp_body):
    graph = ContactGraph(4, [edge for edge in K4_EDGES if edge != (0, 3)])
    with patch(
        "packrigid.harness.continue_packing", wraps=continue_packing
    ) as continued:
        new_body, packing = densify_independent(exp_body, graph, seed=6)
    continued.assert_called_once()
    assert continued.call_args.args[1] is new_body
    assert packing.body is new_body
    assert packing.graph == graph
    assert packing.is_valid()
    assert body_distance(exp_body, new_body) <= 1e-2
    assert independence_test(packing)


def test_densify_rejects_dense_graphs(exp_body):
    with pytest.raises(DensifyError) as err:
        densify_independent(exp_body, random_triangulation(5, seed=1), seed=0)
    assert err.value.stage is TrialStage.Sample


def test_densify_reports_the_last_failing_stage(exp_body, caplog):
    graph = ContactGraph(4, [edge for edge in K4_EDGES if edge != (0, 3)])
    cfg = DensifyConfig(retries=2)
    with patch(
        "packrigid.harness.body_pack", side_effect=PackingError("no packing")
    ):
        with pytest.raises(DensifyError) as err:
            densify_independent(exp_body, graph, seed=0, cfg=cfg)
    assert err.value.stage is TrialStage.Pack
    assert "no packing" in str(err.value)
    assert caplog.text.count("Densify attempt") == 2


@pytest.mark.slow
def test_densify_random_sparse_planar_graphs(exp_body):
    rng = np.random.default_rng(17)
    densified = 0
    for seed in range(10):
        n = int(rng.integers(5, 11))
        m = int(rng.integers(n - 1, 2 * n - 1))
        graph, host = random_sparse_planar_graph(n, m, seed)
        assert pebble_sparse(graph, 2).is_sparse
        try:
            new_body, packing = densify_independent(
                exp_body, graph, seed=seed, triangulation=host
            )
        except DensifyError:
            continue
        assert body_distance(exp_body, new_body) <= DensifyConfig().eps
        assert packing.graph == graph.with_outer(None)
        assert independence_test(packing)
        densified += 1
    assert densified >= 9


@pytest.mark.slow
async def test_default_campaign_agrees_with_the_sparsity_theorem():
    report = await async_run_theorem_trials(TrialConfig())
    assert report.total == DEFAULT_TRIALS
    assert report.failure_rate < 0.05, report.failures_by_stage()
    assert report.ambiguous_rate < 0.05
    assert report.sparse_rate == 1.0
    assert report.planar_rate == 1.0
    assert report.independence_rate == 1.0
    assert report.tight_kernel_rate in (None, 1.0)
    assert report.passed
