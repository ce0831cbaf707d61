import numpy as np
import pytest

from fedspectrum.engine import (
    DetectionMetrics,
    EmptyInputError,
    METRICS_HEADER,
    RunResult,
    compare_topologies,
    comparison_table,
    comparison_to_dict,
    evaluate_detection,
    metrics_csv_lines,
    roc_sweep,
    run_all_topologies,
    run_simulation,
    summarize_runs,
)
from fedspectrum.federation import FederationConfig, TrafficStats
from fedspectrum.radio import Observation
from fedspectrum.scenario import Scenario, ScenarioValidationError, SlotSchedule
from fedspectrum.sensing import CostReport, ModelParams, TrainingConfig


def small_scenario(seed=1, **kwargs):
    defaults = dict(
        seed=seed,
        area_size_m=300.0,
        n_sensors=3,
        n_primary_users=1,
        schedule=SlotSchedule(
            n_training_slots=60,
            n_eval_slots=40,
            local_train_period_slots=20,
            federation_period_slots=20,
            window_samples=8,
        ),
        federation=FederationConfig(neighbor_radius_m=400.0),
    )
    defaults.update(kwargs)
    return Scenario(**defaults)


def test_evaluate_detection_balanced_example():
    pairs = [(True, True), (False, True), (True, False), (False, False)]
    m = evaluate_detection(pairs)
    assert (m.tp, m.fn, m.fp, m.tn) == (1, 1, 1, 1)
    assert m.pd == 0.5 and m.pfa == 0.5 and m.accuracy == 0.5


def test_evaluate_detection_empty_raises():
    with pytest.raises(EmptyInputError):
        evaluate_detection([])


def test_metrics_undefined_without_support():
    no_positives = DetectionMetrics(tp=0, fp=2, tn=8, fn=0)
    assert no_positives.pd is None
    assert no_positives.pfa == 0.2
    no_negatives = DetectionMetrics(tp=3, fp=0, tn=0, fn=1)
    assert no_negatives.pfa is None
    assert no_negatives.pd == 0.75
    assert DetectionMetrics(0, 0, 0, 0).accuracy is None


def test_roc_sweep_endpoints_and_monotonicity():
    model = ModelParams("logistic", np.array([2.0, 0.0, 0.0, -1.0]))
    rng = np.random.default_rng(3)
    eval_set = [
        Observation(0, i, np.array([x, 0.0, 0.0]), x > 0.5)
        for i, x in enumerate(rng.normal(0.5, 1.0, size=200))
    ]
    points = roc_sweep(model, eval_set, 101)
    assert len(points) == 101
    assert points[0][0] == 0.0 and points[-1][0] == 1.0
    # threshold 0 accepts everything
    assert points[0][1] == 1.0 and points[0][2] == 1.0
    pds = [p[1] for p in points]
    pfas = [p[2] for p in points]
    assert all(a >= b for a, b in zip(pds, pds[1:]))
    assert all(a >= b for a, b in zip(pfas, pfas[1:]))


def test_roc_sweep_validation():
    model = ModelParams("logistic", np.zeros(4))
    obs = Observation(0, 0, np.zeros(3), True)
    with pytest.raises(ValueError, match="n_points"):
        roc_sweep(model, [obs], 1)
    with pytest.raises(EmptyInputError):
        roc_sweep(model, [], 5)


def test_run_simulation_shapes_and_counts():
    result = run_simulation(small_scenario(), "isolated", 4)
    assert result.topology == "isolated"
    assert result.seed == 4
    assert len(result.per_node_metrics) == 3
    assert len(result.final_models) == 3
    assert len(result.per_node_cost) == 3
    for m in result.per_node_metrics:
        assert m.tp + m.fp + m.tn + m.fn == 40
    g = result.global_metrics
    assert g.tp + g.fp + g.tn + g.fn == 120
    assert result.federation_rounds == 0
    assert result.traffic.total_bytes == 0
    assert result.traffic.messages == 0
    assert all(c.train_macs_accumulated > 0 for c in result.per_node_cost)
    assert all(c.model_bytes == 32 for c in result.per_node_cost)
    assert result.central_aggregation_macs == 0
    assert result.node_aggregation_macs == [0, 0, 0]
    assert result.wall_seconds > 0.0


def test_run_simulation_rejects_bad_inputs():
    with pytest.raises(ValueError, match="topology"):
        run_simulation(small_scenario(), "ring", 1)
    bad = small_scenario()
    bad.schedule.window_samples = 1
    with pytest.raises(ScenarioValidationError):
        run_simulation(bad, "isolated", 1)


def test_run_simulation_deterministic_rerun():
    a = run_simulation(small_scenario(), "gossip", 7)
    b = run_simulation(small_scenario(), "gossip", 7)
    assert a.scenario_digest == b.scenario_digest
    assert a.per_node_metrics == b.per_node_metrics
    assert a.traffic.total_bytes == b.traffic.total_bytes
    for ma, mb in zip(a.final_models, b.final_models):
        np.testing.assert_array_equal(ma.theta, mb.theta)


def test_gossip_zero_radius_degenerates_to_isolated():
    scenario_a = small_scenario()
    scenario_b = small_scenario(federation=FederationConfig(neighbor_radius_m=0.0))
    iso = run_simulation(scenario_a, "isolated", 9)
    gos = run_simulation(scenario_b, "gossip", 9)
    assert gos.traffic.messages == 0
    assert gos.per_node_metrics == iso.per_node_metrics
    for ma, mb in zip(iso.final_models, gos.final_models):
        np.testing.assert_array_equal(ma.theta, mb.theta)


def test_shared_streams_central_matches_single_pool():
    # with identical data and shuffles at every node, FedAvg of identical
    # updates is the update itself, so central must track isolated bitwise-
    # close (only float summation order differs)
    iso = run_simulation(small_scenario(), "isolated", 11, shared_streams=True)
    cen = run_simulation(small_scenario(), "central", 11, shared_streams=True)
    for ma, mb in zip(iso.final_models, cen.final_models):
        assert np.max(np.abs(ma.theta - mb.theta)) < 1e-9
    first = cen.final_models[0].theta
    for m in cen.final_models[1:]:
        np.testing.assert_array_equal(m.theta, first)


def test_eval_phase_does_not_touch_models():
    # a longer frozen phase cannot change the models the training phase built
    with_eval = run_simulation(small_scenario(), "gossip", 13)
    schedule = SlotSchedule(
        n_training_slots=60,
        n_eval_slots=1,
        local_train_period_slots=20,
        federation_period_slots=20,
        window_samples=8,
    )
    short_eval = run_simulation(small_scenario(schedule=schedule), "gossip", 13)
    for ma, mb in zip(with_eval.final_models, short_eval.final_models):
        np.testing.assert_array_equal(ma.theta, mb.theta)


def test_traffic_equals_rounds_times_closed_form():
    result = run_simulation(small_scenario(), "gossip", 15)
    assert result.federation_rounds == 3
    from fedspectrum.federation import build_neighbor_graph
    from fedspectrum.rng import substream
    from fedspectrum.scenario import place_nodes

    placements = place_nodes(small_scenario(), substream(15, "placement"))
    sensors = [p for p in placements if p.kind == "sensor"]
    graph = build_neighbor_graph(sensors, 400.0)
    assert result.traffic.total_bytes == 3 * 48 * graph.sum_degrees()
    assert result.traffic.central_bytes == 0
    assert result.node_aggregation_macs == [3 * graph.degree(i) * 4 for i in range(3)]

    central = run_simulation(small_scenario(), "central", 15)
    assert central.traffic.total_bytes == 3 * 2 * 3 * 48
    assert central.traffic.central_bytes == central.traffic.total_bytes
    assert central.central_aggregation_macs == 3 * 3 * 4


def test_run_all_topologies_order_and_summary():
    scenario = small_scenario()
    runs = run_all_topologies(scenario, [1, 2])
    assert [r.topology for r in runs] == ["isolated"] * 2 + ["gossip"] * 2 + ["central"] * 2
    assert [r.seed for r in runs] == [1, 2, 1, 2, 1, 2]
    report = summarize_runs(runs, [1, 2])
    assert set(report.topologies) == {"isolated", "gossip", "central"}
    assert report.topologies["isolated"].total_bytes == 0.0
    assert report.topologies["gossip"].needs_neighbor_comm is True
    assert report.topologies["central"].needs_neighbor_comm is False
    expected = np.mean([runs[4].traffic.central_bytes, runs[5].traffic.central_bytes])
    assert report.topologies["central"].central_bytes == expected
    with pytest.raises(EmptyInputError):
        run_all_topologies(scenario, [])


def test_metrics_csv_shape_and_global_row():
    runs = run_all_topologies(small_scenario(), [1])
    lines = metrics_csv_lines(runs)
    assert lines[0] == METRICS_HEADER
    assert len(lines) == 1 + 3 * (3 + 1)
    first = lines[1].split(",")
    assert first[0] == "isolated-s1" and first[1] == "isolated"
    assert first[2] == "1" and first[3] == "0"
    gossip_global = next(
        l.split(",") for l in lines if l.startswith("gossip-s1,") and ",global," in l
    )
    per_node = [
        l.split(",") for l in lines if l.startswith("gossip-s1,") and ",global," not in l
    ]
    assert int(gossip_global[7]) == sum(int(r[7]) for r in per_node)
    assert int(gossip_global[8]) == sum(int(r[8]) for r in per_node)
    assert int(gossip_global[9]) == sum(int(r[9]) for r in per_node)
    assert int(gossip_global[10]) == sum(int(r[10]) for r in per_node)


def test_metrics_csv_blank_cell_for_undefined_rate():
    run = RunResult(
        scenario_digest="x" * 16,
        topology="isolated",
        seed=1,
        per_node_metrics=[DetectionMetrics(0, 1, 9, 0)],
        global_metrics=DetectionMetrics(0, 1, 9, 0),
        traffic=TrafficStats(),
        per_node_cost=[CostReport(3, 4, 32, 0)],
        node_aggregation_macs=[0],
        central_aggregation_macs=0,
        federation_rounds=0,
        final_models=[ModelParams("logistic", np.zeros(4))],
        wall_seconds=0.1,
    )
    lines = metrics_csv_lines([run])
    cells = lines[1].split(",")
    assert cells[4] == ""  # pd has no positive support
    assert cells[5] == repr(0.1)


def test_comparison_serialization_and_table():
    report = compare_topologies(small_scenario(), [1])
    payload = comparison_to_dict(report)
    assert list(payload["topologies"]) == ["central", "gossip", "isolated"]
    assert payload["seeds"] == [1]
    assert len(payload["scenario_digest"]) == 16

    table = comparison_table(report)
    lines = table.splitlines()
    assert lines[0].startswith("aspect")
    assert all(t in lines[0] for t in ("isolated", "gossip", "central"))
    assert len(lines) == 2 + 5
    labels = [l.split("|")[0].strip() for l in lines[2:]]
    assert labels == [
        "neighbor communication",
        "topology flexibility",
        "traffic volume (bytes)",
        "aggregation compute (MACs)",
        "detection quality",
    ]
