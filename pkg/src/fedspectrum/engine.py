"""Slot-synchronous simulation engine and topology comparison.

A run has two phases.  Training slots: every slot steps the primary-user
chains and gives each sensor one observation; every
``local_train_period_slots`` each node trains on its buffer and clears it;
every ``federation_period_slots`` the selected exchange (gossip round or
central FedAvg round) fires, training first when both land on the same slot.
Eval slots: models are frozen and only confusion counts accumulate.

Random sub-streams are labeled so modules cannot disturb each other:
``placement``, ``traffic``, ``init``, ``obs:<node_id>``, ``train:<node_id>``
(``obs:shared``/``train:shared`` when ``shared_streams`` is set, which feeds
every node one identical observation and shuffle stream for degeneracy
tests).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .federation import (
    FederationConfig,
    TOPOLOGIES,
    TrafficStats,
    build_neighbor_graph,
    central_round,
    gossip_round,
    traffic_of_round,
)
from .radio import Observation, PuState, pu_activity_step, synthesize_observation
from .rng import substream
from .scenario import (
    Scenario,
    ScenarioValidationError,
    place_nodes,
    scenario_digest,
    validate_scenario,
)
from .sensing import (
    CostReport,
    ModelParams,
    cost_constants,
    init_model,
    model_cost,
    predict,
    train_local,
)


class EmptyInputError(ValueError):
    """Metrics were requested for an empty prediction list."""


@dataclass(frozen=True)
class DetectionMetrics:
    """Confusion counts with derived rates; rates without support are None."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def pd(self) -> float | None:
        positives = self.tp + self.fn
        return self.tp / positives if positives else None

    @property
    def pfa(self) -> float | None:
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else None

    @property
    def accuracy(self) -> float | None:
        total = self.tp + self.fp + self.tn + self.fn
        return (self.tp + self.tn) / total if total else None


def evaluate_detection(pairs: Sequence[tuple[bool, bool]]) -> DetectionMetrics:
    """Confusion counts for (predicted, truth) pairs."""
    if len(pairs) == 0:
        raise EmptyInputError("pairs: nothing to evaluate")
    tp = fp = tn = fn = 0
    for predicted, truth in pairs:
        if predicted and truth:
            tp += 1
        elif predicted and not truth:
            fp += 1
        elif not predicted and truth:
            fn += 1
        else:
            tn += 1
    return DetectionMetrics(tp, fp, tn, fn)


@dataclass
class RunResult:
    """Everything one simulation produced.

    ``wall_seconds`` is informational only and excluded from all serialized
    outputs so reruns stay byte-identical.
    """

    scenario_digest: str
    topology: str
    seed: int
    per_node_metrics: list[DetectionMetrics]
    global_metrics: DetectionMetrics
    traffic: TrafficStats
    per_node_cost: list[CostReport]
    node_aggregation_macs: list[int]
    central_aggregation_macs: int
    federation_rounds: int
    final_models: list[ModelParams]
    wall_seconds: float

    def busiest_node_bytes(self) -> int:
        n = len(self.per_node_metrics)
        return max(self.traffic.node_bytes(i) for i in range(n))


def run_simulation(
    scenario: Scenario,
    topology: str,
    seed: int,
    *,
    shared_streams: bool = False,
) -> RunResult:
    """Simulate one (scenario, topology, seed) combination.

    Args:
        scenario: validated experiment description.
        topology: "isolated", "gossip", or "central"; overrides the
            scenario's federation topology for this run.
        seed: master seed for every labeled sub-stream.
        shared_streams: test hook; all nodes receive one identical
            observation stream (synthesized at sensor 0) and identical
            training shuffles.

    Returns:
        RunResult with per-node and global metrics, traffic, and costs.
    """
    violations = validate_scenario(scenario)
    if violations:
        raise ScenarioValidationError("; ".join(violations))
    if topology not in TOPOLOGIES:
        raise ValueError(
            f"topology: must be one of {TOPOLOGIES} (got {topology!r})"
        )
    started = time.perf_counter()

    placements = place_nodes(scenario, substream(seed, "placement"))
    sensors = [p for p in placements if p.kind == "sensor"]
    pus = [p for p in placements if p.kind == "primary_user"]
    central_id = next(p.node_id for p in placements if p.kind == "central")
    n = len(sensors)

    cfg = replace(scenario.federation, topology=topology)
    graph = (
        build_neighbor_graph(sensors, cfg.neighbor_radius_m)
        if topology == "gossip"
        else None
    )

    tc = scenario.training
    base_model = init_model(tc.model_kind, tc, substream(seed, "init"))
    models = [base_model.copy() for _ in range(n)]
    macs_per_inference, param_count = cost_constants(tc.model_kind)

    if shared_streams:
        obs_rngs = [substream(seed, "obs:shared")]
        train_rngs = [substream(seed, "train:shared") for _ in range(n)]
    else:
        obs_rngs = [substream(seed, f"obs:{p.node_id}") for p in sensors]
        train_rngs = [substream(seed, f"train:{p.node_id}") for p in sensors]
    traffic_rng = substream(seed, "traffic")

    pu_states = [PuState(p.node_id, False) for p in pus]
    buffers: list[list[Observation]] = [[] for _ in range(n)]
    train_macs = [0] * n
    merge_macs = [0] * n
    central_macs = 0
    traffic = TrafficStats()
    rounds = 0
    schedule = scenario.schedule

    def sense(slot: int) -> list[Observation]:
        nonlocal pu_states
        pu_states = [
            pu_activity_step(st, scenario.pu_traffic, traffic_rng)
            for st in pu_states
        ]
        active = list(zip(pus, pu_states))
        if shared_streams:
            shared = synthesize_observation(
                sensors[0],
                active,
                scenario.channel,
                scenario.pu_traffic,
                schedule.window_samples,
                slot,
                obs_rngs[0],
            )
            return [
                Observation(p.node_id, slot, shared.features.copy(), shared.truth_occupied)
                for p in sensors
            ]
        return [
            synthesize_observation(
                sensor,
                active,
                scenario.channel,
                scenario.pu_traffic,
                schedule.window_samples,
                slot,
                obs_rngs[i],
            )
            for i, sensor in enumerate(sensors)
        ]

    for slot in range(1, schedule.n_training_slots + 1):
        for i, obs in enumerate(sense(slot)):
            buffers[i].append(obs)
        if slot % schedule.local_train_period_slots == 0:
            for i in range(n):
                if not buffers[i]:
                    continue
                models[i], delta = train_local(models[i], buffers[i], tc, train_rngs[i])
                train_macs[i] += delta.train_macs_accumulated
                buffers[i].clear()
        if topology != "isolated" and slot % schedule.federation_period_slots == 0:
            rounds += 1
            if topology == "gossip":
                models, messages = gossip_round(models, graph, sensors, cfg, rounds)
                traffic.add(traffic_of_round(messages, central_id))
                for i in range(n):
                    merge_macs[i] += graph.degree(i) * param_count
            else:
                models, _, round_traffic = central_round(models, cfg, rounds, central_id)
                traffic.add(round_traffic)
                central_macs += n * param_count

    counts = np.zeros((n, 4), dtype=np.int64)  # tp, fp, tn, fn
    for slot in range(1, schedule.n_eval_slots + 1):
        for i, obs in enumerate(sense(slot)):
            predicted = predict(models[i], obs.features) >= 0.5
            truth = obs.truth_occupied
            if predicted and truth:
                counts[i, 0] += 1
            elif predicted:
                counts[i, 1] += 1
            elif truth:
                counts[i, 3] += 1
            else:
                counts[i, 2] += 1

    per_node = [
        DetectionMetrics(int(c[0]), int(c[1]), int(c[2]), int(c[3])) for c in counts
    ]
    total = counts.sum(axis=0)
    global_metrics = DetectionMetrics(
        int(total[0]), int(total[1]), int(total[2]), int(total[3])
    )
    costs = [
        CostReport(macs_per_inference, param_count, 8 * param_count, train_macs[i])
        for i in range(n)
    ]
    return RunResult(
        scenario_digest=scenario_digest(scenario),
        topology=topology,
        seed=seed,
        per_node_metrics=per_node,
        global_metrics=global_metrics,
        traffic=traffic,
        per_node_cost=costs,
        node_aggregation_macs=merge_macs,
        central_aggregation_macs=central_macs,
        federation_rounds=rounds,
        final_models=models,
        wall_seconds=time.perf_counter() - started,
    )


def roc_sweep(
    model: ModelParams, eval_set: Sequence[Observation], n_points: int
) -> list[tuple[float, float | None, float | None]]:
    """(threshold, pd, pfa) at ``n_points`` thresholds evenly spanning [0, 1].

    Decisions use ``probability >= threshold``, so both rates are
    nonincreasing in the threshold.
    """
    if n_points < 2:
        raise ValueError(f"n_points: must be >= 2 (got {n_points})")
    if len(eval_set) == 0:
        raise EmptyInputError("eval_set: nothing to sweep")
    probs = np.array([predict(model, obs.features) for obs in eval_set])
    truths = np.array([obs.truth_occupied for obs in eval_set])
    points = []
    for threshold in np.linspace(0.0, 1.0, n_points):
        decided = probs >= threshold
        tp = int(np.sum(decided & truths))
        fp = int(np.sum(decided & ~truths))
        fn = int(np.sum(~decided & truths))
        tn = int(np.sum(~decided & ~truths))
        m = DetectionMetrics(tp, fp, tn, fn)
        points.append((float(threshold), m.pd, m.pfa))
    return points


@dataclass
class TopologySummary:
    """Per-topology aggregation across seeds (byte/MAC fields are means)."""

    topology: str
    needs_neighbor_comm: bool
    busiest_node_bytes: float
    total_bytes: float
    central_bytes: float
    aggregation_macs_central: float
    max_node_aggregation_macs: float
    mean_accuracy: float | None
    mean_pd: float | None
    mean_pfa: float | None
    pd_undefined_runs: int
    pfa_undefined_runs: int


@dataclass
class ComparisonReport:
    scenario_digest: str
    seeds: list[int]
    topologies: dict[str, TopologySummary]


def _mean_defined(values: list[float | None]) -> tuple[float | None, int]:
    defined = [v for v in values if v is not None]
    skipped = len(values) - len(defined)
    if not defined:
        return None, skipped
    return sum(defined) / len(defined), skipped


def run_all_topologies(scenario: Scenario, seeds: Sequence[int]) -> list[RunResult]:
    """Every (topology, seed) run, topologies in canonical order."""
    if len(seeds) == 0:
        raise EmptyInputError("seeds: need at least one seed")
    return [
        run_simulation(scenario, topology, seed)
        for topology in TOPOLOGIES
        for seed in seeds
    ]


def summarize_runs(runs: Sequence[RunResult], seeds: Sequence[int]) -> ComparisonReport:
    """Aggregate per-topology means from an already-computed run matrix."""
    by_topology: dict[str, list[RunResult]] = {t: [] for t in TOPOLOGIES}
    for run in runs:
        by_topology[run.topology].append(run)
    summaries: dict[str, TopologySummary] = {}
    for topology in TOPOLOGIES:
        group = by_topology[topology]
        if not group:
            raise EmptyInputError(f"runs: no runs for topology {topology!r}")
        mean_pd, pd_skipped = _mean_defined([r.global_metrics.pd for r in group])
        mean_pfa, pfa_skipped = _mean_defined([r.global_metrics.pfa for r in group])
        mean_acc, _ = _mean_defined([r.global_metrics.accuracy for r in group])
        summaries[topology] = TopologySummary(
            topology=topology,
            needs_neighbor_comm=topology == "gossip",
            busiest_node_bytes=float(
                np.mean([r.busiest_node_bytes() for r in group])
            ),
            total_bytes=float(np.mean([r.traffic.total_bytes for r in group])),
            central_bytes=float(np.mean([r.traffic.central_bytes for r in group])),
            aggregation_macs_central=float(
                np.mean([r.central_aggregation_macs for r in group])
            ),
            max_node_aggregation_macs=float(
                np.mean([max(r.node_aggregation_macs) for r in group])
            ),
            mean_accuracy=mean_acc,
            mean_pd=mean_pd,
            mean_pfa=mean_pfa,
            pd_undefined_runs=pd_skipped,
            pfa_undefined_runs=pfa_skipped,
        )
    digest = runs[0].scenario_digest
    return ComparisonReport(digest, list(seeds), summaries)


def compare_topologies(scenario: Scenario, seeds: Sequence[int]) -> ComparisonReport:
    """Run isolated, gossip, and central over the seeds and aggregate."""
    return summarize_runs(run_all_topologies(scenario, seeds), seeds)


# ---------------------------------------------------------------------------
# serialization helpers shared by the CLI

METRICS_HEADER = (
    "run_id,topology,seed,node_id,pd,pfa,accuracy,"
    "tx_bytes,rx_bytes,train_macs,param_bytes"
)


def _fmt_rate(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def metrics_csv_lines(runs: Sequence[RunResult]) -> list[str]:
    """CSV rows: one per sensor per run plus a totals row per run."""
    lines = [METRICS_HEADER]
    for run in runs:
        run_id = f"{run.topology}-s{run.seed}"
        for i, metrics in enumerate(run.per_node_metrics):
            cost = run.per_node_cost[i]
            lines.append(
                ",".join(
                    [
                        run_id,
                        run.topology,
                        str(run.seed),
                        str(i),
                        _fmt_rate(metrics.pd),
                        _fmt_rate(metrics.pfa),
                        _fmt_rate(metrics.accuracy),
                        str(run.traffic.tx_bytes.get(i, 0)),
                        str(run.traffic.rx_bytes.get(i, 0)),
                        str(cost.train_macs_accumulated),
                        str(cost.model_bytes),
                    ]
                )
            )
        g = run.global_metrics
        lines.append(
            ",".join(
                [
                    run_id,
                    run.topology,
                    str(run.seed),
                    "global",
                    _fmt_rate(g.pd),
                    _fmt_rate(g.pfa),
                    _fmt_rate(g.accuracy),
                    str(sum(run.traffic.tx_bytes.values())),
                    str(sum(run.traffic.rx_bytes.values())),
                    str(sum(c.train_macs_accumulated for c in run.per_node_cost)),
                    str(sum(c.model_bytes for c in run.per_node_cost)),
                ]
            )
        )
    return lines


def comparison_to_dict(report: ComparisonReport) -> dict:
    return {
        "scenario_digest": report.scenario_digest,
        "seeds": list(report.seeds),
        "topologies": {
            name: {
                "needs_neighbor_comm": s.needs_neighbor_comm,
                "busiest_node_bytes": s.busiest_node_bytes,
                "total_bytes": s.total_bytes,
                "central_bytes": s.central_bytes,
                "aggregation_macs_central": s.aggregation_macs_central,
                "max_node_aggregation_macs": s.max_node_aggregation_macs,
                "mean_accuracy": s.mean_accuracy,
                "mean_pd": s.mean_pd,
                "mean_pfa": s.mean_pfa,
                "pd_undefined_runs": s.pd_undefined_runs,
                "pfa_undefined_runs": s.pfa_undefined_runs,
            }
            for name, s in sorted(report.topologies.items())
        },
    }


def _fmt_mean(value: float | None, digits: int = 4) -> str:
    return "undefined" if value is None else f"{value:.{digits}f}"


def comparison_table(report: ComparisonReport) -> str:
    """Aligned text table: one row per compared aspect, one column per topology."""
    order = [t for t in TOPOLOGIES if t in report.topologies]
    rows: list[tuple[str, dict[str, str]]] = []
    comm = {"isolated": "none", "gossip": "required", "central": "optional"}
    rows.append(("neighbor communication", {t: comm[t] for t in order}))
    flexibility = {
        "isolated": "n/a (no exchange)",
        "gossip": "high (any layout in radio range)",
        "central": "limited (coordinator placement)",
    }
    rows.append(("topology flexibility", {t: flexibility[t] for t in order}))
    rows.append(
        (
            "traffic volume (bytes)",
            {
                t: (
                    f"total {report.topologies[t].total_bytes:.0f}; "
                    f"central {report.topologies[t].central_bytes:.0f}; "
                    f"busiest node {report.topologies[t].busiest_node_bytes:.0f}"
                )
                for t in order
            },
        )
    )
    rows.append(
        (
            "aggregation compute (MACs)",
            {
                t: (
                    f"central {report.topologies[t].aggregation_macs_central:.0f}; "
                    f"busiest node {report.topologies[t].max_node_aggregation_macs:.0f}"
                )
                for t in order
            },
        )
    )
    rows.append(
        (
            "detection quality",
            {
                t: (
                    f"acc {_fmt_mean(report.topologies[t].mean_accuracy)}; "
                    f"pd {_fmt_mean(report.topologies[t].mean_pd)}; "
                    f"pfa {_fmt_mean(report.topologies[t].mean_pfa)}"
                )
                for t in order
            },
        )
    )
    label_width = max(len(label) for label, _ in rows)
    col_widths = {
        t: max(len(t), max(len(values[t]) for _, values in rows)) for t in order
    }
    header = "aspect".ljust(label_width) + " | " + " | ".join(
        t.ljust(col_widths[t]) for t in order
    )
    divider = "-" * label_width + "-+-" + "-+-".join("-" * col_widths[t] for t in order)
    lines = [header, divider]
    for label, values in rows:
        lines.append(
            label.ljust(label_width)
            + " | "
            + " | ".join(values[t].ljust(col_widths[t]) for t in order)
        )
    return "\n".join(lines) + "\n"
