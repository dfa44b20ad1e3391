"""Corpus-level evaluation: per-scenario scoring and aggregation into a report."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from trajeval.metrics.config import MetricsConfig, ShapeBucket
from trajeval.metrics.displacement import horizon_valid, match_table, min_ade, min_fde
from trajeval.metrics.overlap import agent_overlaps_ground_truth, overlap_joint
from trajeval.metrics.precision import APRecord, assign_matches, average_precision, pr_curve
from trajeval.metrics.shapes import TooFewValidStepsError, classify_shape
from trajeval.scenario import (
    AgentInvalidError,
    JointPredictionSet,
    ObjectType,
    Scenario,
    extract_ground_truth,
)

MARGINAL = "marginal"
JOINT = "joint"

PredictionIndex = Dict[Tuple[str, frozenset], JointPredictionSet]


@dataclass(frozen=True)
class Issue:
    scenario_id: str
    agent_ids: Tuple[int, ...]
    reason: str

    def to_dict(self) -> dict:
        return {"scenario_id": self.scenario_id, "agent_ids": list(self.agent_ids), "reason": self.reason}


@dataclass
class HorizonOutcome:
    ade: Optional[float]
    fde: Optional[float]
    miss: Optional[bool]
    records: List[APRecord]


@dataclass
class SampleOutcome:
    """One evaluated sample; ``members`` lists (object type, shape bucket, overlap by horizon)."""

    members: List[Tuple[ObjectType, ShapeBucket, Dict[int, bool]]]
    horizons: Dict[int, HorizonOutcome]


@dataclass
class ScenarioOutcome:
    samples: List[SampleOutcome] = field(default_factory=list)
    issues: List[Issue] = field(default_factory=list)


def index_predictions(predictions: Iterable[JointPredictionSet]) -> PredictionIndex:
    index: PredictionIndex = {}
    for p in predictions:
        key = (p.scenario_id, frozenset(p.agent_ids))
        if key in index:
            raise ValueError(f"duplicate prediction for scenario {p.scenario_id} agents {p.agent_ids}")
        index[key] = p
    return index


def _bucket(scenario: Scenario, agent_id: int, steps: int, cfg: MetricsConfig) -> ShapeBucket:
    track = scenario.track(agent_id)
    cur = scenario.current_index
    sl = slice(cur, cur + steps + 1)
    try:
        return classify_shape(track.xy[sl], track.valid[sl], track.heading[sl], cfg)
    except TooFewValidStepsError:
        return ShapeBucket.STATIONARY


def score_sample(
    scenario: Scenario,
    p: JointPredictionSet,
    horizons: Sequence[int],
    cfg: MetricsConfig,
    mode: str,
) -> SampleOutcome:
    """Score one prediction set against its scenario at every horizon."""
    max_steps = max(cfg.horizon_steps(h) for h in horizons)
    if p.num_steps < max_steps:
        raise ValueError(f"prediction-too-short: {p.num_steps} steps, need {max_steps}")
    gt = extract_ground_truth(scenario, p.agent_ids, max_steps)
    p = p.reordered(gt.agent_ids)
    outcomes: Dict[int, HorizonOutcome] = {}
    member_overlap: List[Dict[int, bool]] = [dict() for _ in p.agent_ids]
    for h in horizons:
        steps = cfg.horizon_steps(h)
        ade = min_ade(gt, p, steps) if gt.valid[:, :steps].any() else None
        counted = horizon_valid(gt, h, cfg)
        fde = min_fde(gt, p, steps) if counted else None
        miss = None
        records: List[APRecord] = []
        if counted:
            table = match_table(gt, p, h, cfg)
            joint_hit = table.all(axis=1)
            miss = not bool(joint_hit.any())
            records = assign_matches(p.confidences, joint_hit, cfg.ap_protocol)
        if mode == JOINT:
            flag = overlap_joint(scenario, p, h, cfg)
            for d in member_overlap:
                d[h] = flag
        else:
            top = p.waypoints[p.top_index(), 0, :steps]
            member_overlap[0][h] = agent_overlaps_ground_truth(scenario, p.agent_ids[0], top, cfg)
        outcomes[h] = HorizonOutcome(ade, fde, miss, records)
    members = [
        (gt.object_types[i], _bucket(scenario, a, max_steps, cfg), member_overlap[i])
        for i, a in enumerate(gt.agent_ids)
    ]
    return SampleOutcome(members, outcomes)


def score_scenario(
    scenario: Scenario,
    index: PredictionIndex,
    horizons: Sequence[int],
    cfg: MetricsConfig,
    mode: str,
) -> ScenarioOutcome:
    out = ScenarioOutcome()
    if mode == JOINT:
        if scenario.interactive_pair is None:
            out.issues.append(Issue(scenario.scenario_id, (), "no-interactive-pair"))
            return out
        groups = [scenario.interactive_pair.ids]
    else:
        groups = [(e.object_id,) for e in scenario.predict_list]
    for ids in groups:
        p = index.get((scenario.scenario_id, frozenset(ids)))
        if p is None:
            out.issues.append(Issue(scenario.scenario_id, tuple(ids), "missing-prediction"))
            continue
        try:
            out.samples.append(score_sample(scenario, p.reordered(ids), horizons, cfg, mode))
        except (AgentInvalidError, ValueError) as exc:
            out.issues.append(Issue(scenario.scenario_id, tuple(ids), str(exc)))
    return out


@dataclass
class _Cell:
    ade_sum: float = 0.0
    ade_n: int = 0
    fde_sum: float = 0.0
    fde_n: int = 0
    miss_sum: int = 0
    miss_n: int = 0
    overlap_sum: int = 0
    overlap_n: int = 0
    samples: int = 0
    records: Dict[ShapeBucket, List[APRecord]] = field(default_factory=lambda: {b: [] for b in ShapeBucket})
    support: Dict[ShapeBucket, int] = field(default_factory=lambda: {b: 0 for b in ShapeBucket})


@dataclass
class BucketResult:
    ap: Optional[float]
    support: int
    curve: Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass
class RowResult:
    min_ade: Optional[float]
    min_fde: Optional[float]
    miss_rate: Optional[float]
    overlap_rate: Optional[float]
    mean_ap: Optional[float]
    counts: Dict[str, int]
    buckets: Dict[ShapeBucket, BucketResult]


def _ratio(total: float, n: int) -> Optional[float]:
    return float(total / n) if n else None


@dataclass
class MetricsReport:
    mode: str
    horizons: Tuple[int, ...]
    rows: Dict[Tuple[ObjectType, int], RowResult]
    issues: List[Issue]
    num_scenarios: int

    def row(self, object_type, horizon_s: int) -> RowResult:
        return self.rows[(ObjectType(object_type), horizon_s)]

    def to_dict(self) -> dict:
        results: dict = {}
        for (otype, h), row in self.rows.items():
            results.setdefault(otype.value, {})[str(h)] = {
                "min_ade": row.min_ade,
                "min_fde": row.min_fde,
                "miss_rate": row.miss_rate,
                "overlap_rate": row.overlap_rate,
                "mAP": row.mean_ap,
                "counts": row.counts,
                "buckets": {b.value: {"ap": r.ap, "support": r.support} for b, r in row.buckets.items()},
            }
        return {
            "mode": self.mode,
            "horizons": list(self.horizons),
            "num_scenarios": self.num_scenarios,
            "results": results,
            "issues": [i.to_dict() for i in self.issues],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["object_type", "horizon_s", "bucket", "ap", "support",
             "min_ade", "min_fde", "miss_rate", "overlap_rate", "mAP"]
        )
        for (otype, h), row in self.rows.items():
            for b, r in row.buckets.items():
                writer.writerow(
                    [otype.value, h, b.value, _fmt(r.ap), r.support, _fmt(row.min_ade),
                     _fmt(row.min_fde), _fmt(row.miss_rate), _fmt(row.overlap_rate), _fmt(row.mean_ap)]
                )
        return buf.getvalue()

    def pr_curves_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["object_type", "horizon_s", "bucket", "threshold", "precision", "recall"])
        for (otype, h), row in self.rows.items():
            for b, r in row.buckets.items():
                for thr, prec, rec in zip(*r.curve):
                    writer.writerow([otype.value, h, b.value, _fmt(thr), _fmt(prec), _fmt(rec)])
        return buf.getvalue()


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def aggregate(outcomes: Iterable[ScenarioOutcome], horizons: Sequence[int], mode: str) -> MetricsReport:
    """Reduce per-scenario outcomes into a report (scenario order fixes float summation order)."""
    cells = {(t, h): _Cell() for t in ObjectType for h in horizons}
    issues: List[Issue] = []
    n = 0
    for outcome in outcomes:
        n += 1
        issues.extend(outcome.issues)
        for sample in outcome.samples:
            for otype, bucket, overlaps in sample.members:
                for h in horizons:
                    res = sample.horizons[h]
                    cell = cells[(otype, h)]
                    cell.samples += 1
                    if res.ade is not None:
                        cell.ade_sum += res.ade
                        cell.ade_n += 1
                    if res.fde is not None:
                        cell.fde_sum += res.fde
                        cell.fde_n += 1
                    if res.miss is not None:
                        cell.miss_sum += int(res.miss)
                        cell.miss_n += 1
                        cell.records[bucket].extend(res.records)
                        cell.support[bucket] += 1
                    cell.overlap_sum += int(overlaps[h])
                    cell.overlap_n += 1
    rows = {}
    for key, cell in cells.items():
        buckets = {}
        aps = []
        for b in ShapeBucket:
            support = cell.support[b]
            if support:
                ap = average_precision(cell.records[b], support)
                curve = pr_curve(cell.records[b], support)
                aps.append(ap)
            else:
                ap, curve = None, (np.zeros(0), np.zeros(0), np.zeros(0))
            buckets[b] = BucketResult(ap, support, curve)
        rows[key] = RowResult(
            min_ade=_ratio(cell.ade_sum, cell.ade_n),
            min_fde=_ratio(cell.fde_sum, cell.fde_n),
            miss_rate=_ratio(cell.miss_sum, cell.miss_n),
            overlap_rate=_ratio(cell.overlap_sum, cell.overlap_n),
            mean_ap=float(sum(aps) / len(aps)) if aps else None,
            counts={"samples": cell.samples, "ade": cell.ade_n, "fde": cell.fde_n, "miss": cell.miss_n},
            buckets=buckets,
        )
    return MetricsReport(mode, tuple(horizons), rows, issues, n)


def evaluate(
    scenarios: Iterable[Scenario],
    predictions: Iterable[JointPredictionSet],
    cfg: MetricsConfig = MetricsConfig(),
    mode: str = MARGINAL,
    horizons: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> MetricsReport:
    """Evaluate predictions over a corpus.

    Missing or unusable predictions are recorded in ``report.issues`` and the
    rest of the corpus is still evaluated. ``workers`` only changes speed.
    """
    if mode not in (MARGINAL, JOINT):
        raise ValueError(f"unknown mode {mode!r}")
    hs = tuple(sorted(horizons)) if horizons else cfg.horizons
    for h in hs:
        cfg.horizon_steps(h)
    index = index_predictions(predictions)
    scenarios = list(scenarios)

    def run(s: Scenario) -> ScenarioOutcome:
        return score_scenario(s, index, hs, cfg, mode)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, scenarios))
    else:
        outcomes = [run(s) for s in scenarios]
    return aggregate(outcomes, hs, mode)
