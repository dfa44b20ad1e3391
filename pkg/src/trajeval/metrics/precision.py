"""Detection-style average precision over trajectory hypotheses."""

from __future__ import annotations

from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from trajeval.metrics.config import AP_FIRST_MATCH, AP_TOP_ONLY


class ZeroGroundTruthError(ValueError):
    pass


class EmptyEvaluationError(ValueError):
    pass


class APRecord(NamedTuple):
    confidence: float
    true_positive: bool
    false_positive: bool


def assign_matches(confidences: Sequence[float], matches: Sequence[bool], protocol: str = AP_FIRST_MATCH) -> List[APRecord]:
    """Label each hypothesis of one object as a true or false positive.

    At most one hypothesis per object is a true positive. With
    ``first_match`` it is the most confident matching hypothesis; with
    ``top_only`` only the most confident hypothesis may claim it.
    Records come back in descending confidence order.
    """
    conf = np.asarray(confidences, dtype=float)
    hits = np.asarray(matches, dtype=bool)
    order = np.argsort(-conf, kind="stable")
    records = []
    claimed = False
    for rank, k in enumerate(order):
        eligible = protocol == AP_FIRST_MATCH or (protocol == AP_TOP_ONLY and rank == 0)
        if not claimed and eligible and hits[k]:
            claimed = True
            records.append(APRecord(float(conf[k]), True, False))
        else:
            records.append(APRecord(float(conf[k]), False, True))
    return records


def pr_curve(records: Sequence[APRecord], num_ground_truth: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Precision and recall at each distinct confidence threshold.

    Returns ``(thresholds, precision, recall)`` with thresholds descending.
    Records sharing a confidence enter the curve together, so the result does
    not depend on their input order.
    """
    if num_ground_truth <= 0:
        raise ZeroGroundTruthError("average precision needs at least one ground-truth object")
    if len(records) == 0:
        empty = np.zeros(0)
        return empty, empty, empty
    conf = np.array([r.confidence for r in records], dtype=float)
    tp = np.array([r.true_positive for r in records], dtype=float)
    fp = np.array([r.false_positive for r in records], dtype=float)
    order = np.argsort(-conf, kind="stable")
    conf, tp, fp = conf[order], np.cumsum(tp[order]), np.cumsum(fp[order])
    # keep the last record of each run of equal confidences
    last = np.append(conf[1:] != conf[:-1], True)
    tp, fp, conf = tp[last], fp[last], conf[last]
    denom = tp + fp
    precision = np.divide(tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return conf, precision, tp / num_ground_truth


def average_precision(records: Sequence[APRecord], num_ground_truth: int) -> float:
    """Area under the interpolated (monotone envelope) precision-recall curve."""
    _, precision, recall = pr_curve(records, num_ground_truth)
    if precision.size == 0:
        return 0.0
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


def mean_ap(ap_by_bucket: dict, support_by_bucket: dict) -> float:
    """Unweighted mean of AP over buckets that have ground-truth support."""
    values = [ap_by_bucket[b] for b, n in support_by_bucket.items() if n > 0]
    if not values:
        raise EmptyEvaluationError("no bucket has ground-truth support")
    return float(sum(values) / len(values))
