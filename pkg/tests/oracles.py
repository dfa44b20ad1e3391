"""Slow, loop-based reference implementations used to cross-check the library.

Nothing here imports the metric code under test; inputs are plain lists and
floats so the two paths share as little as possible.
"""

from __future__ import annotations

import itertools
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

BASE_THRESHOLDS = {3: (1.0, 2.0), 5: (1.8, 3.6), 8: (3.0, 6.0)}  # (lateral, longitudinal)


def gamma(v: float, lo: float = 1.4, hi: float = 11.0) -> float:
    if v <= lo:
        return 0.5
    if v >= hi:
        return 1.0
    return 0.5 + 0.5 * (v - lo) / (hi - lo)


def match(gt, pred, heading: float, vx: float, vy: float, horizon_s: int) -> bool:
    lat0, lon0 = BASE_THRESHOLDS[horizon_s]
    dx, dy = float(gt[0]) - float(pred[0]), float(gt[1]) - float(pred[1])
    # rotate the world-frame error into the agent frame: R(-heading) @ d
    lon = math.cos(-heading) * dx - math.sin(-heading) * dy
    lat = math.sin(-heading) * dx + math.cos(-heading) * dy
    return abs(lon) <= lon0 * gamma(abs(vx)) and abs(lat) <= lat0 * gamma(abs(vy))


def min_ade(gt_pos, gt_valid, hyps, steps: int) -> float:
    """gt_pos[a][t] = (x, y); hyps[k][a][t] = (x, y)."""
    best = math.inf
    for hyp in hyps:
        total, n = 0.0, 0
        for a in range(len(gt_pos)):
            for t in range(steps):
                if gt_valid[a][t]:
                    total += math.dist(hyp[a][t], gt_pos[a][t])
                    n += 1
        best = min(best, total / n)
    return best


def min_fde(gt_pos, hyps, steps: int) -> float:
    best = math.inf
    for hyp in hyps:
        errs = [math.dist(hyp[a][steps - 1], gt_pos[a][steps - 1]) for a in range(len(gt_pos))]
        best = min(best, sum(errs) / len(errs))
    return best


def sample_hits(gt_pos, headings, speeds, hyps, horizon_s: int, steps: int) -> List[bool]:
    """Per hypothesis: does every agent match at the horizon step?"""
    t = steps - 1
    return [
        all(match(gt_pos[a][t], hyp[a][t], headings[a], speeds[a][0], speeds[a][1], horizon_s)
            for a in range(len(gt_pos)))
        for hyp in hyps
    ]


def is_miss(hits: Sequence[bool]) -> bool:
    return not any(hits)


def true_positive_index(confidences: Sequence[float], hits: Sequence[bool], top_only: bool = False):
    """Index of the hypothesis that claims the object, or None."""
    ranked = sorted(range(len(confidences)), key=lambda k: (-confidences[k], k))
    if top_only:
        return ranked[0] if hits[ranked[0]] else None
    for k in ranked:
        if hits[k]:
            return k
    return None


def average_precision(samples: Sequence[Tuple[Sequence[float], Sequence[bool]]], top_only: bool = False) -> float:
    """AP by sweeping every distinct confidence as a threshold.

    ``samples`` holds (confidences, hits) per object. The precision envelope
    p(r) = max precision over thresholds reaching recall >= r is integrated
    exactly over recall.
    """
    records = []
    for conf, hits in samples:
        tp = true_positive_index(conf, hits, top_only)
        records.extend((c, k == tp) for k, c in enumerate(conf))
    n_gt = len(samples)
    points = []
    for tau in sorted({c for c, _ in records}, reverse=True):
        kept = [is_tp for c, is_tp in records if c >= tau]
        tp = sum(kept)
        points.append((tp / n_gt, tp / len(kept)))
    recalls = sorted({r for r, _ in points})
    area, prev = 0.0, 0.0
    for r in recalls:
        envelope = max(p for rr, p in points if rr >= r)
        area += (r - prev) * envelope
        prev = r
    return area


def stratified_iou(a, b, n: int = 1000, seed: int = 0) -> float:
    """IOU of two oriented boxes (x, y, length, width, heading) by jittered grid sampling.

    ``n * n`` samples cover box ``a`` in its own frame, one per stratum; the
    fraction falling inside ``b`` estimates the intersection area.
    """
    rng = np.random.default_rng(seed)
    ax, ay, al, aw, ah = a
    bx, by, bl, bw, bh = b
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    u = ((i + rng.random((n, n))) / n - 0.5) * al
    v = ((j + rng.random((n, n))) / n - 0.5) * aw
    px = ax + u * math.cos(ah) - v * math.sin(ah)
    py = ay + u * math.sin(ah) + v * math.cos(ah)
    dx, dy = px - bx, py - by
    lu = dx * math.cos(bh) + dy * math.sin(bh)
    lv = -dx * math.sin(bh) + dy * math.cos(bh)
    inside = (np.abs(lu) <= bl / 2) & (np.abs(lv) <= bw / 2)
    inter = al * aw * float(inside.mean())
    return inter / (al * aw + bl * bw - inter)


def crossing_time(p0, v, q0, w) -> Tuple[float, float]:
    """Times at which two constant-velocity lines pass their intersection point."""
    det = v[0] * (-w[1]) - v[1] * (-w[0])
    rx, ry = q0[0] - p0[0], q0[1] - p0[1]
    ta = (rx * (-w[1]) - ry * (-w[0])) / det
    tb = (v[0] * ry - v[1] * rx) / det
    return ta, tb


# ---------------------------------------------------------------------------
# Predicate algebra


def holds(expr, env: Dict[str, int], atom_eval) -> Tuple[bool, frozenset]:
    """Truth value and witness times of ``expr`` under a full assignment."""
    from trajeval.mining.expr import And, Atom, Not, Or, Var

    if isinstance(expr, Atom):
        ids = tuple(env[s.name] if isinstance(s, Var) else s for s in expr.slots)
        times = atom_eval(expr, ids)
        return (times is not None), (times or frozenset())
    if isinstance(expr, Not):
        ok, _ = holds(expr.child, env, atom_eval)
        return (not ok), frozenset()
    results = [holds(c, env, atom_eval) for c in expr.children]
    if isinstance(expr, And):
        if all(ok for ok, _ in results):
            return True, frozenset().union(*(t for _, t in results))
        return False, frozenset()
    assert isinstance(expr, Or)
    if any(ok for ok, _ in results):
        return True, frozenset().union(*(t for ok, t in results if ok))
    return False, frozenset()


def brute_bindings(expr, variables: Sequence[str], domain: Sequence[int], atom_eval):
    """All injective assignments satisfying ``expr``, as {assignment tuple: times}."""
    out = {}
    for values in itertools.permutations(domain, len(variables)):
        env = dict(zip(variables, values))
        ok, times = holds(expr, env, atom_eval)
        if ok:
            out[values] = tuple(sorted(times))
    return out
