"""Detection metrics with IoMin matching.

Detections are matched greedily per image in descending score order; each
detection takes the still-unmatched ground truth with the highest IoMin at or
above the threshold. Precision and recall are reported at a score cut-off,
and average precision is the area under the all-point interpolated
precision/recall curve, swept over every distinct detection score.

Cumulative precision and recall are ratios of integer counts, so the sweep is
carried out on :class:`fractions.Fraction` values and only the final AP is
rounded to a float.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import List, Mapping, Optional, Sequence, Tuple, Union

from .exceptions import EvaluationUndefinedError
from .geometry import Detection, GroundTruthBox, iomin

IOMIN_THRESHOLD = 0.5
SCORE_THRESHOLD = 0.5


@dataclass
class MatchResult:
    tp: int
    fp: int
    fn: int
    # (detection index, matched ground-truth index or None), in processing order
    matches: List[Tuple[int, Optional[int]]] = field(default_factory=list)


@dataclass
class EvalReport:
    precision_05: float
    recall_05: float
    ap: float
    pr_curve: List[Tuple[float, float]]
    counts: Tuple[int, int, int]
    n_gt: int = 0
    iomin_threshold: float = IOMIN_THRESHOLD
    score_threshold: float = SCORE_THRESHOLD
    # raw (threshold, recall, precision) before the monotone envelope
    pr_points: List[Tuple[float, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["counts"] = {"tp": self.counts[0], "fp": self.counts[1], "fn": self.counts[2]}
        d["pr_curve"] = [list(p) for p in self.pr_curve]
        d["pr_points"] = [[None if t == float("inf") else t, r, p] for t, r, p in self.pr_points]
        return d


def _score_order(dets: Sequence[Detection]) -> List[int]:
    return sorted(range(len(dets)), key=lambda i: -dets[i].score)


def match_detections(dets: Sequence[Detection], gts: Sequence[GroundTruthBox],
                     iomin_threshold: float = IOMIN_THRESHOLD) -> MatchResult:
    """Greedy one-to-one matching of one image's detections to its ground truth."""
    matched = [False] * len(gts)
    result = MatchResult(0, 0, 0)
    for i in _score_order(dets):
        best, best_j = -1.0, None
        for j, g in enumerate(gts):
            if matched[j]:
                continue
            ov = iomin(dets[i].box, g.box)
            if ov >= iomin_threshold and ov > best:
                best, best_j = ov, j
        if best_j is None:
            result.fp += 1
        else:
            matched[best_j] = True
            result.tp += 1
        result.matches.append((i, best_j))
    result.fn = matched.count(False)
    return result


def precision_recall(tp: int, fp: int, fn: int) -> Tuple[float, float]:
    if tp + fn == 0:
        raise EvaluationUndefinedError("precision/recall are undefined without ground-truth boxes")
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    return precision, tp / (tp + fn)


DetsArg = Union[Mapping[str, Sequence[Detection]], Sequence[Detection]]
GtsArg = Union[Mapping[str, Sequence[GroundTruthBox]], Sequence[GroundTruthBox]]


def _as_mapping(dets: DetsArg, gts: GtsArg):
    """Accept per-image mappings, or plain lists meaning a single image."""
    if not isinstance(dets, Mapping):
        dets = {"": list(dets)}
    if not isinstance(gts, Mapping):
        gts = {"": list(gts)}
    return dets, gts


def _ranked_outcomes(dets, gts, iomin_threshold):
    """All detections as (score, is_tp) in global descending score order."""
    outcomes = []
    for image_id in sorted(set(dets) | set(gts), key=str):
        d = list(dets.get(image_id, ()))
        m = match_detections(d, list(gts.get(image_id, ())), iomin_threshold)
        outcomes.extend((d[i].score, j is not None) for i, j in m.matches)
    outcomes.sort(key=lambda o: -o[0])
    return outcomes


def _sweep(outcomes, n_gt):
    """Exact (threshold, recall, precision) at every distinct score, highest first.

    The first point is the empty-detection convention (recall 0, precision 1).
    """
    points = [(float("inf"), Fraction(0), Fraction(1))]
    tp = fp = 0
    for k, (score, is_tp) in enumerate(outcomes):
        tp += is_tp
        fp += not is_tp
        if k + 1 < len(outcomes) and outcomes[k + 1][0] == score:
            continue
        points.append((score, Fraction(tp, n_gt), Fraction(tp, tp + fp)))
    return points


def _envelope(points):
    """Distinct recall levels with their interpolated precision, recall ascending."""
    best = {}
    for _, r, p in points:
        best[r] = max(best.get(r, p), p)
    levels = sorted(best)
    out, running = [], Fraction(0)
    for r in reversed(levels):
        running = max(running, best[r])
        out.append((r, running))
    return out[::-1]


def _ap_from_envelope(env) -> Fraction:
    area, prev = Fraction(0), Fraction(0)
    for r, p in env:
        area += (r - prev) * p
        prev = r
    return area


def _count_gts(gts) -> int:
    n = sum(len(v) for v in gts.values())
    if n == 0:
        raise EvaluationUndefinedError("the dataset has no ground-truth boxes")
    return n


def average_precision(dets: DetsArg, gts: GtsArg, iomin_threshold: float = IOMIN_THRESHOLD) -> float:
    """All-point interpolated AP, as a percentage in [0, 100]."""
    dets, gts = _as_mapping(dets, gts)
    n_gt = _count_gts(gts)
    env = _envelope(_sweep(_ranked_outcomes(dets, gts, iomin_threshold), n_gt))
    return float(_ap_from_envelope(env) * 100)


def evaluate(dets: DetsArg, gts: GtsArg, iomin_threshold: float = IOMIN_THRESHOLD,
             score_threshold: float = SCORE_THRESHOLD) -> EvalReport:
    dets, gts = _as_mapping(dets, gts)
    n_gt = _count_gts(gts)

    tp = fp = fn = 0
    for image_id in set(dets) | set(gts):
        kept = [d for d in dets.get(image_id, ()) if d.score >= score_threshold]
        m = match_detections(kept, list(gts.get(image_id, ())), iomin_threshold)
        tp, fp, fn = tp + m.tp, fp + m.fp, fn + m.fn
    precision, recall = precision_recall(tp, fp, fn)

    points = _sweep(_ranked_outcomes(dets, gts, iomin_threshold), n_gt)
    env = _envelope(points)
    return EvalReport(
        precision_05=precision,
        recall_05=recall,
        ap=float(_ap_from_envelope(env) * 100),
        pr_curve=[(float(r), float(p)) for r, p in env],
        counts=(tp, fp, fn),
        n_gt=n_gt,
        iomin_threshold=iomin_threshold,
        score_threshold=score_threshold,
        pr_points=[(t, float(r), float(p)) for t, r, p in points],
    )


def emit_pr_curve(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("recall", "precision"))
        for r, p in sorted(report.pr_curve):
            writer.writerow((repr(r), repr(p)))


def read_pr_curve(path) -> List[Tuple[float, float]]:
    with open(path, newline="") as fh:
        return [(float(row["recall"]), float(row["precision"])) for row in csv.DictReader(fh)]
