"""Per-characteristic evaluation metrics: accuracy, AUC, PR areas.

Scores are continuous in [0,1]; gold labels are binary. Accuracy binarizes
with the threshold rule (score >= 0.5 maps to 1); AUC and the PR areas work
on the raw scores. AUC uses the Mann-Whitney pair formulation with ties
counting one half, computed in exact integer arithmetic so that it equals a
brute-force pair enumeration bit for bit. PR areas use step-wise
interpolation; PR- is the same computation with labels flipped and score
order reversed. When the gold labels contain a single class, AUC and the PR
areas are undefined and flagged as such.
"""

from dataclasses import dataclass
from typing import Optional

from .errors import DataError


@dataclass(frozen=True)
class CharacteristicMetrics:
    accuracy: float
    auc: Optional[float]
    pr_pos: Optional[float]
    pr_neg: Optional[float]
    n_pos: int
    n_neg: int

    @property
    def defined(self) -> bool:
        return self.auc is not None


@dataclass(frozen=True)
class MetricsReport:
    """Metrics keyed by characteristic code."""

    per_characteristic: dict

    def __getitem__(self, code: str) -> CharacteristicMetrics:
        return self.per_characteristic[code]

    def characteristics(self):
        return sorted(self.per_characteristic)


def accuracy_score(scores: dict, gold: dict, threshold: float = 0.5) -> float:
    correct = sum(
        1 for u, s in scores.items() if (1 if s >= threshold else 0) == gold[u]
    )
    return correct / len(scores)


def auc_score(scores: dict, gold: dict) -> Optional[float]:
    """Mann-Whitney AUC; None when gold has a single class.

    Ranks are tie-averaged; doubling them keeps every intermediate quantity
    an integer, so the result is exactly the pair-enumeration value.
    """
    items = sorted(scores.items(), key=lambda kv: (kv[1], kv[0]))
    n_pos = sum(1 for u, _ in items if gold[u] == 1)
    n_neg = len(items) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    doubled_rank_sum = 0  # sum over positives of 2 * average rank
    i = 0
    while i < len(items):
        j = i
        while j < len(items) and items[j][1] == items[i][1]:
            j += 1
        # ranks i+1 .. j (1-based) share the tie-averaged rank (i+1+j)/2
        doubled = i + 1 + j
        for k in range(i, j):
            if gold[items[k][0]] == 1:
                doubled_rank_sum += doubled
        i = j
    doubled_u = doubled_rank_sum - n_pos * (n_pos + 1)
    return doubled_u / (2 * n_pos * n_neg)


def pr_area(scores: dict, gold: dict, positive_label: int = 1) -> Optional[float]:
    """Area under the precision-recall curve, step-wise interpolation.

    For the negative class pass positive_label=0: labels flip and the score
    ordering reverses (equivalent to negating the scores).
    """
    total_pos = sum(1 for u in scores if gold[u] == positive_label)
    total_neg = len(scores) - total_pos
    if total_pos == 0 or total_neg == 0:
        return None
    reverse = positive_label == 1
    items = sorted(
        scores.items(),
        key=lambda kv: ((-kv[1] if reverse else kv[1]), kv[0]),
    )
    area = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    while i < len(items):
        j = i
        while j < len(items) and items[j][1] == items[i][1]:
            j += 1
        for k in range(i, j):
            if gold[items[k][0]] == positive_label:
                tp += 1
            else:
                fp += 1
        recall = tp / total_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return area


def compute_metrics(scores: dict, gold: dict, threshold: float = 0.5) -> CharacteristicMetrics:
    """Metrics for one characteristic over matching score/gold domains."""
    if set(scores) != set(gold):
        raise DataError("scores and gold must cover the same users")
    if not scores:
        raise DataError("empty score set")
    n_pos = sum(1 for v in gold.values() if v == 1)
    n_neg = len(gold) - n_pos
    return CharacteristicMetrics(
        accuracy=accuracy_score(scores, gold, threshold),
        auc=auc_score(scores, gold),
        pr_pos=pr_area(scores, gold, positive_label=1),
        pr_neg=pr_area(scores, gold, positive_label=0),
        n_pos=n_pos,
        n_neg=n_neg,
    )


def compute_report(scores: dict, gold: dict, threshold: float = 0.5) -> MetricsReport:
    """Metrics per characteristic from (user, characteristic)-keyed mappings."""
    by_char_scores = {}
    by_char_gold = {}
    for (user, char), s in scores.items():
        by_char_scores.setdefault(char, {})[user] = s
    for (user, char), g in gold.items():
        by_char_gold.setdefault(char, {})[user] = g
    report = {}
    for char in sorted(by_char_scores):
        if char not in by_char_gold:
            raise DataError(f"no gold labels for characteristic {char}")
        report[char] = compute_metrics(
            by_char_scores[char], by_char_gold[char], threshold
        )
    return MetricsReport(report)
