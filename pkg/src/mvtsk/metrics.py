"""Classification metrics and rank-based multi-algorithm comparison.

ACC / AUC / F1 plus the Friedman test (are k algorithms distinguishable
over n settings?) and the Holm step-down procedure against a control.
Chi-square and normal tail probabilities are computed here from the
regularized incomplete gamma function and erfc rather than from any
statistics table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

_EPS = 1e-15
_FPMIN = 1e-300
_MAX_ITER = 1000


# ---------------------------------------------------------------------------
# Tail probabilities
# ---------------------------------------------------------------------------

def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized incomplete gamma by power series (x < a + 1)."""
    ap = a
    total = term = 1.0 / a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_contfrac(a: float, x: float) -> float:
    """Upper regularized incomplete gamma by continued fraction (x >= a + 1),
    evaluated with the modified Lentz method."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))

def regularized_gamma_upper(a: float, x: float) -> float:
    """Q(a, x), the upper regularized incomplete gamma function."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)

def chi_square_sf(x: float, df: int) -> float:
    """Survival function of the chi-square distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    return regularized_gamma_upper(df / 2.0, x / 2.0)

def normal_sf(z: float) -> float:
    """Standard normal survival function 1 - Phi(z), via erfc."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Per-run metrics
# ---------------------------------------------------------------------------

def accuracy(labels: np.ndarray, predictions: np.ndarray) -> float:
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.size == 0:
        raise ValueError("empty input")
    if labels.shape != predictions.shape:
        raise ValueError("labels and predictions must have equal length")
    return float(np.mean(labels == predictions))


def _binary_f1(labels, predictions, positive) -> float:
    tp = np.sum((predictions == positive) & (labels == positive))
    fp = np.sum((predictions == positive) & (labels != positive))
    fn = np.sum((predictions != positive) & (labels == positive))
    if tp + fp == 0 or tp + fn == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))


def f1(labels, predictions, positive_class: int = 1, n_classes: int | None = None) -> float:
    """Binary F1 on ``positive_class``; macro-averaged when more than two
    classes are involved.  Zero precision+recall yields F1 = 0."""
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.size == 0:
        raise ValueError("empty input")
    if n_classes is None:
        n_classes = int(max(labels.max(), predictions.max())) + 1
    if n_classes <= 2:
        return _binary_f1(labels, predictions, positive_class)
    return float(np.mean([_binary_f1(labels, predictions, c) for c in range(n_classes)]))


def auc(labels, scores) -> float:
    """Rank-based AUC with average ranks on ties.

    Binary: ``scores`` is the positive-class score vector.  Multi-class:
    ``scores`` is the N x C score matrix and the result is the macro average
    of one-vs-rest AUCs over classes with both outcomes present.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 2 and scores.shape[1] > 2:
        vals = []
        for c in range(scores.shape[1]):
            mask_pos = labels == c
            if mask_pos.any() and (~mask_pos).any():
                vals.append(auc(mask_pos.astype(int), scores[:, c]))
        if not vals:
            raise ValueError("no class has both positive and negative instances")
        return float(np.mean(vals))
    if scores.ndim == 2:
        scores = scores[:, 1]
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class MetricReport:
    """Per-repetition ACC/AUC/F1 values with their mean and variance."""

    acc: list = field(default_factory=list)
    auc: list = field(default_factory=list)
    f1: list = field(default_factory=list)

    def add(self, acc_val: float, auc_val: float, f1_val: float):
        self.acc.append(float(acc_val))
        self.auc.append(float(auc_val))
        self.f1.append(float(f1_val))

    @staticmethod
    def _mean_var(values):
        arr = np.asarray(values, dtype=float)
        mean = float(arr.mean())
        var = float(arr.var(ddof=1)) if arr.size > 1 else 0.0
        return mean, var

    def summary(self) -> dict:
        out = {}
        for name, values in (("acc", self.acc), ("auc", self.auc), ("f1", self.f1)):
            mean, var = self._mean_var(values)
            out[name] = {
                "values": list(values),
                "mean": mean,
                "variance": var,
                "formatted": f"{mean:.4f}±{var:.4f}",
            }
        return out


# ---------------------------------------------------------------------------
# Friedman / Holm
# ---------------------------------------------------------------------------

@dataclass
class FriedmanResult:
    """Average ranks (1 = best), chi-square statistic, df, and p-value."""

    avg_ranks: np.ndarray
    statistic: float
    df: int
    p_value: float
    n_settings: int
    n_algorithms: int


def rank_matrix(results: np.ndarray) -> np.ndarray:
    """Within-setting ranks of an n x k results matrix, higher = better,
    average ranks on ties (rank 1 = best)."""
    results = np.asarray(results, dtype=float)
    return np.vstack([rankdata(-row) for row in results])


def friedman_test(results: np.ndarray) -> FriedmanResult:
    """Friedman rank test over an n-settings x k-algorithms results matrix."""
    results = np.asarray(results, dtype=float)
    if results.ndim != 2:
        raise ValueError("results must be a 2-D settings x algorithms matrix")
    n, k = results.shape
    if n < 2 or k < 2:
        raise ValueError(f"need n >= 2 settings and k >= 2 algorithms, got {n} x {k}")
    avg = rank_matrix(results).mean(axis=0)
    stat = 12.0 * n / (k * (k + 1)) * (float((avg**2).sum()) - k * (k + 1) ** 2 / 4.0)
    stat = max(stat, 0.0)  # all-tied input gives exactly 0 up to rounding
    return FriedmanResult(avg, stat, k - 1, chi_square_sf(stat, k - 1), n, k)


@dataclass
class HolmComparison:
    """One control-vs-algorithm row of the step-down procedure."""

    algorithm: str
    z: float
    p: float
    i: int           # hypotheses remaining when this one is tested
    threshold: float  # alpha / i
    reject: bool


@dataclass
class HolmResult:
    control: str
    comparisons: list  # ordered by ascending p (i = k-1 down to 1)


def holm_posthoc(
    avg_ranks: np.ndarray,
    n: int,
    k: int,
    control_index: int,
    names: list | None = None,
    alpha: float = 0.05,
) -> HolmResult:
    """Step-down Holm comparisons of every algorithm against the control.

    z = (R_j - R_control) / sqrt(k(k+1)/(6n)), two-sided p = 2(1 - Phi(|z|)).
    Hypotheses are tested from the smallest p upward against alpha/i, where
    i counts the hypotheses still in play; the first acceptance stops all
    further rejections.
    """
    avg_ranks = np.asarray(avg_ranks, dtype=float)
    if not 0 <= control_index < k:
        raise ValueError(f"control index {control_index} out of range for k={k}")
    if names is None:
        names = [f"algorithm{j}" for j in range(k)]
    se = math.sqrt(k * (k + 1) / (6.0 * n))
    rows = []
    for j in range(k):
        if j == control_index:
            continue
        z = (avg_ranks[j] - avg_ranks[control_index]) / se
        rows.append((names[j], z, 2.0 * normal_sf(abs(z))))
    rows.sort(key=lambda r: (r[2], -abs(r[1]), r[0]))

    m = len(rows)
    comparisons = []
    rejecting = True
    for pos, (name, z, p) in enumerate(rows):
        remaining = m - pos
        threshold = alpha / remaining
        reject = rejecting and p < threshold
        if not reject:
            rejecting = False
        comparisons.append(HolmComparison(name, z, p, remaining, threshold, reject))
    return HolmResult(names[control_index], comparisons)
