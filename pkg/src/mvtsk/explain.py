"""Human-readable views of a trained fuzzy ensemble.

Rules are rendered as IF-THEN statements whose IF parts are linguistic
labels (assigned by ranking each feature's rule centers) and whose THEN
parts are the affine consequent coefficients.  Decision traces break a
single prediction into per-rule contributions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from mvtsk.classifier import ViewEnsemble
from mvtsk.dataset import DegeneracyWarning
from mvtsk.fuzzy import Antecedent, firing_strengths, rule_consequents

_VOCABULARIES = {
    2: ["Small", "Large"],
    4: ["Small", "Medium", "Little Large", "Large"],
    5: ["Small", "Medium", "Little Large", "Large", "Very Large"],
}


def default_vocabulary(K: int) -> list:
    """Label vocabulary for K fuzzy sets, ordinal fallback for unusual K."""
    if K in _VOCABULARIES:
        return list(_VOCABULARIES[K])
    return [f"Level {i + 1} of {K}" for i in range(K)]


def linguistic_labels(ant: Antecedent, vocabulary: list | None = None) -> list:
    """K x d label grid: per feature, rules are labeled by the ascending
    rank of their centers (ties broken by rule index, flagged)."""
    K, d = ant.centers.shape
    if vocabulary is None:
        vocabulary = default_vocabulary(K)
    if len(vocabulary) != K:
        raise ValueError(f"vocabulary size {len(vocabulary)} != K={K}")
    labels = [[None] * d for _ in range(K)]
    for j in range(d):
        col = ant.centers[:, j]
        if len(np.unique(col)) < K:
            warnings.warn(
                f"feature {j}: tied centers; labels follow rule index order",
                DegeneracyWarning,
            )
        order = np.argsort(col, kind="stable")
        for rank, k in enumerate(order):
            labels[k][j] = vocabulary[rank]
    return labels


@dataclass
class LinguisticRuleSet:
    """Labels, consequent coefficients (K x (1+d) x C), and feature names."""

    labels: list
    coefficients: np.ndarray
    feature_names: list


def _term(coef: float, name: str) -> str:
    sign = "-" if coef < 0 else "+"
    return f" {sign} {abs(coef):.4f}*{name}"


def build_rule_set(
    ensemble: ViewEnsemble, view_index: int, feature_names: list | None = None
) -> LinguisticRuleSet:
    ant = ensemble.antecedents[view_index]
    if feature_names is None:
        feature_names = [f"f{j}" for j in range(ant.dim)]
    if len(feature_names) != ant.dim:
        raise ValueError(f"got {len(feature_names)} feature names for {ant.dim} features")
    coeffs = rule_consequents(ensemble.consequents[view_index], ant.dim)
    return LinguisticRuleSet(linguistic_labels(ant), coeffs, list(feature_names))


def rule_report(
    ensemble: ViewEnsemble, view_index: int, feature_names: list | None = None
):
    """IF-THEN text report plus a full-precision JSON-ready mirror."""
    ruleset = build_rule_set(ensemble, view_index, feature_names)
    ant = ensemble.antecedents[view_index]
    K, d = ant.centers.shape
    n_outputs = ruleset.coefficients.shape[2]

    lines = [f"View '{ensemble.roles[view_index]}' ({K} rules, weight "
             f"{ensemble.alpha[view_index]:.4f})"]
    rules_json = []
    for k in range(K):
        conds = " and ".join(
            f"{ruleset.feature_names[j]} is {ruleset.labels[k][j]}" for j in range(d)
        )
        lines.append(f"Rule {k + 1}: IF {conds}")
        for c in range(n_outputs):
            coef = ruleset.coefficients[k, :, c]
            expr = f"{coef[0]:.4f}"
            for j in range(d):
                expr += _term(coef[j + 1], ruleset.feature_names[j])
            lines.append(f"  THEN output {c + 1} = {expr}")
        rules_json.append(
            {
                "rule": k + 1,
                "if": {
                    ruleset.feature_names[j]: {
                        "label": ruleset.labels[k][j],
                        "center": float(ant.centers[k, j]),
                        "width": float(ant.widths[k, j]),
                    }
                    for j in range(d)
                },
                "then": {
                    f"output{c + 1}": {
                        "intercept": float(ruleset.coefficients[k, 0, c]),
                        "slopes": {
                            ruleset.feature_names[j]: float(ruleset.coefficients[k, j + 1, c])
                            for j in range(d)
                        },
                    }
                    for c in range(n_outputs)
                },
            }
        )
    report = {
        "view": ensemble.roles[view_index],
        "weight": float(ensemble.alpha[view_index]),
        "n_rules": K,
        "feature_names": ruleset.feature_names,
        "rules": rules_json,
    }
    return "\n".join(lines), report


@dataclass
class DecisionTrace:
    """Per-rule decomposition of one prediction on one view.

    ``contributions`` (K x C) are the firing-weighted rule outputs; their
    sum is exactly the view's score vector before ensemble weighting.
    """

    firing: np.ndarray
    rule_outputs: np.ndarray
    contributions: np.ndarray
    combined: np.ndarray
    decision: np.ndarray
    dominant_rule: int


def decision_trace(ensemble: ViewEnsemble, view_index: int, x: np.ndarray) -> DecisionTrace:
    """Trace one input through the chosen view's rule base."""
    ant = ensemble.antecedents[view_index]
    x = np.asarray(x, dtype=float).ravel()
    if x.size != ant.dim:
        raise ValueError(f"input has {x.size} features, view expects {ant.dim}")
    _, firing = firing_strengths(x, ant)
    blocks = rule_consequents(ensemble.consequents[view_index], ant.dim)
    xe = np.concatenate([[1.0], x])
    rule_outputs = np.einsum("i,kic->kc", xe, blocks)
    contributions = firing[:, None] * rule_outputs
    combined = contributions.sum(axis=0)
    decision = np.zeros_like(combined)
    decision[np.argmax(combined)] = 1.0
    dominant = int(np.argmax(firing * np.linalg.norm(rule_outputs, axis=1)))
    return DecisionTrace(firing, rule_outputs, contributions, combined, decision, dominant)
