import numpy as np
import pytest

from mvtsk import representation
from mvtsk.classifier import EnsembleConfig, ViewEnsemble, design_matrices, fit, fit_design
from mvtsk.dataset import (
    DegeneracyWarning,
    apply_normalizer,
    fit_normalizer,
    gen_synthetic,
    one_hot,
)
from mvtsk.explain import (
    decision_trace,
    default_vocabulary,
    linguistic_labels,
    rule_report,
)
from mvtsk.fuzzy import Antecedent, fuzzy_map


def small_ensemble(K=2, d=3, C=2, seed=0):
    rng = np.random.default_rng(seed)
    raw = rng.uniform(size=(25, d))
    labels = (raw[:, 0] > 0.5).astype(int)
    Y = one_hot(labels, C)
    cfg = EnsembleConfig(K=K, beta=0.1, gamma=4.0, delta=0.1, max_iters=30)
    return fit_design([raw], ["only"], Y, cfg), raw


class TestVocabulary:
    def test_named_sizes(self):
        assert default_vocabulary(2) == ["Small", "Large"]
        assert default_vocabulary(4) == ["Small", "Medium", "Little Large", "Large"]
        assert default_vocabulary(5)[-1] == "Very Large"

    def test_ordinal_fallback(self):
        assert default_vocabulary(3) == ["Level 1 of 3", "Level 2 of 3", "Level 3 of 3"]


class TestLabels:
    def test_worked_age_example(self):
        # centers 0.7332, 0.7780, 0.2635, 0.6699: the first ranks 3rd
        # ascending, so rule 1 reads "Little Large"
        centers = np.array([[0.7332], [0.7780], [0.2635], [0.6699]])
        ant = Antecedent(centers, np.full((4, 1), 0.01))
        labels = linguistic_labels(ant)
        assert labels[0][0] == "Little Large"
        assert labels[1][0] == "Large"
        assert labels[2][0] == "Small"
        assert labels[3][0] == "Medium"

    def test_two_rule_ordering(self):
        ant = Antecedent([[0.1], [0.9]], [[0.01], [0.01]])
        labels = linguistic_labels(ant)
        assert labels[0][0] == "Small" and labels[1][0] == "Large"

    def test_tied_centers_rule_order(self):
        ant = Antecedent([[0.5], [0.5]], [[0.01], [0.01]])
        with pytest.warns(DegeneracyWarning, match="tied"):
            labels = linguistic_labels(ant)
        assert labels[0][0] == "Small" and labels[1][0] == "Large"

    def test_permutation_follows_centers_not_indices(self):
        ant1 = Antecedent([[0.1], [0.9]], [[0.01], [0.01]])
        ant2 = Antecedent([[0.9], [0.1]], [[0.01], [0.01]])
        l1 = linguistic_labels(ant1)
        l2 = linguistic_labels(ant2)
        assert l1[0][0] == l2[1][0] == "Small"

    def test_no_duplicate_labels_per_feature(self):
        rng = np.random.default_rng(1)
        ant = Antecedent(rng.uniform(size=(4, 3)), rng.uniform(0.01, 0.1, (4, 3)))
        labels = linguistic_labels(ant)
        for j in range(3):
            col = [labels[k][j] for k in range(4)]
            assert sorted(col) == sorted(default_vocabulary(4))


class TestRuleReport:
    def test_single_rule_affine_report(self):
        ens, _ = small_ensemble(K=1)
        text, report = rule_report(ens, 0)
        assert "Level 1 of 1" in text
        assert report["n_rules"] == 1

    def test_coefficients_bit_exact_in_json(self):
        ens, _ = small_ensemble(K=2, d=2)
        _, report = rule_report(ens, 0, feature_names=["age", "bmi"])
        P = ens.consequents[0]
        for k, rule in enumerate(report["rules"]):
            block = P[k * 3 : (k + 1) * 3]
            assert rule["then"]["output1"]["intercept"] == block[0, 0]
            assert rule["then"]["output1"]["slopes"]["age"] == block[1, 0]
            assert rule["then"]["output2"]["slopes"]["bmi"] == block[2, 1]

    def test_planted_coefficients_render(self):
        ant = Antecedent([[0.2], [0.8]], [[0.05], [0.05]])
        P = np.array([[0.4439], [-0.1001], [-0.3302], [0.1105]])
        ens = ViewEnsemble([ant], [P], np.array([1.0]), ["clinical"],
                           EnsembleConfig(K=2))
        text, report = rule_report(ens, 0, feature_names=["age"])
        assert "0.4439" in text and "0.1001" in text
        assert report["rules"][0]["then"]["output1"]["intercept"] == 0.4439

    def test_name_count_mismatch(self):
        ens, _ = small_ensemble(K=2, d=3)
        with pytest.raises(ValueError, match="feature names"):
            rule_report(ens, 0, feature_names=["a", "b"])


class TestDecisionTrace:
    def test_contributions_sum_to_view_score(self):
        ens, raw = small_ensemble(K=3, d=3)
        for i in range(5):
            trace = decision_trace(ens, 0, raw[i])
            mapped = fuzzy_map(raw[i][None, :], ens.antecedents[0])
            expected = (mapped @ ens.consequents[0])[0]
            assert np.max(np.abs(trace.contributions.sum(axis=0) - expected)) <= 1e-12
            assert np.max(np.abs(trace.combined - expected)) <= 1e-12

    def test_firing_normalized(self):
        ens, raw = small_ensemble(K=4)
        trace = decision_trace(ens, 0, raw[3])
        assert trace.firing.sum() == pytest.approx(1.0, abs=1e-12)

    def test_single_rule_contribution_is_output(self):
        ens, raw = small_ensemble(K=1)
        trace = decision_trace(ens, 0, raw[0])
        assert np.allclose(trace.contributions[0], trace.combined)
        assert trace.dominant_rule == 0

    def test_dominant_rule_at_far_center(self):
        ant = Antecedent([[0.0], [10.0]], [[0.05], [0.05]])
        P = np.vstack([np.ones((2, 2)), 2 * np.ones((2, 2))])
        ens = ViewEnsemble([ant], [P], np.array([1.0]), ["v"], EnsembleConfig(K=2))
        trace = decision_trace(ens, 0, np.array([0.0]))
        assert trace.firing[0] > 0.9
        assert trace.dominant_rule == 0

    def test_decision_one_hot(self):
        ens, raw = small_ensemble(K=2)
        trace = decision_trace(ens, 0, raw[1])
        assert trace.decision.sum() == 1.0
        assert trace.decision[np.argmax(trace.combined)] == 1.0

    def test_dimension_mismatch(self):
        ens, _ = small_ensemble(K=2, d=3)
        with pytest.raises(ValueError, match="features"):
            decision_trace(ens, 0, np.ones(5))


class TestEndToEndViews:
    def test_latent_view_report(self):
        ds = gen_synthetic(30, 2, [4, 3], 2, 0.1, 3.0, seed=4)
        dsn = apply_normalizer(ds, fit_normalizer(ds))
        model = representation.fit(
            dsn, representation.DualRepConfig(m=2, max_iters=5, p=3, seed=5)
        )
        ens = fit(model, dsn, one_hot(dsn.labels, 2), EnsembleConfig(K=2, max_iters=10))
        assert ens.roles == ["view0", "view1", "common", "specific"]
        text, report = rule_report(ens, 2)
        assert report["view"] == "common"
        design, _ = design_matrices(model, ens.config)
        trace = decision_trace(ens, 2, design[2][0])
        assert np.isfinite(trace.combined).all()
