"""Incomplete multi-view learning with an interpretable TSK fuzzy classifier.

The pipeline has two stages.  First, missing view rows are imputed jointly
with a pair of latent representations (one shared across views, one private
per view) by alternating closed-form least-squares updates regularized by
neighborhood graphs.  Second, the imputed views plus the two latent views
are each mapped into a fuzzy feature space and combined into a cooperative,
entropy-weighted rule-based classifier whose rules can be exported as
human-readable IF-THEN statements.
"""

from mvtsk.dataset import (
    MultiViewDataset,
    NormalizationStats,
    ViewBlock,
    apply_mask,
    apply_normalizer,
    fit_normalizer,
    gen_synthetic,
    load_dataset,
    one_hot,
    save_dataset,
    split_train_test,
)
from mvtsk.representation import DualRepConfig, DualRepModel
from mvtsk.classifier import EnsembleConfig, ViewEnsemble

__all__ = [
    "MultiViewDataset",
    "ViewBlock",
    "NormalizationStats",
    "load_dataset",
    "save_dataset",
    "fit_normalizer",
    "apply_normalizer",
    "apply_mask",
    "split_train_test",
    "one_hot",
    "gen_synthetic",
    "DualRepConfig",
    "DualRepModel",
    "EnsembleConfig",
    "ViewEnsemble",
]

__version__ = "0.1.0"
