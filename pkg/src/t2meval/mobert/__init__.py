from .bpe import BpeVocab, train_bpe
from .model import MoBertConfig, MoBertModel, assemble_sequence, load_checkpoint, save_checkpoint
from .losses import balanced_loss, bce_group, bce_per_sample, weighted_contrastive_mean, weighted_loss
from .training import (
    BagOfWordsSimilarity,
    ConstantSimilarity,
    TrainerConfig,
    TrainingBatch,
    TrainingHistory,
    load_corpus,
    train,
)
from .regression import RegressionHead, extract_regression_features, fit_regression, score

__all__ = [
    "BpeVocab", "train_bpe",
    "MoBertConfig", "MoBertModel", "assemble_sequence", "load_checkpoint", "save_checkpoint",
    "balanced_loss", "bce_group", "bce_per_sample", "weighted_contrastive_mean", "weighted_loss",
    "BagOfWordsSimilarity", "ConstantSimilarity", "TrainerConfig", "TrainingBatch",
    "TrainingHistory", "load_corpus", "train",
    "RegressionHead", "extract_regression_features", "fit_regression", "score",
]
