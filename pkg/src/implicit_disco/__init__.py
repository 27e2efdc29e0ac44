"""Neural classifiers for implicit discourse relations.

Bag-of-words feedforward, sequential LSTM and binary tree LSTM argument
encoders over fixed word vectors, trained with Adagrad and early stopping.
"""

from .corpus import (
    Dataset,
    LabelScheme,
    RelationInstance,
    binarize,
    filter_for_task,
    label_distribution,
    load_conll_json,
    load_scheme,
)
from .embeddings import WordVectorTable, load_binary_vectors, load_text_vectors, load_vectors
from .evaluation import (
    PredictionSet,
    accuracy,
    bootstrap_test,
    cross_validate,
    majority_baseline,
    predict_dataset,
)
from .models import Model, ModelConfig
from .training import TrainConfig, grid_search, init_params, train

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "LabelScheme",
    "RelationInstance",
    "binarize",
    "filter_for_task",
    "label_distribution",
    "load_conll_json",
    "load_scheme",
    "WordVectorTable",
    "load_binary_vectors",
    "load_text_vectors",
    "load_vectors",
    "PredictionSet",
    "accuracy",
    "bootstrap_test",
    "cross_validate",
    "majority_baseline",
    "predict_dataset",
    "Model",
    "ModelConfig",
    "TrainConfig",
    "grid_search",
    "init_params",
    "train",
]
