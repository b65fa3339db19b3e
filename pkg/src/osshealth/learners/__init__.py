"""From-scratch classifiers sharing one train/predict contract."""

from .base import (
    Standardizer,
    fit_standardizer,
    load_model,
    predict,
    predict_proba,
    save_model,
    standardize,
)
from .boosting import (
    BoostingParams,
    GradientBoostingModel,
    deviance_gradient,
    multinomial_deviance,
    softmax,
    train_gradient_boosting,
)
from .forest import ForestParams, RandomForestModel, train_random_forest
from .svm import SvmRbfModel, train_svm_rbf
from .tree import (
    DecisionTreeModel,
    TreeParams,
    gini,
    prune_cost_complexity,
    train_decision_tree,
)

FAMILIES = {
    "decision_tree": DecisionTreeModel,
    "random_forest": RandomForestModel,
    "gradient_boosting": GradientBoostingModel,
    "svm_rbf": SvmRbfModel,
}

__all__ = [
    "BoostingParams",
    "DecisionTreeModel",
    "FAMILIES",
    "ForestParams",
    "GradientBoostingModel",
    "RandomForestModel",
    "Standardizer",
    "SvmRbfModel",
    "TreeParams",
    "deviance_gradient",
    "fit_standardizer",
    "gini",
    "load_model",
    "multinomial_deviance",
    "predict",
    "predict_proba",
    "prune_cost_complexity",
    "save_model",
    "softmax",
    "standardize",
    "train_decision_tree",
    "train_gradient_boosting",
    "train_random_forest",
    "train_svm_rbf",
]
