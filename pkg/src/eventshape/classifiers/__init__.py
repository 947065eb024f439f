"""Clustering, generative and SVM classifiers over window descriptors."""
from .ggm import GgmModel, ggm_fit, ggm_score, name_clusters
from .kmeans import kmeans, purity
from .memory import majority_vote, memory_classify
from .svm import BinarySVM, SvmEnsemble, couple_probabilities, grid_search, svm_train_binary

__all__ = [
    "GgmModel", "ggm_fit", "ggm_score", "name_clusters", "kmeans", "purity",
    "memory_classify", "majority_vote", "BinarySVM", "SvmEnsemble",
    "couple_probabilities", "grid_search", "svm_train_binary",
]
