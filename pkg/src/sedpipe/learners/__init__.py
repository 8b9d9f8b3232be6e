"""Self-contained ML primitives: k-means, kernels, SVM, forests, GMM-HMMs."""

from .forest import (
    DEFAULT_TREES,
    ForestCls,
    ForestReg,
    Tree,
    rf_predict_proba,
    rf_predict_reg,
    rf_train_cls,
    rf_train_reg,
)
from .hmm import (
    DiagGmm,
    HmmModel,
    build_decoding_graph,
    connected_decode,
    hmm_train,
    path_segments,
    viterbi_decode,
    viterbi_path,
)
from .kernels import (
    KernelSpec,
    chi2_cross,
    chi2_distance,
    chi2_gram,
    combined_gram,
    combined_kernel,
    mean_chi2,
    rbf_gram,
)
from .kmeans import Codebook, kmeans_fit
from .serialize import load_model, save_model
from .svm import (
    KKT_TOL,
    PairMachine,
    SvmModel,
    cross_val_accuracy,
    cv_accuracy_precomputed,
    smo_solve,
    stratified_folds,
    svm_train,
)

__all__ = [
    "Codebook",
    "DEFAULT_TREES",
    "DiagGmm",
    "ForestCls",
    "ForestReg",
    "HmmModel",
    "KKT_TOL",
    "KernelSpec",
    "PairMachine",
    "SvmModel",
    "Tree",
    "build_decoding_graph",
    "chi2_cross",
    "chi2_distance",
    "chi2_gram",
    "combined_gram",
    "combined_kernel",
    "connected_decode",
    "cross_val_accuracy",
    "cv_accuracy_precomputed",
    "hmm_train",
    "path_segments",
    "kmeans_fit",
    "load_model",
    "mean_chi2",
    "rbf_gram",
    "rf_predict_proba",
    "rf_predict_reg",
    "rf_train_cls",
    "rf_train_reg",
    "save_model",
    "smo_solve",
    "stratified_folds",
    "svm_train",
    "viterbi_decode",
    "viterbi_path",
]
