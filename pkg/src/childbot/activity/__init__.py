"""Multi-view activity encoding, kernels, classification and evaluation."""
from .classify import LengthMismatch, OneVsAllSVM, UntrainedModel, classify_one_vs_all, fuse_scores, softmax
from .data import CHANNELS, DescriptorSet, Video, load_descriptors, save_descriptors, synthetic_corpus
from .encoding import (
    Codebook,
    DimMismatch,
    EncodedRep,
    NonpositiveNormalizer,
    chi2_distance,
    chi2_kernel_matrix,
    chi2_matrix,
    chi2_multiview_kernel,
    chi2_normalizers,
    encode_bovw,
    encode_vlad,
    train_codebook,
)
from .kmeans import KMeansResult, TooFewDescriptors, kmeans
from .loocv import FUSIONS, InsufficientData, LoocvConfig, LoocvResult, run_loocv, run_loocv_modes

__all__ = [
    "LengthMismatch", "OneVsAllSVM", "UntrainedModel", "classify_one_vs_all", "fuse_scores",
    "softmax", "CHANNELS", "DescriptorSet", "Video", "load_descriptors", "save_descriptors",
    "synthetic_corpus", "Codebook", "DimMismatch", "EncodedRep", "NonpositiveNormalizer",
    "chi2_distance", "chi2_kernel_matrix", "chi2_matrix", "chi2_multiview_kernel",
    "chi2_normalizers", "encode_bovw", "encode_vlad", "train_codebook", "KMeansResult",
    "TooFewDescriptors", "kmeans", "FUSIONS", "InsufficientData", "LoocvConfig", "LoocvResult",
    "run_loocv", "run_loocv_modes",
]
