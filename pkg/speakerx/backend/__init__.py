from .gmm import BwStats, Gmm, bw_stats, train_ubm
from .ivector import TMatrix, extract_ivector, train_tmatrix
from .lda import Lda, train_lda
from .plda import PldaModel, plda_score, train_plda
from .verifier import BackendModel, Verifier, load_backend, save_backend, train_backend

__all__ = [
    "BackendModel",
    "BwStats",
    "Gmm",
    "Lda",
    "PldaModel",
    "TMatrix",
    "Verifier",
    "bw_stats",
    "extract_ivector",
    "load_backend",
    "plda_score",
    "save_backend",
    "train_backend",
    "train_lda",
    "train_plda",
    "train_tmatrix",
    "train_ubm",
]
