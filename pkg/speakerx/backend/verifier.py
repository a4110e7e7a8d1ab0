"""The i-vector/PLDA verifier trained and stored as one unit."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence

import numpy as np

from ..archive import read_container, write_container
from ..config import BackendConfig
from ..errors import DimensionError, FormatError
from .gmm import Gmm, bw_stats, train_ubm
from .ivector import TMatrix, extract_ivector, extract_ivectors, train_tmatrix
from .lda import Lda, train_lda
from .plda import PldaModel, PldaScorer, train_plda

logger = logging.getLogger(__name__)

MODEL_KIND = "backend"


@dataclass
class BackendModel:
    ubm: Gmm
    tv: TMatrix
    lda: Lda
    plda: PldaModel
    config: BackendConfig

    def ivector(self, feats) -> np.ndarray:
        return extract_ivector(self.tv, self.ubm, bw_stats(self.ubm, feats))

    def embed_ivectors(self, ivectors) -> np.ndarray:
        """LDA projection and PLDA preprocessing of raw i-vectors."""
        return self.plda.preprocess(self.lda.apply(ivectors))

    def embed(self, feats) -> np.ndarray:
        return self.embed_ivectors(self.ivector(feats))[0]


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class BackendTraining:
    model: BackendModel
    ivectors: Dict[str, np.ndarray]


def train_backend(features: Mapping[str, np.ndarray], labels: Mapping[str, str], cfg: BackendConfig,
                  jobs: int = 1) -> BackendTraining:
    """UBM -> statistics -> T matrix -> i-vectors -> LDA -> PLDA, over sorted utterance ids."""
    utts = sorted(features)
    missing = [u for u in utts if u not in labels]
    if missing:
        raise DimensionError(f"no speaker label for {len(missing)} utterance(s): {', '.join(missing[:10])}")
    spks = [labels[u] for u in utts]
    logger.info("training back-end on %d utterances from %d speakers", len(utts), len(set(spks)))

    ubm = train_ubm([features[u] for u in utts], cfg.ubm_components, cfg.ubm_iters, cfg.seed)
    stats = _map(lambda u: bw_stats(ubm, features[u]), utts, jobs)
    tv = train_tmatrix(stats, ubm, cfg.tv_rank, cfg.tv_iters, cfg.seed)
    ivectors = extract_ivectors(tv, ubm, stats)
    lda = train_lda(ivectors, spks, cfg.lda_dim)
    plda = train_plda(lda.apply(ivectors), spks, cfg.plda_dim, cfg.plda_iters, cfg.length_norm)
    model = BackendModel(ubm, tv, lda, plda, cfg)
    return BackendTraining(model, dict(zip(utts, ivectors)))


def save_backend(path, model: BackendModel):
    tensors = {
        "ubm/weights": model.ubm.weights,
        "ubm/means": model.ubm.means,
        "ubm/variances": model.ubm.variances,
        "tv/matrix": model.tv.matrix,
        "lda/projection": model.lda.projection,
        "lda/eigenvalues": model.lda.eigenvalues,
        "plda/center": model.plda.center,
        "plda/whitener": model.plda.whitener,
        "plda/mu": model.plda.mu,
        "plda/v": model.plda.v,
        "plda/sigma": model.plda.sigma,
    }
    meta = {"length_norm": model.plda.length_norm, "config": model.config.model_dump(mode="json")}
    return write_container(path, MODEL_KIND, tensors, meta=meta, dtype="<f8")


def load_backend(path) -> BackendModel:
    header, t = read_container(path, kind=MODEL_KIND)
    try:
        cfg = BackendConfig.model_validate(header["meta"]["config"])
        return BackendModel(
            ubm=Gmm(t["ubm/weights"], t["ubm/means"], t["ubm/variances"]),
            tv=TMatrix(t["tv/matrix"]),
            lda=Lda(t["lda/projection"], t["lda/eigenvalues"]),
            plda=PldaModel(t["plda/center"], t["plda/whitener"], t["plda/mu"], t["plda/v"], t["plda/sigma"],
                           bool(header["meta"]["length_norm"])),
            config=cfg,
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: incomplete back-end model ({exc})") from exc


class Verifier:
    """Scores (enrollment, test) feature pairs; shareable across threads."""

    def __init__(self, model: BackendModel):
        self.model = model
        self.scorer = PldaScorer(model.plda)

    def embed(self, feats) -> np.ndarray:
        return self.model.embed(feats)

    def embed_many(self, feats: Sequence[np.ndarray], jobs: int = 1):
        return _map(self.embed, feats, jobs)

    def score(self, enroll_vec, test_vec) -> float:
        return self.scorer.score(enroll_vec, test_vec)
