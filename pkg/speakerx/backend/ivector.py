"""Total-variability model: T-matrix EM and i-vector extraction."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np
from scipy import linalg

from ..archive import read_container, write_container
from ..errors import DimensionError, InputError
from .gmm import BwStats, Gmm

logger = logging.getLogger(__name__)

RIDGE = 1e-6
IVECTORS_KIND = "ivectors"


@dataclass
class TMatrix:
    matrix: np.ndarray  # (C*D) x R, component-major rows
    history: List[float] = field(default_factory=list, compare=False)

    @property
    def rank(self) -> int:
        return self.matrix.shape[1]

    def blocks(self, n_components: int) -> np.ndarray:
        """C x D x R view of the matrix."""
        return self.matrix.reshape(n_components, -1, self.rank)


def _check(gmm: Gmm, stats: BwStats):
    if stats.n.shape != (gmm.n_components,) or stats.f.shape != gmm.means.shape:
        raise DimensionError(f"statistics {stats.n.shape}/{stats.f.shape} do not fit a "
                             f"{gmm.n_components} x {gmm.dim} UBM")


def _precision_products(blocks: np.ndarray, gmm: Gmm) -> np.ndarray:
    """C x R x R matrices T_c' inv(Sigma_c) T_c."""
    return np.einsum("cdr,cd,cds->crs", blocks, 1.0 / gmm.variances, blocks)


def _cholesky(matrix):
    try:
        return linalg.cho_factor(matrix, lower=True)
    except linalg.LinAlgError:
        logger.warning("posterior precision not positive definite; adding ridge %.0e", RIDGE)
        return linalg.cho_factor(matrix + RIDGE * np.eye(matrix.shape[0]), lower=True)


def _posterior(blocks, tt, gmm: Gmm, stats: BwStats):
    """Posterior mean, precision factor and T' inv(Sigma) f of one utterance."""
    rank = blocks.shape[2]
    precision = np.eye(rank) + np.einsum("c,crs->rs", stats.n, tt)
    linear = np.einsum("cdr,cd->r", blocks, stats.f / gmm.variances)
    factor = _cholesky(precision)
    return linalg.cho_solve(factor, linear), factor, linear


def extract_ivector(tv: TMatrix, gmm: Gmm, stats: BwStats) -> np.ndarray:
    _check(gmm, stats)
    blocks = tv.blocks(gmm.n_components)
    mean, _, _ = _posterior(blocks, _precision_products(blocks, gmm), gmm, stats)
    return mean


def extract_ivectors(tv: TMatrix, gmm: Gmm, stats: Sequence[BwStats]) -> np.ndarray:
    """Stack of i-vectors, sharing the precomputed T_c' inv(Sigma_c) T_c terms."""
    blocks = tv.blocks(gmm.n_components)
    tt = _precision_products(blocks, gmm)
    out = np.zeros((len(stats), tv.rank))
    for i, s in enumerate(stats):
        _check(gmm, s)
        out[i], _, _ = _posterior(blocks, tt, gmm, s)
    return out


def _e_step(blocks, gmm: Gmm, stats: Sequence[BwStats]):
    n_comp, dim, rank = blocks.shape
    tt = _precision_products(blocks, gmm)
    acc_a = np.zeros((n_comp, rank, rank))
    acc_c = np.zeros((n_comp, dim, rank))
    objective = 0.0
    for s in stats:
        mean, factor, linear = _posterior(blocks, tt, gmm, s)
        cov = linalg.cho_solve(factor, np.eye(rank))
        second = cov + np.outer(mean, mean)
        acc_a += s.n[:, None, None] * second[None, :, :]
        acc_c += s.f[:, :, None] * mean[None, None, :]
        log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
        objective += -0.5 * log_det + 0.5 * float(linear @ mean)
    return acc_a, acc_c, objective


def train_tmatrix(stats: Sequence[BwStats], gmm: Gmm, rank: int, iters: int, seed: int) -> TMatrix:
    """EM for the total-variability matrix with the UBM covariances held fixed.

    ``history`` records the T-dependent part of the marginal log-likelihood
    of the statistics after every iteration.
    """
    if not stats:
        raise InputError("no statistics to train the total-variability matrix on")
    for s in stats:
        _check(gmm, s)
    n_comp, dim = gmm.means.shape
    if rank > n_comp * dim:
        raise DimensionError(f"rank {rank} exceeds supervector size {n_comp * dim}")
    if len(stats) < rank:
        logger.warning("training a rank-%d T matrix on only %d utterances", rank, len(stats))

    rng = np.random.default_rng(seed)
    blocks = rng.standard_normal((n_comp, dim, rank)) / np.sqrt(rank)

    acc_a, acc_c, _ = _e_step(blocks, gmm, stats)
    history = []
    for it in range(iters):
        for c in range(n_comp):
            blocks[c] = linalg.solve(acc_a[c], acc_c[c].T, assume_a="pos").T
        acc_a, acc_c, objective = _e_step(blocks, gmm, stats)
        history.append(objective)
        logger.info("T-matrix EM %d/%d: objective %.4f", it + 1, iters, objective)
    return TMatrix(blocks.reshape(n_comp * dim, rank), history)


def write_ivectors(path, ivectors: Mapping[str, np.ndarray], meta=None):
    return write_container(path, IVECTORS_KIND, dict(sorted(ivectors.items())), meta=meta, dtype="<f8")


def read_ivectors(path) -> Dict[str, np.ndarray]:
    _, tensors = read_container(path, kind=IVECTORS_KIND)
    return tensors
