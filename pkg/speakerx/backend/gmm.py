"""Diagonal-covariance GMM universal background model and Baum-Welch statistics."""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy.special import logsumexp

from ..errors import DimensionError, InputError

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-3  # relative to the global variance
SPLIT_OFFSET = 0.2  # in standard deviations
SPLIT_EM_ITERS = 2
MIN_FRAMES_PER_COMPONENT = 10
EMPTY_COMPONENT = 1e-10


@dataclass
class Gmm:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    history: List[float] = field(default_factory=list, compare=False)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_likelihoods(self, x) -> np.ndarray:
        """T x C matrix of log(w_c) + log N(x_t; m_c, diag(v_c))."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise DimensionError(f"features have dimension {x.shape[1]}, UBM expects {self.dim}")
        precision = 1.0 / self.variances
        const = (np.log(self.weights)
                 - 0.5 * np.sum(np.log(2.0 * np.pi * self.variances), axis=1)
                 - 0.5 * np.sum(self.means ** 2 * precision, axis=1))
        return const + x @ (self.means * precision).T - 0.5 * (x ** 2) @ precision.T

    def posteriors(self, x):
        """Responsibilities (T x C) and the total log-likelihood."""
        ll = self.log_likelihoods(x)
        norm = logsumexp(ll, axis=1, keepdims=True)
        return np.exp(ll - norm), float(norm.sum())


@dataclass
class BwStats:
    n: np.ndarray
    f: np.ndarray

    @property
    def n_frames(self) -> float:
        return float(self.n.sum())


def bw_stats(gmm: Gmm, feats) -> BwStats:
    """Zeroth-order and UBM-centred first-order statistics of one utterance."""
    x = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    gamma, _ = gmm.posteriors(x)
    n = gamma.sum(axis=0)
    f = gamma.T @ x - n[:, None] * gmm.means
    return BwStats(n, f)


def _m_step(x, gamma, floor) -> Gmm:
    n = gamma.sum(axis=0)
    means = (gamma.T @ x) / n[:, None]
    variances = (gamma.T @ (x * x)) / n[:, None] - means ** 2
    return Gmm(n / n.sum(), means, np.maximum(variances, floor))


def _reseed_empty(gmm: Gmm, gamma: np.ndarray, rng) -> np.ndarray:
    """Re-seed components that captured no frames from the heaviest one."""
    n = gamma.sum(axis=0)
    empty = np.flatnonzero(n < EMPTY_COMPONENT)
    for c in empty:
        heavy = int(np.argmax(n))
        logger.warning("UBM component %d is empty; re-seeding from component %d", c, heavy)
        offset = SPLIT_OFFSET * np.sqrt(gmm.variances[heavy]) * rng.uniform(0.5, 1.5, gmm.dim)
        gmm.means[c] = gmm.means[heavy] + offset
        gmm.means[heavy] = gmm.means[heavy] - offset
        gmm.variances[c] = gmm.variances[heavy]
        gmm.weights[c] = gmm.weights[heavy] = 0.5 * gmm.weights[heavy]
        n[c] = n[heavy] = 0.5 * n[heavy]
    return empty


def _em_step(x, gmm: Gmm, floor, rng) -> Gmm:
    gamma, _ = gmm.posteriors(x)
    if _reseed_empty(gmm, gamma, rng).size:
        gamma, _ = gmm.posteriors(x)
    return _m_step(x, gamma, floor)


def _split(gmm: Gmm, target: int, rng) -> Gmm:
    """Split the heaviest components until there are ``target`` of them (at most doubling)."""
    n_new = min(gmm.n_components, target - gmm.n_components)
    heaviest = np.argsort(-gmm.weights, kind="stable")[:n_new]
    weights, means, variances = list(gmm.weights), list(gmm.means), list(gmm.variances)
    for c in heaviest:
        offset = SPLIT_OFFSET * np.sqrt(gmm.variances[c]) * rng.uniform(0.5, 1.5, gmm.dim)
        means[c] = gmm.means[c] + offset
        means.append(gmm.means[c] - offset)
        variances.append(gmm.variances[c].copy())
        weights[c] = 0.5 * gmm.weights[c]
        weights.append(0.5 * gmm.weights[c])
    return Gmm(np.array(weights), np.array(means), np.array(variances))


def train_ubm(features: Sequence[np.ndarray], n_components: int, iters: int, seed: int) -> Gmm:
    """Binary-split initialization from the global Gaussian, then ``iters`` EM passes.

    ``history`` holds the total log-likelihood after every recorded EM pass.
    """
    x = np.vstack([np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in features if len(f)])
    if x.shape[0] < MIN_FRAMES_PER_COMPONENT * n_components:
        raise InputError(f"UBM with {n_components} components needs at least "
                         f"{MIN_FRAMES_PER_COMPONENT * n_components} frames, got {x.shape[0]}")
    rng = np.random.default_rng(seed)
    global_var = x.var(axis=0)
    floor = VARIANCE_FLOOR * global_var
    gmm = Gmm(np.ones(1), x.mean(axis=0, keepdims=True), np.maximum(global_var, floor)[None, :])

    while gmm.n_components < n_components:
        gmm = _split(gmm, n_components, rng)
        for _ in range(SPLIT_EM_ITERS):
            gmm = _em_step(x, gmm, floor, rng)
        logger.debug("UBM split to %d components", gmm.n_components)

    history = []
    for it in range(iters):
        gmm = _em_step(x, gmm, floor, rng)
        _, total = gmm.posteriors(x)
        history.append(total)
        logger.info("UBM EM %d/%d: log-likelihood %.4f (%.4f per frame)", it + 1, iters, total, total / x.shape[0])
    gmm.history = history
    return gmm
