"""Gaussian PLDA: x = mu + V y + eps, eps ~ N(0, Sigma) with full Sigma.

Inputs are centred, whitened by the training total covariance and (by
default) length-normalized to sqrt(d) before the model sees them.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy import linalg

from ..errors import DimensionError, InputError

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-8


@dataclass
class PldaModel:
    center: np.ndarray
    whitener: np.ndarray
    mu: np.ndarray
    v: np.ndarray
    sigma: np.ndarray
    length_norm: bool = True
    history: List[float] = field(default_factory=list, compare=False)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def n_latent(self) -> int:
        return self.v.shape[1]

    def preprocess(self, x) -> np.ndarray:
        y = (np.atleast_2d(np.asarray(x, dtype=np.float64)) - self.center) @ self.whitener
        if self.length_norm:
            norms = np.maximum(np.linalg.norm(y, axis=1, keepdims=True), 1e-12)
            y = y * np.sqrt(y.shape[1]) / norms
        return y


def _floor_spd(matrix, what):
    matrix = 0.5 * (matrix + matrix.T)
    values, vectors = linalg.eigh(matrix)
    if values.min() < EIGEN_FLOOR:
        logger.warning("%s lost positive definiteness (min eigenvalue %.3g); flooring at %.0e",
                       what, values.min(), EIGEN_FLOOR)
        matrix = (vectors * np.maximum(values, EIGEN_FLOOR)) @ vectors.T
        matrix = 0.5 * (matrix + matrix.T)
    return matrix


def fit_preprocessing(x):
    """Centre and total-covariance whitener estimated on ``x``."""
    center = x.mean(axis=0)
    cov = np.cov(x - center, rowvar=False, bias=True).reshape(x.shape[1], x.shape[1])
    values, vectors = linalg.eigh(0.5 * (cov + cov.T))
    whitener = vectors / np.sqrt(np.maximum(values, EIGEN_FLOOR))
    return center, whitener


def _speaker_sums(y, labels):
    speakers = np.unique(labels)
    counts = np.array([np.sum(labels == s) for s in speakers], dtype=np.float64)
    sums = np.vstack([y[labels == s].sum(axis=0) for s in speakers])
    return counts, sums


def _latent_posteriors(v, sigma_inv, counts, sums):
    """Per speaker: posterior mean, covariance and log|P_s|."""
    q = v.shape[1]
    vs = v.T @ sigma_inv
    vsv = vs @ v
    means, covs, logdets = [], [], []
    for n, total in zip(counts, sums):
        precision = np.eye(q) + n * vsv
        factor = linalg.cho_factor(precision, lower=True)
        means.append(linalg.cho_solve(factor, vs @ total))
        covs.append(linalg.cho_solve(factor, np.eye(q)))
        logdets.append(2.0 * np.sum(np.log(np.diag(factor[0]))))
    return np.array(means).reshape(len(counts), q), np.array(covs).reshape(len(counts), q, q), np.array(logdets)


def log_likelihood(y, labels, mu, v, sigma) -> float:
    """Marginal log-likelihood of speaker-grouped data (determinant lemma per speaker)."""
    x = y - mu
    labels = np.asarray(labels)
    dim = x.shape[1]
    sigma_inv = linalg.inv(sigma)
    _, sigma_logdet = np.linalg.slogdet(sigma)
    counts, sums = _speaker_sums(x, labels)
    total = 0.0
    if v.shape[1]:
        means, _, logdets = _latent_posteriors(v, sigma_inv, counts, sums)
        linear = sums @ sigma_inv @ v
        total += 0.5 * np.sum(linear * means) - 0.5 * logdets.sum()
    quad = np.einsum("nd,de,ne->", x, sigma_inv, x)
    total += -0.5 * (x.shape[0] * dim * np.log(2.0 * np.pi) + x.shape[0] * sigma_logdet + quad)
    return float(total)


def _initial_params(x, labels, q):
    """V from the leading between-speaker directions, Sigma from the within-speaker scatter."""
    within = x.copy()
    between = np.zeros((x.shape[1], x.shape[1]))
    for spk in np.unique(labels):
        rows = labels == spk
        centre = x[rows].mean(axis=0)
        within[rows] -= centre
        between += rows.sum() * np.outer(centre, centre)
    values, vectors = linalg.eigh(between / x.shape[0])
    top = np.argsort(values)[::-1][:q]
    v = vectors[:, top] * np.sqrt(np.maximum(values[top], EIGEN_FLOOR))
    sigma = _floor_spd(within.T @ within / x.shape[0], "initial residual covariance")
    return v, sigma


def train_plda(x, labels: Sequence, n_latent: int, iters: int, length_norm: bool = True) -> PldaModel:
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise DimensionError(f"{x.shape} data do not match {labels.shape[0]} labels")
    dim = x.shape[1]
    if not 0 <= n_latent <= dim:
        raise DimensionError(f"PLDA latent size {n_latent} must be in [0, {dim}]")
    _, per_speaker = np.unique(labels, return_counts=True)
    if np.sum(per_speaker >= 2) < 2:
        raise InputError("PLDA needs at least 2 speakers with at least 2 utterances each")

    center, whitener = fit_preprocessing(x)
    model = PldaModel(center, whitener, np.zeros(dim), np.zeros((dim, 0)), np.eye(dim), length_norm)
    y = model.preprocess(x)
    mu = y.mean(axis=0)
    yc = y - mu
    scatter = yc.T @ yc

    v, sigma = _initial_params(yc, labels, n_latent)
    history = []
    for it in range(iters):
        if n_latent == 0:
            sigma = _floor_spd(scatter / yc.shape[0], "residual covariance")
        else:
            counts, sums = _speaker_sums(yc, labels)
            means, covs, _ = _latent_posteriors(v, linalg.inv(sigma), counts, sums)
            second = np.einsum("s,sqr->qr", counts, covs) + (means * counts[:, None]).T @ means
            cross = sums.T @ means  # d x q
            v = linalg.solve(second, cross.T, assume_a="pos").T
            sigma = _floor_spd((scatter - v @ cross.T) / yc.shape[0], "residual covariance")
        history.append(log_likelihood(y, labels, mu, v, sigma))
        logger.info("PLDA EM %d/%d: log-likelihood %.4f", it + 1, iters, history[-1])

    model.mu, model.v, model.sigma, model.history = mu, v, sigma, history
    return model


class PldaScorer:
    """Two-covariance verification LLR with the inverse blocks precomputed."""

    def __init__(self, model: PldaModel):
        self.model = model
        dim = model.dim
        across = model.v @ model.v.T
        total = across + model.sigma
        total_inv = linalg.inv(total)
        schur = total - across @ total_inv @ across
        a = linalg.inv(schur)
        b = -total_inv @ across @ a
        self.q = 0.5 * ((a - total_inv) + (a - total_inv).T)
        self.b = 0.5 * (b + b.T)
        _, logdet_schur = np.linalg.slogdet(schur)
        _, logdet_total = np.linalg.slogdet(total)
        self.const = -0.5 * (logdet_schur - logdet_total)
        self.dim = dim

    def score(self, enroll, test) -> float:
        e = np.asarray(enroll, dtype=np.float64).reshape(-1)
        t = np.asarray(test, dtype=np.float64).reshape(-1)
        if e.shape[0] != self.dim or t.shape[0] != self.dim:
            raise DimensionError(f"expected {self.dim}-d vectors, got {e.shape[0]} and {t.shape[0]}")
        e = e - self.model.mu
        t = t - self.model.mu
        return float(-0.5 * (e @ self.q @ e + t @ self.q @ t + 2.0 * e @ self.b @ t) + self.const)


def plda_score(model: PldaModel, enroll, test) -> float:
    """LLR of same vs different speaker for two preprocessed vectors."""
    return PldaScorer(model).score(enroll, test)
