"""Phase-sensitive mask targets and the magnitude + temporal spectrum loss."""
import numpy as np

from ..audio import dynamics, regression_operator
from ..errors import DimensionError

EPS = 1e-8


def _check_shapes(**arrays):
    shapes = {name: np.shape(a) for name, a in arrays.items()}
    if len(set(shapes.values())) != 1:
        detail = ", ".join(f"{k}={v}" for k, v in shapes.items())
        raise DimensionError(f"shape mismatch: {detail}")


def _phase_projection(ref, mix) -> np.ndarray:
    """|X| cos(angle(X) - angle(Y))."""
    ref = np.asarray(ref)
    mix = np.asarray(mix)
    return np.abs(ref) * np.cos(np.angle(ref) - np.angle(mix))


def psm_target(ref, mix) -> np.ndarray:
    _check_shapes(ref=ref, mix=mix)
    ratio = _phase_projection(ref, mix) / np.maximum(np.abs(mix), EPS)
    return np.clip(ratio, 0.0, 1.0)


def target_magnitude(ref, mix) -> np.ndarray:
    """Clipped phase-projected target G, reachable by a mask in [0, 1]."""
    _check_shapes(ref=ref, mix=mix)
    return np.clip(_phase_projection(ref, mix), 0.0, np.abs(mix))


def _loss_terms(estimate, target):
    r = estimate - target
    d1, d2 = dynamics(r)
    return r, d1, d2


def mtsal_loss(mask, mix_mag, ref, mix) -> float:
    _check_shapes(mask=mask, mix_mag=mix_mag, ref=ref, mix=mix)
    return loss_from_target(mask, mix_mag, target_magnitude(ref, mix))


def loss_from_target(mask, mix_mag, target) -> float:
    mask = np.asarray(mask, dtype=np.float64)
    r, d1, d2 = _loss_terms(mask * mix_mag, target)
    return float((np.sum(r * r) + np.sum(d1 * d1) + np.sum(d2 * d2)) / r.size)


def loss_and_grad(mask, mix_mag, target):
    """Loss and its derivative with respect to the mask.

    The delta operator is linear, so the static, delta and acceleration terms
    share one residual R = E - G and the adjoint is D^T applied to the dynamic
    residuals.
    """
    mask = np.asarray(mask, dtype=np.float64)
    mix_mag = np.asarray(mix_mag, dtype=np.float64)
    _check_shapes(mask=mask, mix_mag=mix_mag, target=target)
    r, d1, d2 = _loss_terms(mask * mix_mag, target)
    scale = 1.0 / r.size
    loss = float((np.sum(r * r) + np.sum(d1 * d1) + np.sum(d2 * d2)) * scale)

    op = regression_operator(r.shape[0])
    d_estimate = 2.0 * scale * (r + op.T @ d1 + op.T @ (op.T @ d2))
    return loss, d_estimate * mix_mag
