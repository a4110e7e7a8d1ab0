"""Adam training of an extraction network with dev-driven learning-rate decay."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..audio import load_wav, magnitude, stft
from ..config import ExtractorConfig
from ..errors import InputError, NumericOverflowError, TrainingFailureError
from ..manifests import MixtureRecord
from .loss import loss_and_grad, target_magnitude
from .network import ExtractorModel, backward_state, forward_state, init_model, save_model

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Example:
    """One training mixture, cached as single-precision spectra."""
    mix_id: str
    mix_mag: np.ndarray
    aux_mag: np.ndarray
    target: np.ndarray

    @classmethod
    def from_spectra(cls, mix_id, mix, ref, aux) -> "Example":
        return cls(
            mix_id=mix_id,
            mix_mag=magnitude(mix).astype(np.float32),
            aux_mag=magnitude(aux).astype(np.float32),
            target=target_magnitude(ref, mix).astype(np.float32),
        )

    @classmethod
    def from_record(cls, rec: MixtureRecord) -> "Example":
        mix = stft(load_wav(rec.mix_path)).astype(np.complex64)
        ref = stft(load_wav(rec.ref_path)).astype(np.complex64)
        aux = stft(load_wav(rec.aux_path)).astype(np.complex64)
        return cls.from_spectra(rec.mix_id, mix, ref, aux)


def load_examples(records: Sequence[MixtureRecord], jobs: int = 1) -> List[Example]:
    if jobs <= 1:
        return [Example.from_record(r) for r in records]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(Example.from_record, records))


def example_gradient(model: ExtractorModel, ex: Example):
    state = forward_state(model, ex.mix_mag, ex.aux_mag)
    mix_mag = ex.mix_mag.astype(np.float64)
    loss, dmask = loss_and_grad(state.mask, mix_mag, ex.target.astype(np.float64))
    grads = backward_state(model, state, dmask, model.zeros_like())
    return loss, grads


def backward(model: ExtractorModel, batch: Sequence[Example], jobs: int = 1):
    """Mean loss and mean parameter gradients over ``batch``.

    Per-utterance results are reduced in batch order, so the sum does not
    depend on ``jobs``.
    """
    if not batch:
        raise InputError("cannot compute gradients of an empty batch")
    if jobs <= 1 or len(batch) == 1:
        results = [example_gradient(model, ex) for ex in batch]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda ex: example_gradient(model, ex), batch))

    total = model.zeros_like()
    loss = 0.0
    for ex_loss, grads in results:
        loss += ex_loss
        for name, g in grads.items():
            total[name] += g
    n = float(len(batch))
    return loss / n, {name: g / n for name, g in total.items()}


def evaluate_loss(model: ExtractorModel, examples: Sequence[Example]) -> float:
    losses = []
    for ex in examples:
        mask = forward_state(model, ex.mix_mag, ex.aux_mag).mask
        loss, _ = loss_and_grad(mask, ex.mix_mag.astype(np.float64), ex.target.astype(np.float64))
        losses.append(loss)
    return float(np.mean(losses))


class Adam:
    def __init__(self, params: Dict[str, np.ndarray], beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            params[name] -= lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)


def next_learning_rate(lr: float, previous_dev: Optional[float], dev: float, decay: float) -> float:
    if previous_dev is not None and dev > previous_dev:
        return lr * decay
    return lr


def should_stop(epoch: int, previous_dev: Optional[float], dev: float, cfg: ExtractorConfig) -> bool:
    if epoch >= cfg.max_epochs:
        return True
    if previous_dev is None or epoch < cfg.min_epochs:
        return False
    rel = (previous_dev - dev) / max(abs(previous_dev), 1e-12)
    return rel < cfg.stop_rel_loss


@dataclass
class TrainingResult:
    model: ExtractorModel
    history: List[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_loss: float = float("inf")


def train(cfg: ExtractorConfig, train_set: Sequence[Example], dev_set: Sequence[Example],
          out_path, log_path=None, jobs: int = 1) -> TrainingResult:
    """Train until the dev loss stops improving; the best model is saved to ``out_path``."""
    if not train_set:
        raise InputError("training split is empty")
    if not dev_set:
        raise InputError("dev split is empty")
    out_path = Path(out_path)
    log_path = Path(log_path) if log_path else out_path.with_suffix(".log.jsonl")
    log_path.parent.mkdir(parents=True, exist_ok=True)

    model = init_model(cfg)
    adam = Adam(model.params)
    rng = np.random.default_rng([cfg.seed, 1])
    result = TrainingResult(model.copy())
    checkpoint = None
    lr = cfg.lr0
    previous_dev = None

    with open(log_path, "w", encoding="utf-8") as log_fh:
        for epoch in range(1, cfg.max_epochs + 1):
            order = rng.permutation(len(train_set))
            batch_losses = []
            try:
                for start in range(0, len(order), cfg.batch):
                    batch = [train_set[i] for i in order[start:start + cfg.batch]]
                    loss, grads = backward(model, batch, jobs)
                    batch_losses.append(loss * len(batch))
                    adam.step(model.params, grads, lr)
                dev_loss = evaluate_loss(model, dev_set)
            except NumericOverflowError as exc:
                raise TrainingFailureError(f"epoch {epoch}: {exc}", checkpoint) from exc
            train_loss = float(np.sum(batch_losses) / len(train_set))

            if not (np.isfinite(dev_loss) and np.isfinite(train_loss)):
                raise TrainingFailureError(f"epoch {epoch}: loss diverged (train={train_loss}, dev={dev_loss})",
                                           checkpoint)

            row = {"epoch": epoch, "train_loss": train_loss, "dev_loss": dev_loss, "lr": lr}
            result.history.append(row)
            log_fh.write(json.dumps(row) + "\n")
            log_fh.flush()
            logger.info("epoch %d: train %.6f dev %.6f lr %.3g", epoch, train_loss, dev_loss, lr)

            if dev_loss < result.best_dev_loss:
                result.model = model.copy()
                result.best_epoch, result.best_dev_loss = epoch, dev_loss
                checkpoint = save_model(out_path, model)
                logger.debug("checkpoint at epoch %d -> %s", epoch, checkpoint)

            if should_stop(epoch, previous_dev, dev_loss, cfg):
                break
            new_lr = next_learning_rate(lr, previous_dev, dev_loss, cfg.lr_decay)
            if new_lr != lr:
                logger.info("dev loss rose %.6f -> %.6f; learning rate %.3g -> %.3g",
                            previous_dev, dev_loss, lr, new_lr)
            lr = new_lr
            previous_dev = dev_loss

    logger.info("best dev loss %.6f at epoch %d", result.best_dev_loss, result.best_epoch)
    return result
