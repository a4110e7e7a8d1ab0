"""SBF-MTSAL and SBF-MTSAL-Concat mask-estimation networks."""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List

import numpy as np

from ..archive import read_container, write_container
from ..config import ExtractorConfig, Variant
from ..errors import DimensionError, FormatError
from .layers import Adaptation, Blstm, ConcatEmbedding, Dense, FrameMean, Tape

MODEL_KIND = "extractor"


@dataclass(frozen=True)
class Architecture:
    aux: tuple
    mask: tuple

    def shapes(self) -> Dict[str, tuple]:
        out = {}
        for layer in self.aux + self.mask:
            out.update(layer.shapes())
        return out


def _sbf_mtsal(cfg: ExtractorConfig) -> Architecture:
    aux = (
        Dense("aux.fc1", cfg.bins, cfg.aux_hidden, "relu"),
        Dense("aux.fc2", cfg.aux_hidden, cfg.aux_hidden, "relu"),
        Dense("aux.out", cfg.aux_hidden, cfg.n_sublayers, "linear"),
        FrameMean("aux.mean"),
    )
    mask = (
        Blstm("mask.blstm", cfg.bins, cfg.blstm_cells),
        Adaptation("mask.adapt", 2 * cfg.blstm_cells, cfg.ff_hidden, cfg.n_sublayers),
        Dense("mask.fc1", cfg.ff_hidden, cfg.ff_hidden, "relu"),
        Dense("mask.fc2", cfg.ff_hidden, cfg.ff_hidden, "relu"),
        Dense("mask.out", cfg.ff_hidden, cfg.bins, "sigmoid"),
    )
    return Architecture(aux, mask)


def _sbf_mtsal_concat(cfg: ExtractorConfig) -> Architecture:
    aux = (
        Blstm("aux.blstm", cfg.bins, cfg.aux_hidden),
        Dense("aux.fc1", 2 * cfg.aux_hidden, cfg.aux_hidden, "relu"),
        Dense("aux.out", cfg.aux_hidden, cfg.embed_dim, "linear"),
        FrameMean("aux.mean"),
    )
    mask = (
        Blstm("mask.blstm1", cfg.bins, cfg.blstm_cells),
        ConcatEmbedding("mask.concat", 2 * cfg.blstm_cells, cfg.embed_dim),
        Dense("mask.fc1", 2 * cfg.blstm_cells + cfg.embed_dim, cfg.ff_hidden, "relu"),
        Blstm("mask.blstm2", cfg.ff_hidden, cfg.blstm_cells),
        Dense("mask.fc2", 2 * cfg.blstm_cells, cfg.ff_hidden, "relu"),
        Dense("mask.out", cfg.ff_hidden, cfg.bins, "sigmoid"),
    )
    return Architecture(aux, mask)


@lru_cache(maxsize=16)
def architecture(cfg: ExtractorConfig) -> Architecture:
    if cfg.variant == Variant.SBF_MTSAL:
        return _sbf_mtsal(cfg)
    return _sbf_mtsal_concat(cfg)


@dataclass
class ExtractorModel:
    config: ExtractorConfig
    params: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def variant(self) -> Variant:
        return self.config.variant

    @property
    def architecture(self) -> Architecture:
        return architecture(self.config)

    def validate(self):
        expected = self.architecture.shapes()
        if set(expected) != set(self.params):
            missing = sorted(set(expected) - set(self.params))
            extra = sorted(set(self.params) - set(expected))
            raise DimensionError(f"parameter set does not match {self.variant.value}: missing={missing} extra={extra}")
        for name, shape in expected.items():
            if tuple(self.params[name].shape) != tuple(shape):
                raise DimensionError(f"{name}: expected shape {shape}, got {self.params[name].shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise DimensionError(f"{name}: non-finite parameter values")
        return self

    def zeros_like(self) -> Dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def copy(self) -> "ExtractorModel":
        return ExtractorModel(self.config, {k: v.copy() for k, v in self.params.items()})


def init_model(cfg: ExtractorConfig) -> ExtractorModel:
    """Uniform(-init_scale, init_scale) initialization drawn from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in architecture(cfg).shapes().items():
        params[name] = rng.uniform(-cfg.init_scale, cfg.init_scale, size=shape)
    return ExtractorModel(cfg, params)


def input_features(mag, cfg: ExtractorConfig) -> np.ndarray:
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[0] < 1 or mag.shape[1] != cfg.bins:
        raise DimensionError(f"expected a non-empty T x {cfg.bins} magnitude, got shape {mag.shape}")
    return np.log1p(mag) if cfg.log_input else mag


@dataclass
class ForwardState:
    mask: np.ndarray
    aux_tape: Tape
    mask_tape: Tape


def forward_state(model: ExtractorModel, mix_mag, aux_mag) -> ForwardState:
    arch = model.architecture
    cfg = model.config
    aux_tape = Tape()
    cond = input_features(aux_mag, cfg)
    for layer in arch.aux:
        cond = aux_tape.apply(layer, model.params, cond)

    mask_tape = Tape()
    h = input_features(mix_mag, cfg)
    for layer in arch.mask:
        h = mask_tape.apply(layer, model.params, h, cond=cond)
    return ForwardState(h, aux_tape, mask_tape)


def forward(model: ExtractorModel, mix_mag, aux_mag) -> np.ndarray:
    """T_mix x bins mask in [0, 1]."""
    return forward_state(model, mix_mag, aux_mag).mask


def conditioning(model: ExtractorModel, aux_mag) -> np.ndarray:
    """Adaptation weights (SBF-MTSAL) or speaker embedding (concat variant)."""
    cond = input_features(aux_mag, model.config)
    for layer in model.architecture.aux:
        cond, _ = layer.forward(model.params, cond)
    return cond


def backward_state(model: ExtractorModel, state: ForwardState, dmask, grads) -> Dict[str, np.ndarray]:
    """Accumulate d(loss)/d(params) into ``grads`` given d(loss)/d(mask)."""
    state.mask_tape.backward(model.params, dmask, grads)
    dcond = state.mask_tape.side_grads.get("cond")
    if dcond is not None:
        state.aux_tape.backward(model.params, dcond, grads)
    return grads


def save_model(path, model: ExtractorModel):
    model.validate()
    names: List[str] = list(model.architecture.shapes())
    meta = {"variant": model.variant.value, "config": model.config.model_dump(mode="json")}
    return write_container(path, MODEL_KIND, {n: model.params[n] for n in names}, meta=meta, dtype="<f4")


def load_model(path) -> ExtractorModel:
    header, tensors = read_container(path, kind=MODEL_KIND)
    try:
        cfg = ExtractorConfig.model_validate(header["meta"]["config"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: extractor header has no valid config") from exc
    if header["meta"].get("variant") != cfg.variant.value:
        raise FormatError(f"{path}: header variant disagrees with its config")
    return ExtractorModel(cfg, tensors).validate()
