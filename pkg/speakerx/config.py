"""Pipeline configuration (YAML validated by pydantic).

Unknown keys are rejected everywhere; every section that draws random
numbers requires an explicit ``seed``.
"""
from enum import Enum
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Variant(str, Enum):
    SBF_MTSAL = "sbf_mtsal"
    SBF_MTSAL_CONCAT = "sbf_mtsal_concat"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for variant in cls:
            if variant.value == key:
                return variant
        valid = ", ".join(v.cli_name for v in cls)
        raise ConfigError(f"unknown variant {value!r}; valid variants: {valid}")

    @property
    def cli_name(self) -> str:
        return self.value.replace("_", "-")


class CorpusConfig(Strict):
    speakers: int = Field(20, ge=4)
    utts_per_speaker: int = Field(10, ge=3)
    test_fraction: float = Field(0.2, gt=0, lt=1)
    min_dur_s: float = Field(2.0, gt=0)
    max_dur_s: float = Field(5.0, gt=0)
    seed: int


class MixtureConfig(Strict):
    train: int = Field(300, ge=0)
    dev: int = Field(50, ge=0)
    test: int = Field(200, ge=0)
    snr_min_db: float = 0.0
    snr_max_db: float = 5.0
    seed: int

    @model_validator(mode="after")
    def _snr_order(self):
        if self.snr_min_db > self.snr_max_db:
            raise ValueError("snr_min_db must not exceed snr_max_db")
        return self

    @property
    def counts(self):
        return {"train": self.train, "dev": self.dev, "test": self.test}


class ExtractorConfig(Strict):
    """Architecture and training schedule of one extraction network.

    Defaults are desk scale; the published sizes are cells=512, n_sublayers=30,
    embed_dim=30, aux_hidden=512 (256 for the concat variant), ff_hidden=512,
    batch=16.
    """
    variant: Variant = Variant.SBF_MTSAL_CONCAT
    bins: int = Field(129, ge=1)
    blstm_cells: int = Field(64, ge=1)
    n_sublayers: int = Field(8, ge=1)
    embed_dim: int = Field(16, ge=1)
    aux_hidden: int = Field(64, ge=1)
    ff_hidden: int = Field(64, ge=1)
    lr0: float = Field(0.0005, gt=0)
    lr_decay: float = Field(0.7, gt=0, lt=1)
    batch: int = Field(4, ge=1)
    min_epochs: int = Field(30, ge=1)
    max_epochs: int = Field(60, ge=1)
    stop_rel_loss: float = Field(0.01, ge=0)
    init_scale: float = Field(0.05, gt=0)
    log_input: bool = False
    seed: int


class FrontendConfig(Strict):
    vad_threshold: float = Field(3.0, gt=0)
    cmn_window: int = Field(300, ge=1)


class BackendConfig(Strict):
    ubm_components: int = Field(16, ge=1)
    ubm_iters: int = Field(10, ge=0)
    tv_rank: int = Field(16, ge=1)
    tv_iters: int = Field(10, ge=0)
    lda_dim: int = Field(8, ge=1)
    plda_dim: int = Field(8, ge=0)
    plda_iters: int = Field(10, ge=0)
    length_norm: bool = True
    seed: int


class TrialConfig(Strict):
    nontargets_per_target: int = Field(16, ge=0)
    seed: int


class MetricConfig(Strict):
    dcf08_p_target: float = 0.01
    dcf08_c_miss: float = 10.0
    dcf08_c_fa: float = 1.0
    dcf10_p_target: float = 0.001
    dcf10_c_miss: float = 1.0
    dcf10_c_fa: float = 1.0


class PathsConfig(Strict):
    workdir: str = "work"


class PipelineConfig(Strict):
    corpus: CorpusConfig
    mixtures: MixtureConfig
    extractor: ExtractorConfig
    frontend: FrontendConfig = FrontendConfig()
    backend: BackendConfig
    trials: TrialConfig
    metrics: MetricConfig = MetricConfig()
    paths: PathsConfig = PathsConfig()
    jobs: Optional[int] = Field(None, ge=1)

    def with_overrides(self, section: str, **values) -> "PipelineConfig":
        """Apply non-None overrides to one section and re-validate."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        current = getattr(self, section)
        try:
            updated = type(current).model_validate({**current.model_dump(), **values})
        except ValidationError as exc:
            raise ConfigError(f"invalid override for {section}: {exc}") from exc
        return self.model_copy(update={section: updated})


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    try:
        config = PipelineConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    workdir = Path(config.paths.workdir)
    if not workdir.is_absolute():
        workdir = path.resolve().parent / workdir
    return config.model_copy(update={"paths": PathsConfig(workdir=str(workdir))})
