"""Working-directory layout and the seven-system experiment matrix."""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .config import Variant

CLEAN = "clean"
CLEAN_EXT = "clean+ext"


@dataclass(frozen=True)
class System:
    number: int
    training: str  # back-end training set: clean, or clean pooled with extracted speech
    evaluation: str  # trial condition: mixture or clean test side
    tse: Optional[Variant]  # extraction before scoring, or None

    @property
    def name(self) -> str:
        return f"system{self.number}"

    def describe(self) -> str:
        tse = self.tse.cli_name if self.tse else "none"
        return f"{self.name}: train={self.training} test={self.evaluation} tse={tse}"


SYSTEMS = (
    System(1, CLEAN, "mixture", None),
    System(2, CLEAN_EXT, "mixture", None),
    System(3, CLEAN, "mixture", Variant.SBF_MTSAL),
    System(4, CLEAN, "mixture", Variant.SBF_MTSAL_CONCAT),
    System(5, CLEAN_EXT, "mixture", Variant.SBF_MTSAL_CONCAT),
    System(6, CLEAN, "clean", None),
    System(7, CLEAN_EXT, "clean", None),
)


@dataclass(frozen=True)
class Workspace:
    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    @property
    def corpus_dir(self) -> Path:
        return self.root / "corpus"

    @property
    def corpus_manifest(self) -> Path:
        return self.corpus_dir / "corpus.jsonl"

    @property
    def mixtures_dir(self) -> Path:
        return self.root / "mixtures"

    @property
    def mixtures_manifest(self) -> Path:
        return self.mixtures_dir / "mixtures.jsonl"

    def extractor_dir(self, variant: Variant) -> Path:
        return self.root / "extractor" / variant.value

    def extractor_model(self, variant: Variant) -> Path:
        return self.extractor_dir(variant) / "model.bin"

    def extracted_dir(self, variant: Variant) -> Path:
        return self.root / "extracted" / variant.value

    def extracted_manifest(self, variant: Variant) -> Path:
        return self.extracted_dir(variant) / "extracted.jsonl"

    def backend_dir(self, training: str) -> Path:
        return self.root / "backend" / training.replace("+", "_")

    def backend_model(self, training: str) -> Path:
        return self.backend_dir(training) / "backend.bin"

    @property
    def trials_dir(self) -> Path:
        return self.root / "trials"

    def trials(self, condition: str) -> Path:
        return self.trials_dir / f"trials_{condition}.txt"

    def system_dir(self, system: System) -> Path:
        return self.root / "systems" / system.name
