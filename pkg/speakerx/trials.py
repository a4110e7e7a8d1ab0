"""Verification trial lists over the test mixtures (or their clean counterparts)."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .errors import FormatError, InputError, TrialGenerationError
from .manifests import CorpusManifest, MixtureRecord

logger = logging.getLogger(__name__)

TARGET = "target"
NONTARGET = "nontarget"
CONDITIONS = ("mixture", "clean")


@dataclass(frozen=True)
class Trial:
    enroll: str
    test: str
    target: bool

    @property
    def key(self) -> str:
        return TARGET if self.target else NONTARGET


def generate_trials(mixtures: Sequence[MixtureRecord], corpus: CorpusManifest, per_target_nontargets: int = 16,
                    seed: int = 0, condition: str = "mixture") -> List[Trial]:
    """One target and ``per_target_nontargets`` non-target trials per test mixture.

    The target enrollment is another utterance of the mixture's target
    speaker, never its in-mixture or auxiliary utterance. Non-target
    enrollments come from the other speakers of the same split, excluding
    the utterance used as the interferer. The ``clean`` condition draws the
    same enrollments and replaces each test mixture by its clean target
    utterance.
    """
    if condition not in CONDITIONS:
        raise InputError(f"unknown trial condition {condition!r}; expected one of {', '.join(CONDITIONS)}")
    tests = sorted((m for m in mixtures if m.split == "test"), key=lambda m: m.mix_id)
    if not tests:
        raise TrialGenerationError("no test mixtures to build trials from")

    split_of = corpus.speaker_split()
    records = sorted(corpus.records, key=lambda r: r.utt)
    rng = np.random.default_rng(seed)
    trials, offenders = [], []
    for mix in tests:
        if mix.target_spk not in split_of:
            offenders.append(f"{mix.mix_id} (speaker {mix.target_spk} not in corpus)")
            continue
        own = [r.utt for r in records if r.spk == mix.target_spk and r.utt not in (mix.target, mix.aux)]
        others = [r.utt for r in records
                  if r.spk != mix.target_spk and split_of[r.spk] == split_of[mix.target_spk]
                  and r.utt != mix.interferer]
        if not own:
            offenders.append(f"{mix.mix_id} (no held-out enrollment for {mix.target_spk})")
            continue
        if len(others) < per_target_nontargets:
            offenders.append(f"{mix.mix_id} (only {len(others)} non-target enrollments available)")
            continue

        test_id = mix.mix_id if condition == "mixture" else mix.target
        trials.append(Trial(own[rng.integers(len(own))], test_id, True))
        for k in rng.choice(len(others), size=per_target_nontargets, replace=False):
            trials.append(Trial(others[k], test_id, False))

    if offenders:
        raise TrialGenerationError(
            f"cannot build trials for {len(offenders)} mixture(s): {'; '.join(offenders[:10])}", offenders)
    logger.info("%s trials: %d target, %d non-target", condition, len(tests), len(trials) - len(tests))
    return trials


def write_trials(path, trials: Iterable[Trial]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(f"{t.enroll} {t.test} {t.key}\n")
    return path


def parse_key(value, where):
    if value not in (TARGET, NONTARGET):
        raise FormatError(f"{where}: key must be {TARGET!r} or {NONTARGET!r}, got {value!r}")
    return value == TARGET


def read_trials(path) -> List[Trial]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"trial file not found: {path}")
    trials = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected '<enroll> <test> <key>'")
            trials.append(Trial(parts[0], parts[1], parse_key(parts[2], f"{path}:{lineno}")))
    return trials
