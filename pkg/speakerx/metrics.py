"""Detection metrics (EER, minDCF, DET points), score files and reports.

A trial is accepted when its score is greater than or equal to the
threshold. Operating points are listed by increasing threshold, from
accept-all (P_fa=1, P_miss=0) to reject-all (P_fa=0, P_miss=1).
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .config import MetricConfig
from .errors import FormatError, InputError, InsufficientTrialsError
from .trials import Trial, parse_key


@dataclass
class ScoreSet:
    trials: List[Trial]
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if self.scores.shape[0] != len(self.trials):
            raise InputError(f"{len(self.trials)} trials but {self.scores.shape[0]} scores")

    @classmethod
    def from_arrays(cls, target_scores, nontarget_scores) -> "ScoreSet":
        tgt = np.asarray(target_scores, dtype=np.float64).reshape(-1)
        non = np.asarray(nontarget_scores, dtype=np.float64).reshape(-1)
        trials = ([Trial(f"e{i}", f"t{i}", True) for i in range(tgt.size)]
                  + [Trial(f"e{i}", f"n{i}", False) for i in range(non.size)])
        return cls(trials, np.concatenate([tgt, non]))

    @property
    def is_target(self) -> np.ndarray:
        return np.array([t.target for t in self.trials], dtype=bool)

    @property
    def target_scores(self) -> np.ndarray:
        return self.scores[self.is_target]

    @property
    def nontarget_scores(self) -> np.ndarray:
        return self.scores[~self.is_target]


def operating_points(scores: ScoreSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds, P_fa, P_miss) at every distinct score plus +inf."""
    tgt = np.sort(scores.target_scores)
    non = np.sort(scores.nontarget_scores)
    if tgt.size == 0 or non.size == 0:
        raise InsufficientTrialsError(f"need target and non-target trials, got {tgt.size} and {non.size}")
    thresholds = np.append(np.unique(scores.scores), np.inf)
    p_miss = np.searchsorted(tgt, thresholds, side="left") / tgt.size
    p_fa = (non.size - np.searchsorted(non, thresholds, side="left")) / non.size
    return thresholds, p_fa, p_miss


def det_points(scores: ScoreSet) -> List[Tuple[float, float]]:
    _, p_fa, p_miss = operating_points(scores)
    return list(zip(p_fa.tolist(), p_miss.tolist()))


def compute_eer(scores: ScoreSet) -> float:
    """P_fa where P_fa and P_miss cross, interpolated linearly between adjacent points."""
    _, p_fa, p_miss = operating_points(scores)
    gap = p_fa - p_miss
    i = int(np.argmax(gap <= 0.0))  # gap ends at -1, so a crossing always exists
    before, after = gap[i - 1], gap[i]
    alpha = before / (before - after)
    return float(p_fa[i - 1] + alpha * (p_fa[i] - p_fa[i - 1]))


def compute_min_dcf(scores: ScoreSet, p_target: float, c_miss: float, c_fa: float) -> float:
    _, p_fa, p_miss = operating_points(scores)
    cost = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
    return float(cost.min() / min(c_miss * p_target, c_fa * (1.0 - p_target)))


def report(scores: ScoreSet, cfg: MetricConfig = MetricConfig()) -> dict:
    return {
        "eer": compute_eer(scores),
        "dcf08": compute_min_dcf(scores, cfg.dcf08_p_target, cfg.dcf08_c_miss, cfg.dcf08_c_fa),
        "dcf10": compute_min_dcf(scores, cfg.dcf10_p_target, cfg.dcf10_c_miss, cfg.dcf10_c_fa),
        "n_target": int(scores.is_target.sum()),
        "n_nontarget": int((~scores.is_target).sum()),
    }


def relative_reduction(baseline: float, value: float) -> float:
    """(baseline - value) / baseline; 0 when the baseline is already 0."""
    if baseline == 0.0:
        return 0.0
    return (baseline - value) / baseline


def snr_db(estimate, reference) -> float:
    """10 log10(|ref|^2 / |ref - est|^2) over the common length."""
    est = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64)
    ref = np.asarray(getattr(reference, "samples", reference), dtype=np.float64)
    n = min(est.shape[0], ref.shape[0])
    signal = np.sum(ref[:n] ** 2)
    noise = np.sum((ref[:n] - est[:n]) ** 2)
    if noise == 0.0:
        return float("inf")
    return float(10.0 * np.log10(max(signal, 1e-20) / noise))


def write_scores(path, scores: ScoreSet) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for trial, score in zip(scores.trials, scores.scores):
            fh.write(f"{trial.enroll} {trial.test} {trial.key} {score:.8f}\n")
    return path


def read_scores(path) -> ScoreSet:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"score file not found: {path}")
    trials, values = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            where = f"{path}:{lineno}"
            if len(parts) != 4:
                raise FormatError(f"{where}: expected '<enroll> <test> <key> <score>'")
            try:
                values.append(float(parts[3]))
            except ValueError as exc:
                raise FormatError(f"{where}: score {parts[3]!r} is not a number") from exc
            trials.append(Trial(parts[0], parts[1], parse_key(parts[2], where)))
    return ScoreSet(trials, np.array(values))


def write_report(path, metrics: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_det_csv(path, points: Sequence[Tuple[float, float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("p_fa,p_miss\n")
        for p_fa, p_miss in points:
            fh.write(f"{p_fa:.10f},{p_miss:.10f}\n")
    return path
