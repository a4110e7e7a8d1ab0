"""Two-speaker mixture simulation and the synthetic stand-in speaker corpus."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np
from scipy.signal import lfilter

from .audio import SAMPLE_RATE, Waveform, load_wav, save_wav
from .errors import CorpusTooSmallError, DegenerateSignalError, InputError
from .manifests import SPLITS, CorpusManifest, MixtureRecord, MixtureSpec, Utterance

logger = logging.getLogger(__name__)

SNR_RANGE_DB = (0.0, 5.0)
# Mixtures peaking above full scale are rescaled to the largest PCM16 magnitude.
FULL_SCALE = 1.0
CLIP_LEVEL = 32767.0 / 32768.0


@dataclass(frozen=True)
class MixtureResult:
    mixture: Waveform
    scaled_interferer: Waveform
    target: Waveform
    gain: float
    norm_gain: float = 1.0


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x)))) if x.size else 0.0


def simulate_mixture(target: Waveform, interferer: Waveform, snr_db: float) -> MixtureResult:
    """Mix ``interferer`` into ``target`` at ``snr_db`` (target over interferer).

    Both signals are truncated to the shorter length first, so the result is
    fully overlapped speech. If the sum exceeds full scale, mixture and references
    are scaled by one common gain, reported as ``norm_gain``.
    """
    if not np.isfinite(snr_db):
        raise InputError(f"SNR must be finite, got {snr_db!r}")
    n = min(len(target), len(interferer))
    tgt = target.samples[:n]
    itf = interferer.samples[:n]
    rms_t, rms_i = _rms(tgt), _rms(itf)
    if rms_t <= 0.0 or rms_i <= 0.0:
        raise DegenerateSignalError("cannot mix a zero-energy signal")

    gain = (rms_t / rms_i) * 10.0 ** (-snr_db / 20.0)
    scaled = gain * itf
    mixture = tgt + scaled

    norm_gain = 1.0
    peak = float(np.max(np.abs(mixture)))
    if peak > FULL_SCALE:
        norm_gain = CLIP_LEVEL / peak
        mixture = mixture * norm_gain
        scaled = scaled * norm_gain
        tgt = tgt * norm_gain

    return MixtureResult(
        mixture=Waveform(mixture),
        scaled_interferer=Waveform(scaled),
        target=Waveform(tgt),
        gain=gain,
        norm_gain=norm_gain,
    )


def _pool_for(split: str, corpus: CorpusManifest) -> Dict[str, List[Utterance]]:
    # train and dev mixtures share the training speakers; test speakers are held out
    wanted = ("test",) if split == "test" else ("train", "dev")
    pool = {}
    for spk, spk_split in sorted(corpus.speaker_split().items()):
        if spk_split in wanted:
            pool[spk] = corpus.utterances_of(spk)
    return pool


def build_dataset(corpus: CorpusManifest, counts: Mapping[str, int], seed: int,
                  snr_range=SNR_RANGE_DB) -> List[MixtureSpec]:
    unknown = set(counts) - set(SPLITS)
    if unknown:
        raise InputError(f"unknown split(s) {sorted(unknown)}; expected {list(SPLITS)}")
    lo, hi = snr_range
    specs = []
    for k, split in enumerate(SPLITS):
        count = int(counts.get(split, 0))
        if count <= 0:
            continue
        pool = _pool_for(split, corpus)
        if len(pool) < 2:
            raise CorpusTooSmallError(f"{split}: need at least 2 speakers, corpus has {len(pool)}")
        thin = [spk for spk, utts in pool.items() if len(utts) < 2]
        if thin:
            raise CorpusTooSmallError(f"{split}: speakers with fewer than 2 utterances: {', '.join(thin)}")

        rng = np.random.default_rng([seed, k])
        speakers = list(pool)
        for i in range(count):
            t_idx, i_idx = rng.choice(len(speakers), size=2, replace=False)
            t_utts = pool[speakers[t_idx]]
            i_utts = pool[speakers[i_idx]]
            ref_pos, aux_pos = rng.choice(len(t_utts), size=2, replace=False)
            itf_pos = rng.integers(len(i_utts))
            specs.append(MixtureSpec(
                mix_id=f"{split}{i:05d}",
                target=t_utts[ref_pos].utt,
                interferer=i_utts[itf_pos].utt,
                aux=t_utts[aux_pos].utt,
                snr_db=float(rng.uniform(lo, hi)),
                split=split,
            ))
    logger.info("planned %d mixtures (%s)", len(specs),
                ", ".join(f"{s}={int(counts.get(s, 0))}" for s in SPLITS))
    return specs


def render_mixture(spec: MixtureSpec, utts: Mapping[str, Utterance], out_dir) -> MixtureRecord:
    out_dir = Path(out_dir)
    target_utt, itf_utt, aux_utt = utts[spec.target], utts[spec.interferer], utts[spec.aux]
    result = simulate_mixture(load_wav(target_utt.path), load_wav(itf_utt.path), spec.snr_db)
    mix_path = save_wav(out_dir / "wav" / spec.split / f"{spec.mix_id}.wav", result.mixture)
    ref_path = save_wav(out_dir / "wav" / spec.split / f"{spec.mix_id}_ref.wav", result.target)
    if result.norm_gain != 1.0:
        logger.info("%s: peak-normalized by %.4f", spec.mix_id, result.norm_gain)
    return MixtureRecord(
        mix_id=spec.mix_id,
        target=spec.target,
        interferer=spec.interferer,
        aux=spec.aux,
        snr_db=spec.snr_db,
        split=spec.split,
        target_spk=target_utt.spk,
        interferer_spk=itf_utt.spk,
        mix_path=str(mix_path),
        ref_path=str(ref_path),
        aux_path=aux_utt.path,
        dur_s=result.mixture.duration_s,
        norm_gain=result.norm_gain,
    )


def render_dataset(specs: Sequence[MixtureSpec], corpus: CorpusManifest, out_dir, jobs: int = 1) -> List[MixtureRecord]:
    """Render every mixture; output order follows ``specs`` regardless of ``jobs``."""
    utts = corpus.by_id()
    if jobs <= 1:
        return [render_mixture(s, utts, out_dir) for s in specs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: render_mixture(s, utts, out_dir), specs))


# -----------------------------------------------------------------------------
# Synthetic corpus
# -----------------------------------------------------------------------------
_FORMANT_BANDS = ((250.0, 850.0), (850.0, 2300.0), (2300.0, 3500.0))
_BANDWIDTHS = np.array([80.0, 120.0, 180.0])
_PITCH_RANGE = (85.0, 260.0)
_MIN_PROFILE_DISTANCE = 0.3  # summed |log ratio| over formants and pitch


@dataclass(frozen=True)
class SpeakerProfile:
    spk: str
    formants: tuple
    pitch_hz: float


def _draw_profiles(n_speakers: int, rng: np.random.Generator) -> List[SpeakerProfile]:
    profiles = []
    for i in range(n_speakers):
        for _ in range(1000):
            formants = np.array([rng.uniform(lo, hi) for lo, hi in _FORMANT_BANDS])
            pitch = rng.uniform(*_PITCH_RANGE)
            vec = np.log(np.append(formants, pitch))
            if all(np.abs(vec - np.log(np.append(p.formants, p.pitch_hz))).sum() >= _MIN_PROFILE_DISTANCE
                   for p in profiles):
                break
        profiles.append(SpeakerProfile(f"spk{i:03d}", tuple(float(f) for f in formants), float(pitch)))
    return profiles


def _resonate(x: np.ndarray, freq: float, bandwidth: float) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / SAMPLE_RATE)
    theta = 2.0 * np.pi * freq / SAMPLE_RATE
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    return lfilter([1.0 - r], a, x)


def _envelope(n: int, rng: np.random.Generator) -> np.ndarray:
    """Syllable-like bursts separated by short pauses."""
    env = np.zeros(n)
    pos = int(rng.uniform(0.05, 0.2) * SAMPLE_RATE)
    while pos < n:
        length = int(rng.uniform(0.15, 0.4) * SAMPLE_RATE)
        stop = min(n, pos + length)
        if stop - pos > 8:
            ramp = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(stop - pos) / (stop - pos))
            env[pos:stop] = rng.uniform(0.5, 1.0) * ramp
        pos = stop + int(rng.uniform(0.05, 0.25) * SAMPLE_RATE)
    return env


def synth_utterance(profile: SpeakerProfile, rng: np.random.Generator,
                    min_dur_s: float = 2.0, max_dur_s: float = 5.0) -> Waveform:
    n = int(rng.uniform(min_dur_s, max_dur_s) * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE

    f0 = profile.pitch_hz * rng.uniform(0.97, 1.03)
    f0 = f0 * (1.0 + 0.05 * np.sin(2.0 * np.pi * rng.uniform(1.0, 4.0) * t + rng.uniform(0, 2 * np.pi)))
    phase = np.cumsum(f0 / SAMPLE_RATE)
    excitation = np.diff(np.floor(phase), prepend=0.0)
    excitation += 0.02 * rng.standard_normal(n)

    y = excitation
    for freq, bw in zip(profile.formants, _BANDWIDTHS):
        y = _resonate(y, freq * rng.uniform(0.97, 1.03), bw)

    y = y * _envelope(n, rng) + 1e-4 * rng.standard_normal(n)
    y *= rng.uniform(0.05, 0.1) / max(_rms(y), 1e-12)
    peak = np.max(np.abs(y))
    if peak > 0.9:
        y *= 0.9 / peak
    return Waveform(y)


def synth_corpus(n_speakers: int, utts_per_speaker: int, seed: int, out_dir,
                 test_fraction: float = 0.2, min_dur_s: float = 2.0, max_dur_s: float = 5.0) -> CorpusManifest:
    """Render a formant-synthesizer corpus; the last speakers form the test split."""
    if n_speakers < 4:
        raise CorpusTooSmallError(f"need at least 4 speakers, got {n_speakers}")
    if utts_per_speaker < 1:
        raise CorpusTooSmallError("need at least one utterance per speaker")
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    profiles = _draw_profiles(n_speakers, rng)
    n_test = min(n_speakers - 2, max(2, int(round(n_speakers * test_fraction))))

    records = []
    for i, profile in enumerate(profiles):
        split = "test" if i >= n_speakers - n_test else "train"
        for j in range(utts_per_speaker):
            utt = f"{profile.spk}_{j:03d}"
            wave = synth_utterance(profile, rng, min_dur_s, max_dur_s)
            path = save_wav(out_dir / "wav" / profile.spk / f"{utt}.wav", wave)
            records.append(Utterance(utt=utt, spk=profile.spk, path=str(path), dur_s=wave.duration_s, split=split))
    logger.info("synthesized %d utterances from %d speakers (%d held out for test)",
                len(records), n_speakers, n_test)
    return CorpusManifest(records)
