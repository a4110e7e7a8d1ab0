"""Verification features: 60-d MFCC, sliding cepstral mean normalization, energy VAD."""
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Mapping

import numpy as np
from scipy.fft import dct
from scipy.signal import lfilter

from .archive import read_container, write_container
from .audio import SAMPLE_RATE, Waveform, delta
from .errors import DimensionError, TooShortError

WIN_LEN = 200  # 25 ms
WIN_SHIFT = 80  # 10 ms
NFFT = 256
N_MELS = 23
N_CEPS = 19
MEL_LOW_HZ = 20.0
MEL_HIGH_HZ = 3800.0
PRE_EMPHASIS = 0.97
LOG_FLOOR = 1e-10
FEATURE_DIM = 3 * (N_CEPS + 1)

CMN_WINDOW = 300
VAD_THRESHOLD = 3.0

FEATURES_KIND = "features"


@dataclass(frozen=True)
class AcousticFeatures:
    frames: np.ndarray
    log_energy: np.ndarray

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[0] != self.log_energy.shape[0]:
            raise DimensionError(
                f"features {self.frames.shape} and log-energy {self.log_energy.shape} are not aligned")

    def __len__(self):
        return self.frames.shape[0]

    def with_frames(self, frames) -> "AcousticFeatures":
        return AcousticFeatures(frames, self.log_energy)


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def mel_filterbank(n_mels: int = N_MELS, nfft: int = NFFT, low_hz: float = MEL_LOW_HZ,
                   high_hz: float = MEL_HIGH_HZ) -> np.ndarray:
    """n_mels x (nfft/2 + 1) triangular filters equally spaced on the mel scale."""
    edges = _mel_to_hz(np.linspace(_hz_to_mel(low_hz), _hz_to_mel(high_hz), n_mels + 2))
    freqs = np.arange(nfft // 2 + 1) * SAMPLE_RATE / nfft
    bank = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        left, centre, right = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - left) / (centre - left)
        falling = (right - freqs) / (right - centre)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    bank.flags.writeable = False
    return bank


def frame_count(num_samples: int) -> int:
    return 1 + (num_samples - WIN_LEN) // WIN_SHIFT


def _frames(x: np.ndarray) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, WIN_LEN)[::WIN_SHIFT]


def static_mfcc(wave: Waveform):
    """T x 20 static vectors (c1..c19, log energy) and the log-energy column."""
    x = wave.samples if isinstance(wave, Waveform) else np.asarray(wave, dtype=np.float64)
    if x.shape[0] < WIN_LEN:
        raise TooShortError(f"need at least {WIN_LEN} samples (25 ms) for MFCC, got {x.shape[0]}")

    raw = _frames(x)
    log_energy = np.log(np.maximum(np.sum(raw * raw, axis=1), LOG_FLOOR))

    emphasized = _frames(lfilter([1.0, -PRE_EMPHASIS], [1.0], x))
    spectrum = np.fft.rfft(emphasized * np.hamming(WIN_LEN), n=NFFT, axis=1)
    power = np.abs(spectrum) ** 2
    log_mel = np.log(np.maximum(power @ mel_filterbank().T, LOG_FLOOR))
    ceps = dct(log_mel, type=2, norm="ortho", axis=1)[:, 1:N_CEPS + 1]
    return np.column_stack([ceps, log_energy]), log_energy


def mfcc(wave: Waveform) -> AcousticFeatures:
    static, log_energy = static_mfcc(wave)
    d1 = delta(static)
    d2 = delta(d1)
    return AcousticFeatures(np.hstack([static, d1, d2]), log_energy)


def cmn(feats: AcousticFeatures, window: int = CMN_WINDOW) -> AcousticFeatures:
    """Subtract a sliding mean over ``window`` frames.

    The window is centred on each frame and shifted, not shrunk, at the
    utterance edges, so utterances no longer than the window get their
    global mean removed.
    """
    x = feats.frames
    n = x.shape[0]
    if n == 0:
        return feats
    width = min(window, n)
    starts = np.clip(np.arange(n) - window // 2, 0, n - width)
    ends = starts + width
    csum = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
    means = (csum[ends] - csum[starts]) / width
    return feats.with_frames(x - means)


def energy_vad(feats: AcousticFeatures, threshold: float = VAD_THRESHOLD) -> np.ndarray:
    """Keep frames within ``threshold`` (natural log) of the loudest frame.

    ``threshold`` is positive, so the loudest frame is always kept.
    """
    energy = feats.log_energy
    return energy > energy.max() - threshold


def extract_features(wave: Waveform, cmn_window: int = CMN_WINDOW, vad_threshold: float = VAD_THRESHOLD) -> np.ndarray:
    """MFCC -> CMN over all frames -> keep VAD speech frames."""
    feats = mfcc(wave)
    keep = energy_vad(feats, vad_threshold)
    return cmn(feats, cmn_window).frames[keep]


def write_feature_archive(path, features: Mapping[str, np.ndarray]):
    return write_container(path, FEATURES_KIND, dict(sorted(features.items())),
                           meta={"dim": FEATURE_DIM}, dtype="<f4")


def read_feature_archive(path) -> Dict[str, np.ndarray]:
    _, tensors = read_container(path, kind=FEATURES_KIND)
    return tensors
