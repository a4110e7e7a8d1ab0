"""Audio I/O, STFT analysis/synthesis and spectral dynamics."""
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import soundfile as sf

from .errors import (
    DimensionError,
    FormatError,
    MissingAudioError,
    RateMismatchError,
    TooShortError,
    UnsupportedFormatError,
)

SAMPLE_RATE = 8000
FRAME_LEN = 256  # 32 ms
HOP = 128  # 16 ms
N_BINS = FRAME_LEN // 2 + 1
DELTA_WINDOW = 2

_PCM_SCALE = 32768.0


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64).reshape(-1))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / float(self.sample_rate_hz)


def load_wav(path) -> Waveform:
    path = Path(path)
    if not path.is_file():
        raise MissingAudioError(f"audio file not found: {path}", [str(path)])
    try:
        info = sf.info(str(path))
    except RuntimeError as exc:  # libsndfile refuses anything it cannot parse
        raise FormatError(f"{path}: malformed or unreadable audio file ({exc})") from exc
    if info.format != "WAV":
        raise FormatError(f"{path}: not a RIFF/WAVE file (format {info.format})")
    if info.channels != 1:
        raise UnsupportedFormatError(f"{path}: expected mono audio, got {info.channels} channels")
    if info.subtype != "PCM_16":
        raise UnsupportedFormatError(f"{path}: expected PCM16 samples, got {info.subtype}")
    if info.samplerate != SAMPLE_RATE:
        raise RateMismatchError(f"{path}: sample rate {info.samplerate} Hz, expected {SAMPLE_RATE} Hz")

    pcm, rate = sf.read(str(path), dtype="int16", always_2d=False)
    return Waveform(pcm.astype(np.float64) / _PCM_SCALE, rate)


def to_pcm16(samples) -> np.ndarray:
    scaled = np.round(np.asarray(samples, dtype=np.float64) * _PCM_SCALE)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def save_wav(path, wave: Waveform) -> Path:
    if wave.sample_rate_hz != SAMPLE_RATE:
        raise RateMismatchError(f"refusing to write {wave.sample_rate_hz} Hz audio; pipeline rate is {SAMPLE_RATE} Hz")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), to_pcm16(wave.samples), wave.sample_rate_hz, subtype="PCM_16", format="WAV")
    return path


@lru_cache(maxsize=None)
def analysis_window(frame_len: int = FRAME_LEN, hop: int = HOP) -> np.ndarray:
    """Square-root Hamming window scaled so squared windows overlap-add to one."""
    n = np.arange(frame_len)
    raw = np.sqrt(0.54 - 0.46 * np.cos(2.0 * np.pi * n / frame_len))
    # c^2 = sum_k raw^2(n - k*hop); constant in n for 50 % overlap.
    ola = np.zeros(hop)
    for start in range(0, frame_len, hop):
        ola += raw[start:start + hop] ** 2
    window = raw / np.sqrt(ola.mean())
    window.flags.writeable = False
    return window


def num_frames(num_samples: int) -> int:
    return (num_samples - FRAME_LEN) // HOP + 1


def stft(wave: Waveform) -> np.ndarray:
    """T x 129 complex spectrogram (no centering, no zero padding)."""
    x = wave.samples if isinstance(wave, Waveform) else np.asarray(wave, dtype=np.float64)
    if x.shape[0] < FRAME_LEN:
        raise TooShortError(f"need at least {FRAME_LEN} samples for one frame, got {x.shape[0]}")
    frames = np.lib.stride_tricks.sliding_window_view(x, FRAME_LEN)[::HOP]
    return np.fft.rfft(frames * analysis_window(), n=FRAME_LEN, axis=1)


def istft(spec) -> Waveform:
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != N_BINS:
        raise DimensionError(f"expected a T x {N_BINS} spectrogram, got shape {spec.shape}")
    n_frames = spec.shape[0]
    frames = np.fft.irfft(spec, n=FRAME_LEN, axis=1) * analysis_window()
    out = np.zeros((n_frames - 1) * HOP + FRAME_LEN if n_frames else 0)
    for t in range(n_frames):
        out[t * HOP:t * HOP + FRAME_LEN] += frames[t]
    return Waveform(out, SAMPLE_RATE)


def magnitude(spec) -> np.ndarray:
    return np.abs(spec)


def reconstruct_with_mixture_phase(mag, mix) -> Waveform:
    mag = np.asarray(mag, dtype=np.float64)
    mix = np.asarray(mix)
    if mag.shape != mix.shape:
        raise DimensionError(f"magnitude shape {mag.shape} does not match mixture shape {mix.shape}")
    return istft(mag * np.exp(1j * np.angle(mix)))


@lru_cache(maxsize=64)
def regression_operator(n_frames: int, window: int = DELTA_WINDOW) -> np.ndarray:
    """Matrix D with D @ m == delta(m) under edge replication.

    Used where the adjoint of the delta operator is needed (loss gradients).
    """
    norm = 2.0 * sum(k * k for k in range(1, window + 1))
    op = np.zeros((n_frames, n_frames))
    for t in range(n_frames):
        for k in range(1, window + 1):
            op[t, min(t + k, n_frames - 1)] += k / norm
            op[t, max(t - k, 0)] -= k / norm
    op.flags.writeable = False
    return op


def delta(m, window: int = DELTA_WINDOW) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    n_frames = m.shape[0]
    norm = 2.0 * sum(k * k for k in range(1, window + 1))
    padded = np.pad(m, [(window, window)] + [(0, 0)] * (m.ndim - 1), mode="edge")
    out = np.zeros_like(m)
    for k in range(1, window + 1):
        out += k * (padded[window + k:window + k + n_frames] - padded[window - k:window - k + n_frames])
    return out / norm


def dynamics(m):
    """Return (delta, acceleration) of a frames-first matrix."""
    d = delta(m)
    return d, delta(d)
