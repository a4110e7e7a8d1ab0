from ..audio import Waveform, magnitude, reconstruct_with_mixture_phase, stft
from .network import ExtractorModel, forward


def estimate_magnitude(model: ExtractorModel, mix_spec, aux_mag):
    mix_mag = magnitude(mix_spec)
    return forward(model, mix_mag, aux_mag) * mix_mag


def extract(model: ExtractorModel, mixture: Waveform, aux: Waveform) -> Waveform:
    """Target speech estimate, resynthesized with the mixture phase.

    The output covers the mixture's whole frames only: (T - 1) * hop + frame
    samples.
    """
    mix_spec = stft(mixture)
    aux_mag = magnitude(stft(aux))
    return reconstruct_with_mixture_phase(estimate_magnitude(model, mix_spec, aux_mag), mix_spec)
