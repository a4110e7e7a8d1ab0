"""Small in-memory corpora and configs shared by the test modules."""
from pathlib import Path

import numpy as np
import yaml

from speakerx.config import ExtractorConfig, Variant
from speakerx.manifests import CorpusManifest, MixtureRecord, Utterance


def tiny_extractor(variant=Variant.SBF_MTSAL_CONCAT, bins=5, **overrides) -> ExtractorConfig:
    values = dict(variant=variant, bins=bins, blstm_cells=4, n_sublayers=3, embed_dim=3, aux_hidden=3,
                  ff_hidden=4, init_scale=0.3, seed=0)
    values.update(overrides)
    return ExtractorConfig(**values)


def corpus(speakers, utts_per_speaker, split="test", prefix="s") -> CorpusManifest:
    records = []
    for i in range(speakers):
        spk = f"{prefix}{i}"
        for j in range(utts_per_speaker):
            records.append(Utterance(f"{spk}_{j}", spk, f"/audio/{spk}_{j}.wav", 3.0, split))
    return CorpusManifest(records)


def mixture(mix_id, target, interferer, aux, split="test") -> MixtureRecord:
    return MixtureRecord(
        mix_id=mix_id, target=target, interferer=interferer, aux=aux, snr_db=2.5, split=split,
        target_spk=target.split("_")[0], interferer_spk=interferer.split("_")[0],
        mix_path=f"/mix/{mix_id}.wav", ref_path=f"/mix/{mix_id}_ref.wav", aux_path=f"/audio/{aux}.wav",
        dur_s=3.0,
    )


def speaker_vectors(n_speakers, per_speaker, dim, seed=0, spread=3.0, noise=1.0):
    """Gaussian clusters: one mean per speaker plus isotropic within-speaker noise."""
    rng = np.random.default_rng(seed)
    centres = spread * rng.standard_normal((n_speakers, dim))
    x = np.repeat(centres, per_speaker, axis=0) + noise * rng.standard_normal((n_speakers * per_speaker, dim))
    labels = np.repeat([f"spk{i}" for i in range(n_speakers)], per_speaker)
    return x, labels


def write_config(root, **sections) -> Path:
    """A desk-sized pipeline config under ``root`` with its workdir at ``root/work``."""
    doc = {
        "corpus": {"speakers": 6, "utts_per_speaker": 3, "min_dur_s": 0.5, "max_dur_s": 0.7, "seed": 1},
        "mixtures": {"train": 3, "dev": 2, "test": 2, "seed": 2},
        "extractor": {"blstm_cells": 4, "n_sublayers": 2, "embed_dim": 2, "aux_hidden": 4, "ff_hidden": 4,
                      "min_epochs": 1, "max_epochs": 2, "batch": 2, "seed": 3},
        "backend": {"ubm_components": 2, "ubm_iters": 2, "tv_rank": 3, "tv_iters": 2, "lda_dim": 2,
                    "plda_dim": 2, "plda_iters": 2, "seed": 4},
        "trials": {"nontargets_per_target": 2, "seed": 5},
        "paths": {"workdir": "work"},
    }
    for name, values in sections.items():
        doc.setdefault(name, {}).update(values)
    path = Path(root) / "config.yaml"
    path.write_text(yaml.safe_dump(doc, sort_keys=True), encoding="utf-8")
    return path
