import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ...audio import Waveform, load_wav, save_wav
from ...config import Variant
from ...errors import ConfigError, InputError
from ...extractor import extract, load_model
from ...manifests import SPLITS, load_mixtures, save_extracted
from ...metrics import snr_db
from ..base import PipelineCommand

logger = logging.getLogger(__name__)

MANIFEST_NAME = "extracted.jsonl"


def _variant(config, opts) -> Variant:
    if opts.get("variant"):
        return Variant.parse(opts["variant"])
    return config.extractor.variant


def extract_record(model, rec, out_dir: Path) -> dict:
    mixture = load_wav(rec.mix_path)
    estimate = extract(model, mixture, load_wav(rec.aux_path))
    path = save_wav(out_dir / "wav" / rec.split / f"{rec.mix_id}.wav", estimate)

    n = len(estimate)
    reference = load_wav(rec.ref_path).samples[:n]
    row = asdict(rec)
    row.update({
        "utt": rec.mix_id,
        "spk": rec.target_spk,
        "path": str(path),
        "dur_s": estimate.duration_s,
        "input_snr_db": round(snr_db(Waveform(mixture.samples[:n]), reference), 6),
        "output_snr_db": round(snr_db(estimate, reference), 6),
    })
    return row


class Command(PipelineCommand):
    help = "Run a trained extraction network over mixtures; writes estimated target WAVs + extracted.jsonl."

    def add_command_arguments(self, parser):
        parser.add_argument("--model", default=None,
                            help="Extractor model (default: <workdir>/extractor/<variant>/model.bin).")
        parser.add_argument("--variant", default=None,
                            help="Expected variant; must match the model (default: config).")
        parser.add_argument("--mixtures", default=None,
                            help="Mixture manifest (default: <workdir>/mixtures/mixtures.jsonl).")
        parser.add_argument("--split", action="append", choices=SPLITS, default=None,
                            help="Split(s) to extract; repeatable (default: all).")

    def default_out_dir(self, workspace, config, opts):
        return workspace.extracted_dir(_variant(config, opts))

    def run(self, config, workspace, out_dir, opts):
        variant = _variant(config, opts)
        model_path = Path(opts["model"]) if opts["model"] else workspace.extractor_model(variant)
        if not model_path.is_file():
            raise InputError(f"extractor model not found: {model_path}")
        model = load_model(model_path)
        if opts["variant"] and model.variant != variant:
            raise ConfigError(f"{model_path} holds a {model.variant.cli_name} model, "
                              f"not {variant.cli_name}")

        splits = set(opts["split"] or SPLITS)
        records = load_mixtures(Path(opts["mixtures"]) if opts["mixtures"] else workspace.mixtures_manifest)
        records = [r for r in records if r.split in splits]
        self.info(f"Extracting {len(records)} mixtures with {model.variant.cli_name}")

        jobs = self.jobs(config, opts)
        if jobs <= 1:
            rows = [extract_record(model, r, out_dir) for r in records]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(lambda r: extract_record(model, r, out_dir), records))

        path = save_extracted(out_dir / MANIFEST_NAME, rows)
        if rows:
            gain = np.mean([r["output_snr_db"] - r["input_snr_db"] for r in rows])
            logger.info("mean SNR improvement %.2f dB over %d mixtures", gain, len(rows))
            self.info(f"Mean SNR improvement: {gain:+.2f} dB")
        self.success(f"Wrote {len(rows)} extracted utterances -> {path}")
