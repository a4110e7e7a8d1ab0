from pathlib import Path

from ...errors import InputError
from ...manifests import CorpusManifest, save_mixtures
from ...mixsim import build_dataset, render_dataset
from ..base import PipelineCommand

MANIFEST_NAME = "mixtures.jsonl"


class Command(PipelineCommand):
    help = "Simulate two-speaker mixtures from a corpus manifest (WAV files + mixtures.jsonl)."

    def add_command_arguments(self, parser):
        parser.add_argument("--corpus", default=None,
                            help="Corpus manifest (default: <workdir>/corpus/corpus.jsonl).")
        parser.add_argument("--train", type=int, default=None, help="Training mixtures (default: config).")
        parser.add_argument("--dev", type=int, default=None, help="Dev mixtures (default: config).")
        parser.add_argument("--test", type=int, default=None, help="Test mixtures (default: config).")
        parser.add_argument("--seed", type=int, default=None, help="Mixture seed (default: config).")

    def default_out_dir(self, workspace, config, opts):
        return workspace.mixtures_dir

    def run(self, config, workspace, out_dir, opts):
        corpus_path = Path(opts["corpus"]) if opts["corpus"] else workspace.corpus_manifest
        if not corpus_path.is_file():
            raise InputError(f"corpus manifest not found: {corpus_path}")
        cfg = config.with_overrides("mixtures", train=opts["train"], dev=opts["dev"], test=opts["test"],
                                    seed=opts["seed"]).mixtures

        corpus = CorpusManifest.load(corpus_path)
        specs = build_dataset(corpus, cfg.counts, cfg.seed, (cfg.snr_min_db, cfg.snr_max_db))
        self.info(f"Rendering {len(specs)} mixtures into {out_dir}")
        records = render_dataset(specs, corpus, out_dir, jobs=self.jobs(config, opts))
        clipped = sum(1 for r in records if r.norm_gain != 1.0)
        if clipped:
            self.warn(f"{clipped} mixture(s) were peak-normalized (gain recorded in the manifest)")
        path = save_mixtures(out_dir / MANIFEST_NAME, records)
        self.success(f"Wrote {len(records)} mixtures -> {path}")
