from ...mixsim import synth_corpus
from ..base import PipelineCommand

MANIFEST_NAME = "corpus.jsonl"


class Command(PipelineCommand):
    help = "Synthesize the stand-in speaker corpus (WAV files + corpus.jsonl)."

    def add_command_arguments(self, parser):
        parser.add_argument("--speakers", type=int, default=None, help="Number of speakers (default: config).")
        parser.add_argument("--utts-per-speaker", type=int, default=None,
                            help="Utterances per speaker (default: config).")
        parser.add_argument("--seed", type=int, default=None, help="Corpus seed (default: config).")

    def default_out_dir(self, workspace, config, opts):
        return workspace.corpus_dir

    def run(self, config, workspace, out_dir, opts):
        cfg = config.with_overrides("corpus", speakers=opts["speakers"],
                                    utts_per_speaker=opts["utts_per_speaker"], seed=opts["seed"]).corpus
        self.info(f"Synthesizing {cfg.speakers} speakers x {cfg.utts_per_speaker} utterances into {out_dir}")
        corpus = synth_corpus(cfg.speakers, cfg.utts_per_speaker, cfg.seed, out_dir,
                              test_fraction=cfg.test_fraction, min_dur_s=cfg.min_dur_s, max_dur_s=cfg.max_dur_s)
        path = corpus.save(out_dir / MANIFEST_NAME)
        self.success(f"Wrote {len(corpus)} utterances -> {path}")
