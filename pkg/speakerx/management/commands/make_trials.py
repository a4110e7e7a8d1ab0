from pathlib import Path

from ...errors import InputError
from ...manifests import CorpusManifest, load_mixtures
from ...trials import CONDITIONS, generate_trials, write_trials
from ..base import PipelineCommand


class Command(PipelineCommand):
    help = "Write the verification trial list for the test mixtures or their clean counterparts."

    def add_command_arguments(self, parser):
        parser.add_argument("--mixtures", default=None,
                            help="Mixture manifest (default: <workdir>/mixtures/mixtures.jsonl).")
        parser.add_argument("--corpus", default=None,
                            help="Corpus manifest (default: <workdir>/corpus/corpus.jsonl).")
        parser.add_argument("--condition", choices=CONDITIONS, default="mixture",
                            help="Test side of each trial (default: %(default)s).")
        parser.add_argument("--nontargets-per-target", type=int, default=None,
                            help="Non-target trials per test mixture (default: config).")
        parser.add_argument("--seed", type=int, default=None, help="Trial seed (default: config).")

    def default_out_dir(self, workspace, config, opts):
        return workspace.trials_dir

    def run(self, config, workspace, out_dir, opts):
        cfg = config.with_overrides("trials", nontargets_per_target=opts["nontargets_per_target"],
                                    seed=opts["seed"]).trials
        corpus_path = Path(opts["corpus"]) if opts["corpus"] else workspace.corpus_manifest
        if not corpus_path.is_file():
            raise InputError(f"corpus manifest not found: {corpus_path}")
        mixtures = load_mixtures(Path(opts["mixtures"]) if opts["mixtures"] else workspace.mixtures_manifest)

        trials = generate_trials(mixtures, CorpusManifest.load(corpus_path), cfg.nontargets_per_target,
                                 cfg.seed, opts["condition"])
        path = write_trials(out_dir / f"trials_{opts['condition']}.txt", trials)
        n_target = sum(t.target for t in trials)
        self.success(f"Wrote {n_target} target + {len(trials) - n_target} non-target trials -> {path}")
