from pathlib import Path

from ...config import Variant
from ...extractor.training import load_examples, train
from ...manifests import load_mixtures
from ..base import PipelineCommand

MODEL_NAME = "model.bin"
LOG_NAME = "train_log.jsonl"


def _variant(config, opts) -> Variant:
    if opts.get("variant"):
        return Variant.parse(opts["variant"])
    return config.extractor.variant


class Command(PipelineCommand):
    help = "Train a target-speaker extraction network on the train/dev mixtures."

    def add_command_arguments(self, parser):
        parser.add_argument("--mixtures", default=None,
                            help="Mixture manifest (default: <workdir>/mixtures/mixtures.jsonl).")
        parser.add_argument("--variant", default=None,
                            help="sbf-mtsal or sbf-mtsal-concat (default: config).")
        parser.add_argument("--lr0", type=float, default=None, help="Initial learning rate (default: config).")
        parser.add_argument("--batch", type=int, default=None, help="Mixtures per minibatch (default: config).")
        parser.add_argument("--min-epochs", type=int, default=None, help="Minimum epochs (default: config).")
        parser.add_argument("--max-epochs", type=int, default=None, help="Epoch cap (default: config).")
        parser.add_argument("--seed", type=int, default=None, help="Initialization seed (default: config).")

    def default_out_dir(self, workspace, config, opts):
        return workspace.extractor_dir(_variant(config, opts))

    def run(self, config, workspace, out_dir, opts):
        variant = _variant(config, opts)
        cfg = config.with_overrides("extractor", variant=variant, lr0=opts["lr0"], batch=opts["batch"],
                                    min_epochs=opts["min_epochs"], max_epochs=opts["max_epochs"],
                                    seed=opts["seed"]).extractor
        jobs = self.jobs(config, opts)
        records = load_mixtures(Path(opts["mixtures"]) if opts["mixtures"] else workspace.mixtures_manifest)
        train_set = load_examples([r for r in records if r.split == "train"], jobs)
        dev_set = load_examples([r for r in records if r.split == "dev"], jobs)
        self.info(f"Training {variant.cli_name} on {len(train_set)} mixtures (dev {len(dev_set)})")

        result = train(cfg, train_set, dev_set, out_dir / MODEL_NAME, out_dir / LOG_NAME, jobs=jobs)
        self.success(f"Best dev loss {result.best_dev_loss:.6f} at epoch {result.best_epoch} "
                     f"-> {out_dir / MODEL_NAME}")
