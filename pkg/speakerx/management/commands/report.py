import json
from pathlib import Path

from ...metrics import det_points, read_scores, report, write_det_csv, write_report
from ..base import PipelineCommand

REPORT_NAME = "report.json"
DET_NAME = "det.csv"

_COST_FLAGS = ("dcf08_p_target", "dcf08_c_miss", "dcf08_c_fa", "dcf10_p_target", "dcf10_c_miss", "dcf10_c_fa")


def _scores_path(workspace, opts) -> Path:
    return Path(opts["scores"]) if opts.get("scores") else workspace.root / "scores" / "scores.txt"


class Command(PipelineCommand):
    help = "Compute EER, DCF08 and DCF10 from a score file; writes report.json and det.csv."

    def add_command_arguments(self, parser):
        parser.add_argument("--scores", default=None,
                            help="Score file (default: <workdir>/scores/scores.txt).")
        for flag in _COST_FLAGS:
            parser.add_argument(f"--{flag.replace('_', '-')}", type=float, default=None,
                                help=f"Override metrics.{flag} (default: config).")

    def default_out_dir(self, workspace, config, opts):
        return _scores_path(workspace, opts).parent

    def run(self, config, workspace, out_dir, opts):
        cfg = config.with_overrides("metrics", **{flag: opts[flag] for flag in _COST_FLAGS}).metrics
        scores = read_scores(_scores_path(workspace, opts))
        metrics = report(scores, cfg)
        write_report(out_dir / REPORT_NAME, metrics)
        write_det_csv(out_dir / DET_NAME, det_points(scores))
        self.stdout.write(json.dumps(metrics, indent=2, sort_keys=True))
        self.success(f"EER {100 * metrics['eer']:.2f}%  DCF08 {metrics['dcf08']:.4f}  "
                     f"DCF10 {metrics['dcf10']:.4f} -> {out_dir / REPORT_NAME}")
