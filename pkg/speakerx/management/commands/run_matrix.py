import json
from pathlib import Path

from django.core.management import call_command

from ...config import Variant
from ...metrics import relative_reduction
from ...systems import CLEAN, CLEAN_EXT, SYSTEMS, Workspace
from ..base import PipelineCommand
from .report import REPORT_NAME

SUMMARY_NAME = "summary.json"
EXT_VARIANT = Variant.SBF_MTSAL_CONCAT


class Command(PipelineCommand):
    help = "Run the whole pipeline and score the seven (training set, test condition, TSE) systems."

    def add_command_arguments(self, parser):
        parser.add_argument("--reuse", action="store_true",
                            help="Skip stages whose outputs already exist under --out-dir.")

    def stage(self, name, output: Path, opts, **kwargs):
        if opts["reuse"] and output.exists():
            self.info(f"[{name}] reusing {output}")
            return
        self.info(f"[{name}]")
        call_command(name, config=opts["config"], jobs=self.n_jobs, stdout=self.stdout,
                     stderr=self.stderr, **kwargs)

    def run(self, config, workspace, out_dir, opts):
        self.n_jobs = self.jobs(config, opts)
        ws = Workspace(out_dir)
        self.stage("synth_corpus", ws.corpus_manifest, opts, out_dir=str(ws.corpus_dir))
        self.stage("simulate", ws.mixtures_manifest, opts, out_dir=str(ws.mixtures_dir),
                   corpus=str(ws.corpus_manifest))
        for variant in Variant:
            self.stage("train_extractor", ws.extractor_model(variant), opts, out_dir=str(ws.extractor_dir(variant)),
                       mixtures=str(ws.mixtures_manifest), variant=variant.value)
        self.stage("extract", ws.extracted_manifest(EXT_VARIANT), opts, out_dir=str(ws.extracted_dir(EXT_VARIANT)),
                   model=str(ws.extractor_model(EXT_VARIANT)), mixtures=str(ws.mixtures_manifest),
                   split=["train", "dev"])

        training_sets = {
            CLEAN: [str(ws.corpus_manifest)],
            CLEAN_EXT: [str(ws.corpus_manifest), str(ws.extracted_manifest(EXT_VARIANT))],
        }
        for name, manifests in training_sets.items():
            self.stage("train_backend", ws.backend_model(name), opts, out_dir=str(ws.backend_dir(name)),
                       manifest=manifests)
        for condition in ("mixture", "clean"):
            self.stage("make_trials", ws.trials(condition), opts, out_dir=str(ws.trials_dir),
                       mixtures=str(ws.mixtures_manifest), corpus=str(ws.corpus_manifest), condition=condition)

        results = []
        for system in SYSTEMS:
            sys_dir = ws.system_dir(system)
            tse = str(ws.extractor_model(system.tse)) if system.tse else "none"
            self.info(system.describe())
            self.stage("score", sys_dir / "scores.txt", opts, out_dir=str(sys_dir),
                       backend=str(ws.backend_model(system.training)), trials=str(ws.trials(system.evaluation)),
                       corpus=str(ws.corpus_manifest), mixtures=str(ws.mixtures_manifest), tse=tse)
            self.stage("report", sys_dir / REPORT_NAME, opts, out_dir=str(sys_dir),
                       scores=str(sys_dir / "scores.txt"))
            metrics = json.loads((sys_dir / REPORT_NAME).read_text(encoding="utf-8"))
            results.append({
                "system": system.number,
                "training": system.training,
                "evaluation": system.evaluation,
                "tse": system.tse.value if system.tse else "none",
                **metrics,
            })

        baseline = results[0]
        for row in results:
            row["relative_reduction"] = {
                k: relative_reduction(baseline[k], row[k]) for k in ("eer", "dcf08", "dcf10")
            }
        path = out_dir / SUMMARY_NAME
        path.write_text(json.dumps({"systems": results}, indent=2, sort_keys=True) + "\n", encoding="utf-8")

        for row in results:
            self.stdout.write(f"system {row['system']}: EER {100 * row['eer']:6.2f}%  DCF08 {row['dcf08']:.4f}  "
                              f"DCF10 {row['dcf10']:.4f}  ({row['training']}, {row['evaluation']}, tse={row['tse']})")
        self.success(f"Summary -> {path}")
