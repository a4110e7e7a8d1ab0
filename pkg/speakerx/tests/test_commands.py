import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from speakerx.audio import FRAME_LEN, HOP, load_wav, num_frames
from speakerx.extractor import load_model
from speakerx.manifests import load_extracted, load_mixtures, read_jsonl
from speakerx.metrics import read_scores
from speakerx.trials import read_trials

from .fixtures import write_config


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.config = write_config(self.root)
        self.work = self.root / "work"

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, name, **options):
        out = StringIO()
        call_command(name, config=str(self.config), stdout=out, stderr=StringIO(), **options)
        return out.getvalue()

    def assertExitCode(self, code, name, **options):
        with self.assertRaises(CommandError) as ctx:
            self.call(name, **options)
        self.assertEqual(ctx.exception.returncode, code)
        return ctx.exception


class CorpusAndMixtureCommandTests(CommandTestCase):
    def test_synth_then_simulate(self):
        self.call("synth_corpus")
        rows = read_jsonl(self.work / "corpus" / "corpus.jsonl")
        self.assertEqual(len(rows), 18)
        self.assertFalse((self.work / "corpus" / ".lock").exists())

        self.call("simulate")
        records = load_mixtures(self.work / "mixtures" / "mixtures.jsonl")
        self.assertEqual([r.split for r in records].count("train"), 3)
        self.assertEqual([r.split for r in records].count("dev"), 2)
        self.assertEqual([r.split for r in records].count("test"), 2)
        for rec in records:
            self.assertEqual(len(load_wav(rec.mix_path)), len(load_wav(rec.ref_path)))

    def test_reruns_are_byte_identical(self):
        self.call("synth_corpus", out_dir=str(self.root / "a"))
        self.call("synth_corpus", out_dir=str(self.root / "b"))
        self.call("simulate", corpus=str(self.root / "a" / "corpus.jsonl"), out_dir=str(self.root / "ma"))
        self.call("simulate", corpus=str(self.root / "b" / "corpus.jsonl"), out_dir=str(self.root / "mb"))
        for first, second in (("a/corpus.jsonl", "b/corpus.jsonl"), ("ma/mixtures.jsonl", "mb/mixtures.jsonl")):
            self.assertEqual((self.root / first).read_bytes().replace(b"/a/", b"/b/"),
                             (self.root / second).read_bytes())

    def test_overrides_from_flags(self):
        self.call("synth_corpus", speakers=4, utts_per_speaker=3)
        self.assertEqual(len(read_jsonl(self.work / "corpus" / "corpus.jsonl")), 12)

    def test_simulate_without_corpus(self):
        err = self.assertExitCode(2, "simulate")
        self.assertIn("corpus manifest not found", str(err))

    def test_locked_output_directory(self):
        out_dir = self.root / "busy"
        out_dir.mkdir()
        (out_dir / ".lock").write_text("123")
        self.assertExitCode(2, "synth_corpus", out_dir=str(out_dir))
        self.assertTrue((out_dir / ".lock").exists())

    def test_invalid_config(self):
        self.config = write_config(self.root, corpus={"colour": "blue"})
        self.assertExitCode(2, "synth_corpus")

    def test_missing_config(self):
        self.config = self.root / "absent.yaml"
        self.assertExitCode(2, "synth_corpus")


class ExtractorCommandTests(CommandTestCase):
    def test_unknown_variant(self):
        err = self.assertExitCode(2, "train_extractor", variant="sbf-lstm")
        self.assertIn("sbf-mtsal-concat", str(err))

    def test_train_and_extract(self):
        self.call("synth_corpus")
        self.call("simulate")
        self.call("train_extractor", variant="sbf-mtsal")
        model_dir = self.work / "extractor" / "sbf_mtsal"
        log = [json.loads(line) for line in (model_dir / "train_log.jsonl").read_text().splitlines()]
        self.assertTrue(1 <= len(log) <= 2)
        self.assertEqual(load_model(model_dir / "model.bin").variant.value, "sbf_mtsal")

        self.call("extract", variant="sbf-mtsal", split=["test"])
        rows = load_extracted(self.work / "extracted" / "sbf_mtsal" / "extracted.jsonl")
        self.assertEqual([r["split"] for r in rows], ["test", "test"])
        for row in rows:
            self.assertEqual(row["spk"], row["target_spk"])
            self.assertTrue(Path(row["path"]).is_file())
            self.assertIn("output_snr_db", row)
            frames = num_frames(len(load_wav(row["mix_path"])))
            self.assertEqual(len(load_wav(row["path"])), (frames - 1) * HOP + FRAME_LEN)

        self.assertExitCode(2, "extract", variant="sbf-mtsal-concat", model=str(model_dir / "model.bin"),
                            out_dir=str(self.root / "mismatch"))

    def test_trained_extractor_raises_the_snr(self):
        self.config = write_config(self.root, extractor={"min_epochs": 40, "max_epochs": 40, "lr0": 0.01})
        self.call("synth_corpus")
        self.call("simulate")
        self.call("train_extractor", variant="sbf-mtsal-concat")
        self.call("extract", variant="sbf-mtsal-concat", split=["train"])
        rows = load_extracted(self.work / "extracted" / "sbf_mtsal_concat" / "extracted.jsonl")
        self.assertEqual(len(rows), 3)
        gain = np.mean([r["output_snr_db"] - r["input_snr_db"] for r in rows])
        self.assertGreater(gain, 0.0)


class VerificationCommandTests(CommandTestCase):
    def test_clean_pipeline(self):
        self.call("synth_corpus")
        self.call("simulate")
        self.call("train_backend")
        self.assertTrue((self.work / "backend" / "clean" / "backend.bin").is_file())
        self.assertTrue((self.work / "backend" / "clean" / "ivectors.ark").is_file())

        self.call("make_trials", condition="clean")
        trials = read_trials(self.work / "trials" / "trials_clean.txt")
        self.assertEqual(sum(t.target for t in trials), 2)
        self.assertEqual(len(trials), 6)

        self.call("score", trials=str(self.work / "trials" / "trials_clean.txt"))
        scores = read_scores(self.work / "scores" / "scores.txt")
        self.assertEqual(scores.trials, trials)

        out = self.call("report")
        metrics = json.loads((self.work / "scores" / "report.json").read_text())
        self.assertIn('"eer"', out)
        self.assertTrue(0.0 <= metrics["eer"] <= 1.0)
        self.assertTrue((self.work / "scores" / "det.csv").is_file())

    def test_extended_backend_with_extraction_at_test_time(self):
        self.call("synth_corpus")
        self.call("simulate")
        self.call("train_extractor", variant="sbf-mtsal-concat")
        model = self.work / "extractor" / "sbf_mtsal_concat" / "model.bin"
        self.call("extract", variant="sbf-mtsal-concat", split=["train", "dev"])
        extracted = self.work / "extracted" / "sbf_mtsal_concat" / "extracted.jsonl"
        self.call("train_backend", manifest=[str(self.work / "corpus" / "corpus.jsonl"), str(extracted)])
        backend = self.work / "backend" / "clean_ext" / "backend.bin"
        self.assertTrue(backend.is_file())
        self.assertFalse((self.work / "backend" / "clean").exists())

        self.call("make_trials")
        trials = read_trials(self.work / "trials" / "trials_mixture.txt")
        self.assertEqual(len(trials), 6)
        self.call("score", tse=str(model), backend=str(backend), out_dir=str(self.root / "tse"))
        scores = read_scores(self.root / "tse" / "scores.txt")
        self.assertEqual(scores.trials, trials)
        self.assertTrue(np.all(np.isfinite(scores.scores)))

    def test_pipeline_reruns_are_byte_identical(self):
        outputs = []
        for name in ("first", "second"):
            root = self.root / name
            root.mkdir()
            self.config = write_config(root)
            work = root / "work"
            self.call("synth_corpus")
            self.call("simulate")
            self.call("train_extractor", variant="sbf-mtsal")
            self.call("train_backend")
            self.call("make_trials")
            model = work / "extractor" / "sbf_mtsal" / "model.bin"
            self.call("score", tse=str(model))
            outputs.append([(work / rel).read_bytes() for rel in (
                "extractor/sbf_mtsal/model.bin",
                "backend/clean/backend.bin",
                "trials/trials_mixture.txt",
                "scores/scores.txt",
            )])
            for rel in ("corpus/corpus.jsonl", "mixtures/mixtures.jsonl"):
                outputs[-1].append((work / rel).read_bytes().replace(f"/{name}/".encode(), b"/"))
        for first, second in zip(*outputs):
            self.assertEqual(first, second)

    def test_report_on_a_known_score_file(self):
        path = self.root / "hand" / "scores.txt"
        path.parent.mkdir()
        path.write_text("a x target 3\nb x target 2\nc x target 1\n"
                        "d x nontarget 2.5\ne x nontarget 0.5\nf x nontarget -1\n")
        self.call("report", scores=str(path))
        metrics = json.loads((path.parent / "report.json").read_text())
        self.assertAlmostEqual(metrics["eer"], 1.0 / 3.0)
        self.assertAlmostEqual(metrics["dcf08"], 2.0 / 3.0)

    def test_report_cost_override(self):
        path = self.root / "hand" / "scores.txt"
        path.parent.mkdir()
        path.write_text("a x target 1\nb x nontarget 0\n")
        self.call("report", scores=str(path), dcf08_p_target=0.5)
        self.assertEqual(json.loads((path.parent / "report.json").read_text())["dcf08"], 0.0)

    def test_score_without_backend(self):
        self.assertExitCode(2, "score")

    def test_score_with_missing_audio(self):
        (self.work / "backend" / "clean").mkdir(parents=True)
        (self.work / "backend" / "clean" / "backend.bin").write_bytes(b"{}\n")
        trials = self.root / "trials.txt"
        trials.write_text("u1 m1 target\n")
        err = self.assertExitCode(2, "score", trials=str(trials))
        self.assertIn("u1", str(err))
