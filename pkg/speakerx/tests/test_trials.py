import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from speakerx.errors import FormatError, InputError, TrialGenerationError
from speakerx.manifests import CorpusManifest
from speakerx.trials import Trial, generate_trials, read_trials, write_trials

from .fixtures import corpus, mixture


class GenerateTrialsTests(SimpleTestCase):
    def setUp(self):
        test = corpus(6, 4, split="test", prefix="t")
        train = corpus(4, 4, split="train", prefix="r")
        self.corpus = CorpusManifest(test.records + train.records)
        self.spk = {r.utt: r.spk for r in self.corpus.records}
        self.mixtures = [
            mixture(f"test{i:05d}", f"t{i % 6}_{i % 4}", f"t{(i + 1) % 6}_0", f"t{i % 6}_{(i + 1) % 4}")
            for i in range(10)
        ]
        self.mixtures.append(mixture("train00000", "r0_0", "r1_0", "r0_1", split="train"))
        self.by_id = {m.mix_id: m for m in self.mixtures}

    def test_one_target_and_sixteen_nontargets_per_mixture(self):
        trials = generate_trials(self.mixtures, self.corpus, seed=0)
        self.assertEqual(sum(t.target for t in trials), 10)
        self.assertEqual(sum(not t.target for t in trials), 160)
        self.assertEqual({t.test for t in trials}, {f"test{i:05d}" for i in range(10)})

    def test_enrollments_never_leak_the_mixture(self):
        for t in generate_trials(self.mixtures, self.corpus, seed=1):
            mix = self.by_id[t.test]
            self.assertNotIn(t.enroll, (mix.target, mix.aux, mix.interferer))
            self.assertEqual(self.spk[t.enroll] == mix.target_spk, t.target)
            self.assertTrue(self.spk[t.enroll].startswith("t"))

    def test_nontargets_are_distinct_per_mixture(self):
        trials = generate_trials(self.mixtures, self.corpus, seed=2)
        for mix_id in self.by_id:
            enrolls = [t.enroll for t in trials if t.test == mix_id and not t.target]
            self.assertEqual(len(enrolls), len(set(enrolls)))

    def test_only_the_interferer_utterance_is_excluded(self):
        mix = self.mixtures[0]
        # 5 other test speakers x 4 utterances, minus the interferer utterance
        trials = generate_trials([mix], self.corpus, per_target_nontargets=19, seed=0)
        enrolls = {t.enroll for t in trials if not t.target}
        self.assertNotIn(mix.interferer, enrolls)
        self.assertEqual({u for u in enrolls if self.spk[u] == mix.interferer_spk},
                         {f"{mix.interferer_spk}_{j}" for j in (1, 2, 3)})
        with self.assertRaises(TrialGenerationError):
            generate_trials([mix], self.corpus, per_target_nontargets=20, seed=0)

    def test_seeded(self):
        a = generate_trials(self.mixtures, self.corpus, seed=3)
        self.assertEqual(a, generate_trials(self.mixtures, self.corpus, seed=3))
        self.assertNotEqual(a, generate_trials(self.mixtures, self.corpus, seed=4))

    def test_clean_condition_swaps_only_the_test_side(self):
        mixed = generate_trials(self.mixtures, self.corpus, seed=5)
        clean = generate_trials(self.mixtures, self.corpus, seed=5, condition="clean")
        self.assertEqual([(t.enroll, t.target) for t in mixed], [(t.enroll, t.target) for t in clean])
        self.assertEqual([self.by_id[t.test].target for t in mixed], [t.test for t in clean])

    def test_target_without_held_out_utterance(self):
        records = [r for r in self.corpus.records if not (r.spk == "t0" and r.utt not in ("t0_0", "t0_1"))]
        mixtures = [mixture("test00000", "t0_0", "t1_0", "t0_1")]
        with self.assertRaises(TrialGenerationError) as ctx:
            generate_trials(mixtures, CorpusManifest(records), seed=0)
        self.assertEqual(len(ctx.exception.offenders), 1)
        self.assertIn("test00000", ctx.exception.offenders[0])

    def test_not_enough_nontargets(self):
        with self.assertRaises(TrialGenerationError):
            generate_trials(self.mixtures, self.corpus, per_target_nontargets=50, seed=0)

    def test_unknown_condition(self):
        with self.assertRaises(InputError):
            generate_trials(self.mixtures, self.corpus, condition="noisy")

    def test_no_test_mixtures(self):
        with self.assertRaises(TrialGenerationError):
            generate_trials(self.mixtures[-1:], self.corpus)


class TrialFileTests(SimpleTestCase):
    def test_write_then_read(self):
        trials = [Trial("a", "m1", True), Trial("b", "m1", False)]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_trials(Path(tmp) / "trials.txt", trials)
            self.assertEqual(path.read_text(), "a m1 target\nb m1 nontarget\n")
            self.assertEqual(read_trials(path), trials)

    def test_bad_key(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "trials.txt"
            path.write_text("a m1 yes\n")
            with self.assertRaises(FormatError):
                read_trials(path)

    def test_missing_file(self):
        with self.assertRaises(InputError):
            read_trials("/nonexistent/trials.txt")
