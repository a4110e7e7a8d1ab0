import json
import tempfile
from dataclasses import replace
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from speakerx.config import Variant
from speakerx.errors import InputError, TrainingFailureError
from speakerx.extractor import init_model, load_model
from speakerx.extractor.training import (
    Adam,
    backward,
    evaluate_loss,
    next_learning_rate,
    should_stop,
    train,
)

from .fixtures import tiny_extractor
from .test_extractor import _example


class ScheduleTests(SimpleTestCase):
    def test_learning_rate_decays_when_dev_loss_rises(self):
        self.assertAlmostEqual(next_learning_rate(0.0005, 1.0, 1.1, 0.7), 0.00035)
        self.assertEqual(next_learning_rate(0.0005, 1.0, 0.9, 0.7), 0.0005)
        self.assertEqual(next_learning_rate(0.0005, None, 5.0, 0.7), 0.0005)

    def test_stop_rule(self):
        cfg = tiny_extractor(min_epochs=3, max_epochs=10, stop_rel_loss=0.01)
        self.assertFalse(should_stop(1, None, 1.0, cfg))
        self.assertFalse(should_stop(2, 1.0, 1.0, cfg))  # flat, but before min_epochs
        self.assertTrue(should_stop(3, 1.0, 0.995, cfg))
        self.assertFalse(should_stop(3, 1.0, 0.9, cfg))
        self.assertTrue(should_stop(10, 1.0, 0.5, cfg))

    def test_adam_first_step_moves_by_the_learning_rate(self):
        params = {"w": np.array([1.0, -2.0, 3.0])}
        adam = Adam(params)
        adam.step(params, {"w": np.array([0.5, -4.0, 1e-3])}, lr=0.1)
        self.assertTrue(np.allclose(params["w"], [0.9, -1.9, 2.9], atol=1e-6))


class BatchGradientTests(SimpleTestCase):
    def test_thread_count_does_not_change_the_result(self):
        model = init_model(tiny_extractor())
        batch = [_example(seed=s) for s in range(4)]
        loss1, grads1 = backward(model, batch, jobs=1)
        loss2, grads2 = backward(model, batch, jobs=3)
        self.assertEqual(loss1, loss2)
        for name in grads1:
            self.assertTrue(np.array_equal(grads1[name], grads2[name]))

    def test_batch_mean(self):
        model = init_model(tiny_extractor(Variant.SBF_MTSAL))
        batch = [_example(seed=s) for s in range(3)]
        loss, _ = backward(model, batch)
        self.assertAlmostEqual(loss, evaluate_loss(model, batch))

    def test_empty_batch(self):
        with self.assertRaises(InputError):
            backward(init_model(tiny_extractor()), [])


class TrainTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.train_set = [_example(seed=s) for s in range(4)]
        self.dev_set = [_example(seed=s) for s in range(10, 12)]

    def tearDown(self):
        self.tmp.cleanup()

    def _cfg(self, **overrides):
        values = dict(lr0=0.01, batch=2, min_epochs=2, max_epochs=5)
        values.update(overrides)
        return tiny_extractor(**values)

    def test_log_and_checkpoint(self):
        result = train(self._cfg(), self.train_set, self.dev_set, self.root / "model.bin", self.root / "log.jsonl")
        rows = [json.loads(line) for line in (self.root / "log.jsonl").read_text().splitlines()]
        self.assertEqual(rows, result.history)
        self.assertLessEqual(len(rows), 5)
        self.assertEqual([r["epoch"] for r in rows], list(range(1, len(rows) + 1)))
        self.assertEqual(set(rows[0]), {"epoch", "train_loss", "dev_loss", "lr"})
        self.assertEqual(result.best_dev_loss, min(r["dev_loss"] for r in rows))

        saved = load_model(self.root / "model.bin")
        self.assertAlmostEqual(evaluate_loss(saved, self.dev_set), result.best_dev_loss, places=5)

    def test_training_is_reproducible(self):
        a = train(self._cfg(), self.train_set, self.dev_set, self.root / "a.bin")
        b = train(self._cfg(), self.train_set, self.dev_set, self.root / "b.bin")
        self.assertEqual(a.history, b.history)

    def test_fits_a_small_set(self):
        examples = [replace(ex, target=(0.9 * ex.mix_mag).astype(np.float32)) for ex in self.train_set]
        cfg = self._cfg(min_epochs=200, max_epochs=200, lr0=0.05)
        before = evaluate_loss(init_model(cfg), examples)
        result = train(cfg, examples, examples, self.root / "fit.bin")
        self.assertLess(result.best_dev_loss, 0.1 * before)

    def test_divergence_is_reported(self):
        with patch("speakerx.extractor.training.evaluate_loss", return_value=float("nan")):
            with self.assertRaises(TrainingFailureError) as ctx:
                train(self._cfg(), self.train_set, self.dev_set, self.root / "nan.bin")
        self.assertIsNone(ctx.exception.checkpoint)

    def test_empty_dev_split(self):
        with self.assertRaises(InputError):
            train(self._cfg(), self.train_set, [], self.root / "x.bin")
