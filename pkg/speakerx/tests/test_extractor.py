import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from speakerx.archive import write_container
from speakerx.audio import FRAME_LEN, HOP, Waveform
from speakerx.config import Variant
from speakerx.errors import DimensionError, FormatError
from speakerx.extractor import (
    ExtractorModel,
    extract,
    forward,
    init_model,
    load_model,
    mtsal_loss,
    psm_target,
    save_model,
)
from speakerx.extractor.loss import loss_and_grad, loss_from_target, target_magnitude
from speakerx.extractor.network import conditioning
from speakerx.extractor.training import Example, example_gradient

from .fixtures import tiny_extractor


def _example(bins=5, frames=6, aux_frames=4, seed=0):
    rng = np.random.default_rng(seed)
    mix_mag = rng.uniform(0.2, 1.0, (frames, bins))
    return Example(
        mix_id="m0",
        mix_mag=mix_mag.astype(np.float32),
        aux_mag=rng.uniform(0.2, 1.0, (aux_frames, bins)).astype(np.float32),
        target=(mix_mag * rng.uniform(0.0, 1.0, mix_mag.shape)).astype(np.float32),
    )


def _loss(model, ex):
    mask = forward(model, ex.mix_mag, ex.aux_mag)
    return loss_from_target(mask, ex.mix_mag.astype(np.float64), ex.target.astype(np.float64))


def _sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def _unrolled_lstm(frames, wx, wh, b):
    cells = wh.shape[0]
    h, c, out = [0.0] * cells, [0.0] * cells, []
    for x in frames:
        z = [b[j] + sum(x[i] * wx[i, j] for i in range(len(x))) + sum(h[i] * wh[i, j] for i in range(cells))
             for j in range(4 * cells)]
        for k in range(cells):
            i_gate, f_gate = _sigmoid(z[k]), _sigmoid(z[cells + k])
            o_gate, g = _sigmoid(z[2 * cells + k]), math.tanh(z[3 * cells + k])
            c[k] = f_gate * c[k] + i_gate * g
            h[k] = o_gate * math.tanh(c[k])
        out.append(list(h))
    return out


def _unrolled_blstm(frames, p, name):
    fwd = _unrolled_lstm(frames, *(p[f"{name}.fwd.{k}"] for k in ("wx", "wh", "b")))
    bwd = _unrolled_lstm(frames[::-1], *(p[f"{name}.bwd.{k}"] for k in ("wx", "wh", "b")))[::-1]
    return [f + b for f, b in zip(fwd, bwd)]


def _unrolled_dense(v, p, name, act):
    w, b = p[f"{name}.w"], p[f"{name}.b"]
    z = [b[j] + sum(v[i] * w[i, j] for i in range(len(v))) for j in range(w.shape[1])]
    if act == "relu":
        return [max(0.0, a) for a in z]
    if act == "sigmoid":
        return [_sigmoid(a) for a in z]
    return z


def _frame_mean(frames):
    return [sum(col) / len(frames) for col in zip(*frames)]


def _unrolled_forward(model, mix_mag, aux_mag):
    p = model.params
    mix = [list(row) for row in np.asarray(mix_mag, dtype=np.float64)]
    aux = [list(row) for row in np.asarray(aux_mag, dtype=np.float64)]
    mask = []
    if model.variant == Variant.SBF_MTSAL:
        alpha = _frame_mean([_unrolled_dense(_unrolled_dense(_unrolled_dense(a, p, "aux.fc1", "relu"),
                                                             p, "aux.fc2", "relu"), p, "aux.out", "linear")
                             for a in aux])
        w, b = p["mask.adapt.w"], p["mask.adapt.b"]
        for h in _unrolled_blstm(mix, p, "mask.blstm"):
            adapted = [sum(alpha[m] * max(0.0, b[m, o] + sum(h[i] * w[m, i, o] for i in range(len(h))))
                           for m in range(len(alpha)))
                       for o in range(w.shape[2])]
            v = _unrolled_dense(_unrolled_dense(adapted, p, "mask.fc1", "relu"), p, "mask.fc2", "relu")
            mask.append(_unrolled_dense(v, p, "mask.out", "sigmoid"))
    else:
        embedding = _frame_mean([_unrolled_dense(_unrolled_dense(a, p, "aux.fc1", "relu"), p, "aux.out", "linear")
                                 for a in _unrolled_blstm(aux, p, "aux.blstm")])
        hidden = [_unrolled_dense(h + embedding, p, "mask.fc1", "relu") for h in _unrolled_blstm(mix, p, "mask.blstm1")]
        for h in _unrolled_blstm(hidden, p, "mask.blstm2"):
            mask.append(_unrolled_dense(_unrolled_dense(h, p, "mask.fc2", "relu"), p, "mask.out", "sigmoid"))
    return np.array(mask)


def _elementwise_loss(mask, mix_mag, ref, mix):
    n_frames, n_bins = mask.shape
    norm = 2.0 * (1 + 4)
    residual = [[0.0] * n_bins for _ in range(n_frames)]
    for t in range(n_frames):
        for f in range(n_bins):
            projected = abs(ref[t, f]) * math.cos(np.angle(ref[t, f]) - np.angle(mix[t, f]))
            target = min(max(projected, 0.0), abs(mix[t, f]))
            residual[t][f] = mask[t, f] * mix_mag[t, f] - target

    def slope(rows):
        last = len(rows) - 1
        return [[sum(k * (rows[min(t + k, last)][f] - rows[max(t - k, 0)][f]) for k in (1, 2)) / norm
                 for f in range(n_bins)] for t in range(len(rows))]

    d1 = slope(residual)
    d2 = slope(d1)
    total = sum(v * v for rows in (residual, d1, d2) for row in rows for v in row)
    return total / (n_frames * n_bins)

class NetworkTests(SimpleTestCase):
    def test_mask_shape_and_range(self):
        ex = _example()
        for variant in Variant:
            model = init_model(tiny_extractor(variant))
            mask = forward(model, ex.mix_mag, ex.aux_mag)
            self.assertEqual(mask.shape, (6, 5))
            self.assertTrue(np.all((mask >= 0.0) & (mask <= 1.0)))

    def test_matches_an_unrolled_forward_pass(self):
        ex = _example(seed=9)
        for variant in Variant:
            model = init_model(tiny_extractor(variant))
            self.assertTrue(np.allclose(forward(model, ex.mix_mag, ex.aux_mag),
                                        _unrolled_forward(model, ex.mix_mag, ex.aux_mag), rtol=0, atol=1e-9))

    def test_zero_parameters_give_a_half_mask(self):
        ex = _example()
        for variant in Variant:
            model = init_model(tiny_extractor(variant))
            zero = ExtractorModel(model.config, model.zeros_like())
            self.assertTrue(np.all(forward(zero, ex.mix_mag, ex.aux_mag) == 0.5))

    def test_adaptation_weights_ignore_aux_frame_order(self):
        model = init_model(tiny_extractor(Variant.SBF_MTSAL))
        aux = _example(aux_frames=7).aux_mag
        shuffled = aux[np.random.default_rng(1).permutation(7)]
        self.assertTrue(np.allclose(conditioning(model, aux), conditioning(model, shuffled)))

    def test_conditioning_sizes(self):
        aux = _example().aux_mag
        self.assertEqual(conditioning(init_model(tiny_extractor(Variant.SBF_MTSAL)), aux).shape, (3,))
        self.assertEqual(conditioning(init_model(tiny_extractor(Variant.SBF_MTSAL_CONCAT, embed_dim=5)),
                                      aux).shape, (5,))

    def test_initialization_is_seeded(self):
        a = init_model(tiny_extractor())
        b = init_model(tiny_extractor())
        c = init_model(tiny_extractor(seed=1))
        for name in a.params:
            self.assertTrue(np.array_equal(a.params[name], b.params[name]))
        self.assertFalse(all(np.array_equal(a.params[n], c.params[n]) for n in a.params))

    def test_wrong_input_width(self):
        model = init_model(tiny_extractor())
        with self.assertRaises(DimensionError):
            forward(model, np.ones((4, 6)), np.ones((4, 5)))

    def test_validate_catches_missing_parameters(self):
        model = init_model(tiny_extractor())
        name = next(iter(model.params))
        del model.params[name]
        with self.assertRaises(DimensionError):
            model.validate()

    def test_extract_length(self):
        cfg = tiny_extractor(Variant.SBF_MTSAL, bins=129)
        rng = np.random.default_rng(2)
        out = extract(init_model(cfg), Waveform(0.1 * rng.standard_normal(2000)),
                      Waveform(0.1 * rng.standard_normal(1500)))
        self.assertEqual(len(out), (14 - 1) * HOP + FRAME_LEN)
        self.assertTrue(np.all(np.isfinite(out.samples)))


class GradientTests(SimpleTestCase):
    def _check_parameters(self, variant):
        model = init_model(tiny_extractor(variant))
        ex = _example(seed=3)
        _, grads = example_gradient(model, ex)
        eps = 1e-6
        for name, value in sorted(model.params.items()):
            flat = value.reshape(-1)
            for idx in sorted({0, flat.size // 2, flat.size - 1}):
                saved = flat[idx]
                flat[idx] = saved + eps
                up = _loss(model, ex)
                flat[idx] = saved - eps
                down = _loss(model, ex)
                flat[idx] = saved
                numeric = (up - down) / (2 * eps)
                analytic = grads[name].reshape(-1)[idx]
                self.assertTrue(np.isclose(analytic, numeric, rtol=1e-4, atol=1e-8),
                                f"{name}[{idx}]: analytic {analytic} numeric {numeric}")

    def test_sbf_mtsal_gradients(self):
        self._check_parameters(Variant.SBF_MTSAL)

    def test_concat_gradients(self):
        self._check_parameters(Variant.SBF_MTSAL_CONCAT)

    def test_loss_gradient_with_respect_to_the_mask(self):
        rng = np.random.default_rng(4)
        mask = rng.uniform(0.1, 0.9, (7, 3))
        mix_mag = rng.uniform(0.5, 1.5, (7, 3))
        target = rng.uniform(0.0, 0.5, (7, 3))
        _, grad = loss_and_grad(mask, mix_mag, target)
        eps = 1e-6
        for t, f in ((0, 0), (3, 1), (6, 2)):
            bumped = mask.copy()
            bumped[t, f] += eps
            up = loss_from_target(bumped, mix_mag, target)
            bumped[t, f] -= 2 * eps
            down = loss_from_target(bumped, mix_mag, target)
            self.assertAlmostEqual(grad[t, f], (up - down) / (2 * eps), places=7)


class LossTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(5)
        self.mix = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))

    def test_psm_oracles(self):
        self.assertTrue(np.allclose(psm_target(self.mix, self.mix), 1.0))
        self.assertTrue(np.allclose(psm_target(np.zeros_like(self.mix), self.mix), 0.0))
        self.assertTrue(np.allclose(psm_target(-self.mix, self.mix), 0.0))
        self.assertTrue(np.allclose(psm_target(0.5 * self.mix, self.mix), 0.5))

    def test_target_magnitude_is_reachable(self):
        ref = 3.0 * self.mix
        self.assertTrue(np.allclose(target_magnitude(ref, self.mix), np.abs(self.mix)))

    def test_perfect_mask_has_zero_loss(self):
        self.assertAlmostEqual(mtsal_loss(np.ones((6, 4)), np.abs(self.mix), self.mix, self.mix), 0.0)

    def test_constant_residual_has_no_dynamic_terms(self):
        mix = np.ones((6, 4), dtype=complex)
        self.assertAlmostEqual(mtsal_loss(np.ones((6, 4)), np.abs(mix), 0.5 * mix, mix), 0.25)

    def test_matches_an_elementwise_loss(self):
        rng = np.random.default_rng(6)
        mix = rng.standard_normal((4, 129)) + 1j * rng.standard_normal((4, 129))
        ref = rng.standard_normal((4, 129)) + 1j * rng.standard_normal((4, 129))
        mask = rng.uniform(0.0, 1.0, (4, 129))
        expected = _elementwise_loss(mask, np.abs(mix), ref, mix)
        self.assertAlmostEqual(mtsal_loss(mask, np.abs(mix), ref, mix), expected, delta=1e-10)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            mtsal_loss(np.ones((5, 4)), np.abs(self.mix), self.mix, self.mix)


class ModelFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_saved_model_reproduces_the_mask(self):
        ex = _example()
        for variant in Variant:
            model = init_model(tiny_extractor(variant))
            model.params = {k: v.astype(np.float32).astype(np.float64) for k, v in model.params.items()}
            path = save_model(self.root / f"{variant.value}.bin", model)
            loaded = load_model(path)
            self.assertEqual(loaded.variant, variant)
            self.assertEqual(loaded.config, model.config)
            self.assertTrue(np.allclose(forward(loaded, ex.mix_mag, ex.aux_mag),
                                        forward(model, ex.mix_mag, ex.aux_mag)))

    def test_save_is_byte_deterministic(self):
        model = init_model(tiny_extractor())
        a = save_model(self.root / "a.bin", model).read_bytes()
        b = save_model(self.root / "b.bin", model).read_bytes()
        self.assertEqual(a, b)

    def test_wrong_container_kind(self):
        path = write_container(self.root / "other.bin", "ivectors", {"x": np.zeros(3)})
        with self.assertRaises(FormatError):
            load_model(path)

    def test_not_a_container(self):
        path = self.root / "junk.bin"
        path.write_bytes(b"\x00\x01junk")
        with self.assertRaises(FormatError):
            load_model(path)
