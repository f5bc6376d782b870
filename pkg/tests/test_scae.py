"""Masked autoencoder: layers, gradients, batching, and training."""
import math

import numpy as np
import pytest
from scipy import sparse

from simquery.complexes import build_complex, hop_distances
from simquery.corpus import synth_corpus
from simquery.reduction import LaplacianSet
from simquery.scae import (Activation, BatchError, ConvLayer, Hyperparams,
                           MaskedSample, ScaeError, ScaeModel,
                           downsample_subcomplexes, make_masked_batch,
                           masked_l1, order_scales, recursive_predict,
                           remask_batch, train)


def random_operator(rng, n, density=0.4, symmetric=False):
    A = sparse.random(n, n, density=density, random_state=rng.integers(2**31),
                      data_rvs=lambda k: rng.uniform(-1, 1, size=k)).tocsr()
    if symmetric:
        A = (A + A.T) * 0.5
    return A


def test_activation_validation_and_values():
    with pytest.raises(ValueError):
        Activation("relu")
    with pytest.raises(ValueError):
        Activation("leaky", slope=0.0)
    a = Activation("leaky", 0.1)
    z = np.array([-2.0, 3.0])
    np.testing.assert_allclose(a.apply(z), [-0.2, 3.0])
    np.testing.assert_allclose(a.derivative(z), [0.1, 1.0])
    ident = Activation("identity")
    np.testing.assert_array_equal(ident.apply(z), z)
    np.testing.assert_array_equal(ident.derivative(z), [1.0, 1.0])


def test_conv_layer_degree_zero_is_affine():
    rng = np.random.default_rng(0)
    layer = ConvLayer(1, 3, 0, Activation("identity"), rng)
    lap = sparse.identity(4, format="csr")
    x = np.arange(4.0)
    out = layer.forward(lap, x)
    expect = x.reshape(-1, 1) @ layer.weights[:, :, 0] + layer.bias
    np.testing.assert_allclose(out, expect)


def test_conv_layer_shape_errors():
    rng = np.random.default_rng(0)
    layer = ConvLayer(2, 2, 1, Activation("identity"), rng)
    lap = sparse.identity(3, format="csr")
    with pytest.raises(ScaeError):
        layer.forward(lap, np.ones((3, 5)))
    with pytest.raises(ScaeError):
        layer.forward(sparse.identity(4, format="csr"), np.ones((3, 2)))
    with pytest.raises(ScaeError):
        ConvLayer(1, 1, 1, Activation("identity"), rng).backward(np.ones((3, 1)))
    with pytest.raises(ValueError):
        ConvLayer(1, 1, -1, Activation("identity"), rng)


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
@pytest.mark.parametrize("kind", ["identity", "leaky"])
def test_gradients_match_finite_differences(degree, kind):
    """Analytic gradients vs central differences, relative error < 1e-4."""
    rng = np.random.default_rng(degree * 10 + (kind == "leaky"))
    eps = 1e-6
    for instance in range(8):
        n, f_in, f_out = 6, 2, 3
        layer = ConvLayer(f_in, f_out, degree, Activation(kind, 0.07), rng)
        lap = random_operator(rng, n)  # non-symmetric on purpose
        x = rng.uniform(-1, 1, size=(n, f_in))
        target = rng.uniform(-1, 1, size=(n, f_out))

        def loss_at(layer_, x_):
            out = layer_.forward(lap, x_)
            return 0.5 * float(np.sum((out - target) ** 2))

        out = layer.forward(lap, x)
        dx, grads = layer.backward(out - target)

        for name, analytic in (("weights", grads["weights"]),
                               ("bias", grads["bias"]),
                               ("input", dx)):
            param = {"weights": layer.weights, "bias": layer.bias,
                     "input": x}[name]
            flat = param.ravel()
            idx = rng.choice(flat.size, size=min(6, flat.size), replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + eps
                hi = loss_at(layer, x)
                flat[i] = orig - eps
                lo = loss_at(layer, x)
                flat[i] = orig
                numeric = (hi - lo) / (2 * eps)
                got = analytic.ravel()[i]
                denom = max(abs(numeric), abs(got), 1e-8)
                assert abs(got - numeric) / denom < 1e-4, (name, degree, kind)


def test_degree_n_filter_is_n_hop_local():
    """An impulse through a degree-N filter only reaches N-hop neighbors."""
    rng = np.random.default_rng(5)
    for seed in range(10):
        g = synth_corpus(15, 25, 4, 10, seed=seed)
        s = build_complex(g)
        ls = LaplacianSet.from_complex(s)
        for k in range(s.max_order + 1):
            n = len(s.simplices[k])
            lap = ls.conv_operator(k)
            for degree in (1, 2, 3):
                layer = ConvLayer(1, 1, degree, Activation("identity"), rng)
                layer.bias[:] = 0.0
                src = int(rng.integers(n))
                impulse = np.zeros(n)
                impulse[src] = 1.0
                response = layer.forward(lap, impulse)[:, 0]
                dist = hop_distances(ls.normalized[k], [src])
                beyond = dist > degree
                np.testing.assert_allclose(response[beyond], 0.0, atol=1e-12)


def test_masked_l1_ignores_unmasked_slots():
    pred = np.array([1.0, 2.0, 3.0, 4.0])
    target = np.array([0.0, 2.5, 0.0, 5.0])
    mask = np.array([False, True, False, True])
    base = masked_l1(pred, target, mask)
    assert base == pytest.approx(1.5)
    tampered = target.copy()
    tampered[~mask] = 999.0  # unmasked truth must never affect the loss
    assert masked_l1(pred, tampered, mask) == base


def test_order_scales():
    g = synth_corpus(15, 25, 4, 10, seed=0)
    s = build_complex(g)
    scales = order_scales(s)
    assert scales == [float(c.max()) for c in s.cochains]
    assert all(sc >= 1.0 for sc in scales)


def fixture_subs(seed=0, count=4):
    g = synth_corpus(25, 60, 4, 10, seed=seed)
    s = build_complex(g)
    subs = downsample_subcomplexes(s, count, 30, seed=seed + 1)
    return s, subs


def test_downsample_subcomplexes_are_closed():
    s, subs = fixture_subs()
    assert len(subs) == 4
    for sub in subs:
        assert sub.size() >= 25
        for k in range(1, sub.max_order + 1):
            for sx in sub.simplices[k]:
                for p in range(len(sx)):
                    assert sub.contains(sx[:p] + sx[p + 1:])
        for k, order in enumerate(sub.simplices):
            for i, sx in enumerate(order):
                assert sub.cochains[k][i] == s.cochain_of(sx)
    assert downsample_subcomplexes(s, 0, 30, seed=0) == []


def test_make_masked_batch_mask_budget_and_hops():
    s, subs = fixture_subs(seed=3)
    p_train, n_hop = 0.3, 2
    batch = make_masked_batch(subs, p_train, n_hop, 10.0, seed=4,
                              scales=order_scales(s))
    for sample in batch.samples:
        assert sample.n_masked() <= math.ceil(p_train * sample.complex.size())
        assert sample.n_masked() > 0
        for k, mask in enumerate(sample.masks):
            if not mask.any():
                continue
            unmasked = np.flatnonzero(~mask)
            dist = hop_distances(sample._normalized[k], unmasked)
            assert np.all(dist[mask] <= n_hop)
        for k, rep in enumerate(sample.replacements):
            assert np.all(rep >= 1.0)
            assert np.all(rep <= sample.scales[k])


def test_make_masked_batch_validation():
    _, subs = fixture_subs()
    with pytest.raises(BatchError):
        make_masked_batch(subs, 0.0, 3, 10.0, seed=0)
    with pytest.raises(BatchError):
        make_masked_batch(subs, 0.3, 3, 0.5, seed=0)


def test_remask_batch_changes_masks_deterministically():
    s, subs = fixture_subs(seed=5)
    a = make_masked_batch(subs, 0.3, 3, 10.0, seed=6, scales=order_scales(s))
    b = make_masked_batch(subs, 0.3, 3, 10.0, seed=6, scales=order_scales(s))
    remask_batch(a, 0.3, 3, seed=99)
    remask_batch(b, 0.3, 3, seed=99)
    for sa, sb in zip(a.samples, b.samples):
        for ma, mb in zip(sa.masks, sb.masks):
            np.testing.assert_array_equal(ma, mb)
    c = make_masked_batch(subs, 0.3, 3, 10.0, seed=6, scales=order_scales(s))
    assert any(not np.array_equal(ma, mc)
               for sa, sc in zip(a.samples, c.samples)
               for ma, mc in zip(sa.masks, sc.masks))


def test_training_reduces_masked_loss_and_is_deterministic():
    s, subs = fixture_subs(seed=7, count=3)
    hp = Hyperparams(width=6, degree=2, epochs=60, learning_rate=5e-3,
                     mask_ratio=0.3, n_hop=3, c_max=10.0)

    def run():
        batch = make_masked_batch(subs, 0.3, 3, 10.0, seed=8,
                                  scales=order_scales(s))
        model = ScaeModel(s.max_order, hp, seed=9)
        trace = train(model, batch, remask_seed=10)
        return model, trace

    model_a, trace_a = run()
    model_b, trace_b = run()
    assert trace_a == trace_b
    assert trace_a[-1] < trace_a[0]
    for k in range(s.max_order + 1):
        for la, lb in zip(model_a.layers(k), model_b.layers(k)):
            np.testing.assert_array_equal(la.weights, lb.weights)


def test_model_save_load_round_trip(tmp_path):
    s, subs = fixture_subs(seed=11, count=2)
    hp = Hyperparams(width=4, degree=2, epochs=5, c_max=10.0)
    batch = make_masked_batch(subs, 0.3, 3, 10.0, seed=12,
                              scales=order_scales(s))
    model = ScaeModel(s.max_order, hp, seed=13)
    train(model, batch)
    path = tmp_path / "model.json"
    model.save(path)
    loaded = ScaeModel.load(path)
    ls = LaplacianSet.from_complex(s)
    for k in range(s.max_order + 1):
        x = np.linspace(0.1, 1.0, len(s.simplices[k]))
        np.testing.assert_array_equal(
            model.predict(k, ls.conv_operator(k), x),
            loaded.predict(k, ls.conv_operator(k), x))


def test_csi_training_differs_from_noiseless():
    s, subs = fixture_subs(seed=14, count=2)
    hp = Hyperparams(width=4, degree=2, epochs=10, c_max=10.0)

    def run(csi):
        batch = make_masked_batch(subs, 0.3, 3, 10.0, seed=15,
                                  scales=order_scales(s))
        model = ScaeModel(s.max_order, hp, seed=16)
        train(model, batch, csi_snr_db=csi, csi_seed=17)
        return model

    noiseless = run(None)
    noisy = run(0.0)
    assert any(
        not np.array_equal(a.weights, b.weights)
        for k in range(s.max_order + 1)
        for a, b in zip(noiseless.layers(k), noisy.layers(k)))


def test_recursive_predict_fills_all_slots():
    s, subs = fixture_subs(seed=18, count=2)
    hp = Hyperparams(width=4, degree=2, epochs=10, c_max=10.0)
    batch = make_masked_batch(subs, 0.3, 3, 10.0, seed=19,
                              scales=order_scales(s))
    model = ScaeModel(s.max_order, hp, seed=20)
    train(model, batch)
    ls = LaplacianSet.from_complex(s)
    rng = np.random.default_rng(21)
    known_mask = [rng.random(len(order)) < 0.5 for order in s.simplices]
    known_mask[0][0] = True  # at least one known slot
    values = [np.where(m, c, 0.0) for m, c in zip(known_mask, s.cochains)]
    filled, log = recursive_predict(model, ls, values, known_mask, p_step=0.3)
    for k, (v, m) in enumerate(zip(filled, known_mask)):
        assert np.all(np.isfinite(v))
        np.testing.assert_array_equal(v[m], s.cochains[k][m])  # untouched
    assert log
    with pytest.raises(ValueError):
        recursive_predict(model, ls, values, known_mask, p_step=0.0)
    with pytest.raises(ScaeError):
        recursive_predict(model, ls, values,
                          [np.zeros_like(m) for m in known_mask], p_step=0.5)
