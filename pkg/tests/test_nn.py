import numpy as np
import pytest

from dfguide.nn import (
    AdamState,
    DenseGrid,
    GridMlp,
    Mlp,
    adam_step,
    encode_static,
    eps1_encoding,
    luminance,
    one_blob,
    relative_l2_loss,
    spherical_harmonics,
    static_width,
    triangle_wave,
    weighted_log_density_loss,
)
from dfguide.pdf import CLAMP, LINEAR, NEAREST, WRAP, DiscretePdf1D

F64 = np.float64


def rel_err(a, b, floor=1e-6):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def central_difference(f, x, index, h=1e-6):
    old = x[index]
    x[index] = old + h
    fp = f()
    x[index] = old - h
    fm = f()
    x[index] = old
    return (fp - fm) / (2 * h)


def probe_indices(rng, params, count):
    out = []
    for _ in range(count):
        k = int(rng.integers(len(params)))
        out.append((k, tuple(int(rng.integers(s)) for s in params[k].shape)))
    return out


# --- encodings ----------------------------------------------------------------------


def test_sh_constant_band_at_pole():
    sh = spherical_harmonics(np.array([[0.0, 0.0, 1.0]]))
    assert sh.shape == (1, 16)
    assert sh[0, 0] == pytest.approx(0.28209479, abs=1e-8)


def test_sh_orthonormal_by_quadrature():
    rng = np.random.default_rng(0)
    d = rng.normal(size=(400_000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    sh = spherical_harmonics(d)
    gram = sh.T @ sh / len(d) * 4 * np.pi
    np.testing.assert_allclose(gram, np.eye(16), atol=0.03)


def test_one_blob_centered_is_symmetric():
    b = one_blob(np.array([0.5]))[0]
    assert b.shape == (4,)
    assert np.all((b >= 0) & (b <= 1))
    np.testing.assert_allclose(b, b[::-1], atol=1e-15)
    assert b[1] == b[2] and b[0] < b[1]


def test_triangle_wave_direct_evaluation():
    # [DERIVED] tri(t) = 4|frac(t) - 0.5| - 1 evaluated by hand at s = 0.3
    s = np.array([0.3])
    expected = []
    for k in range(12):
        t = 0.3 * 2 ** k
        expected.append(4 * abs((t - np.floor(t)) - 0.5) - 1)
    np.testing.assert_allclose(triangle_wave(s)[0], expected, atol=1e-12)
    np.testing.assert_allclose(triangle_wave(np.array([0.0]))[0, :4], [1, 1, 1, 1])
    np.testing.assert_allclose(triangle_wave(np.array([0.0])), triangle_wave(np.array([1.0])), atol=1e-12)


def test_eps1_encoding_separates_mirror_images():
    s = np.array([0.2, 0.8])
    plain = triangle_wave(s)
    np.testing.assert_allclose(plain[0], plain[1], atol=1e-12)  # the symmetry being broken
    enc = eps1_encoding(s)
    assert enc.shape == (2, 24)
    assert np.abs(enc[0] - enc[1]).max() > 0.5
    np.testing.assert_allclose(eps1_encoding(np.array([0.0])), eps1_encoding(np.array([1.0])), atol=1e-12)


def test_static_widths():
    rng = np.random.default_rng(1)
    d = rng.normal(size=(5, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    enc = encode_static(d, d, rng.random(5))
    assert enc.shape == (5, static_width(False)) == (5, 32)
    enc = encode_static(d, d, rng.random(5), eps1=rng.random(5))
    assert enc.shape == (5, static_width(True)) == (5, 56)
    assert np.all(np.isfinite(encode_static(d, d, np.array([-3.0, 0, 0.5, 1, 7.0]))))


def test_dense_grid_continuous_across_cells():
    grid = DenseGrid((8, 16, 32), 2, rng=np.random.default_rng(2), dtype=F64, init_scale=1.0)
    boundary = 3.0 / 8.0  # a cell face on every level
    rng = np.random.default_rng(3)
    p = rng.random((50, 3))
    a, b = p.copy(), p.copy()
    a[:, 0] = boundary - 1e-9
    b[:, 0] = boundary + 1e-9
    assert np.max(np.abs(grid.forward(a) - grid.forward(b))) < 1e-5


def test_dense_grid_reproduces_vertex_values():
    grid = DenseGrid((4,), 1, rng=np.random.default_rng(4), dtype=F64, init_scale=1.0)
    ijk = np.array([[1, 2, 3]])
    out = grid.forward(ijk / 4.0)
    assert out[0, 0] == pytest.approx(grid.params[0][1 * 25 + 2 * 5 + 3, 0])


def test_dense_grid_backward_requires_forward():
    grid = DenseGrid((4,), 1)
    with pytest.raises(RuntimeError):
        grid.backward(np.zeros((1, 1)))


# --- MLP ------------------------------------------------------------------------------


def test_zero_network_outputs_zero():
    net = Mlp([5, 7, 3], dtype=F64)
    for p in net.params:
        p[...] = 0
    np.testing.assert_array_equal(net.forward(np.ones((4, 5))), 0.0)


def test_affine_one_by_one():
    net = Mlp([1, 1], dtype=F64)
    net.weights[0][...] = 2.0
    net.biases[0][...] = 1.0
    assert net.forward(np.array([[3.0]]))[0, 0] == 7.0


def test_linear_layer_weight_gradient_is_input_outer_ones():
    net = Mlp([3, 2], dtype=F64)
    x = np.array([[1.0, 2.0, 3.0]])
    net.forward(x, keep=True)
    grads, _ = net.backward(np.ones((1, 2)))
    np.testing.assert_array_equal(grads[0], np.outer(x[0], np.ones(2)))
    np.testing.assert_array_equal(grads[1], np.ones(2))


def test_zero_upstream_gives_zero_gradients():
    net = Mlp([4, 8, 8, 2], dtype=F64)
    net.forward(np.random.default_rng(0).normal(size=(6, 4)), keep=True)
    grads, _ = net.backward(np.zeros((6, 2)))
    for g in grads:
        np.testing.assert_array_equal(g, 0.0)


def test_backward_without_forward_raises():
    net = Mlp([2, 2])
    net.forward(np.zeros((1, 2)))
    with pytest.raises(RuntimeError):
        net.backward(np.zeros((1, 2)))


def test_kaiming_init_and_output_scale():
    rng = np.random.default_rng(5)
    net = Mlp([32, 64, 64, 64, 16], rng=rng, dtype=F64, output_scale=0.1)
    for k, w in enumerate(net.weights):
        bound = np.sqrt(6.0 / w.shape[0]) * (0.1 if k == 3 else 1.0)
        assert np.all(np.abs(w) <= bound)
        assert np.abs(w).max() > 0.9 * bound
    for b in net.biases:
        np.testing.assert_array_equal(b, 0.0)


def test_forward_deterministic():
    a = GridMlp(32, 8, rng=np.random.default_rng(7))
    b = GridMlp(32, 8, rng=np.random.default_rng(7))
    rng = np.random.default_rng(8)
    p, s = rng.random((100, 3)), rng.normal(size=(100, 32))
    np.testing.assert_array_equal(a.forward(p, s), b.forward(p, s))


def test_width_mismatch_rejected():
    with pytest.raises(ValueError):
        Mlp([3, 2]).forward(np.zeros((1, 4)))


def test_assert_finite_detects_nan():
    net = Mlp([2, 2])
    net.weights[0][0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        net.assert_finite()


def test_mlp_gradient_random_net():
    rng = np.random.default_rng(9)
    net = Mlp([6, 16, 16, 4], rng=rng, dtype=F64)
    x = rng.normal(size=(10, 6))
    c = rng.normal(size=(10, 4))

    def loss():
        return float(np.sum(np.sin(net.forward(x)) * c))

    out = net.forward(x, keep=True)
    grads, _ = net.backward(np.cos(out) * c)
    for k, idx in probe_indices(rng, net.params, 100):
        fd = central_difference(loss, net.params[k], idx)
        assert rel_err(grads[k][idx], fd) < 1e-4


# --- heads ----------------------------------------------------------------------------


@pytest.mark.parametrize("mode,boundary", [(NEAREST, WRAP), (LINEAR, WRAP), (LINEAR, CLAMP)])
def test_joint_log_density_gradient_wrt_logits(mode, boundary):
    rng = np.random.default_rng(10)
    raw = rng.normal(size=(20, 16))
    eps = rng.random(20)
    weights = rng.random(20) * 3
    i0, i1, w0, w1 = DiscretePdf1D.from_logits(raw, mode, boundary).interp_weights(eps)
    _, grad = weighted_log_density_loss(raw, i0, i1, w0, w1, weights)

    def loss():
        return weighted_log_density_loss(raw, i0, i1, w0, w1, weights)[0]

    for _ in range(60):
        idx = (int(rng.integers(20)), int(rng.integers(16)))
        assert rel_err(grad[idx], central_difference(loss, raw, idx)) < 1e-4


@pytest.mark.parametrize("mode", [NEAREST, LINEAR])
def test_softmax_head_gradient_through_network(mode):
    """Marginal and conditional heads on one grid network, chained through the joint log-density."""
    rng = np.random.default_rng(11)
    marg = GridMlp(static_width(False), 8, hidden=(16, 16, 16), rng=rng, dtype=F64, output_scale=0.5)
    cond = GridMlp(static_width(True), 6, hidden=(16, 16, 16), rng=rng, dtype=F64, output_scale=0.5)
    for p in marg.grid.params + cond.grid.params:
        p[...] = rng.uniform(-0.5, 0.5, size=p.shape)
    n = 12
    pos = rng.random((n, 3))
    wo = rng.normal(size=(n, 3))
    wo /= np.linalg.norm(wo, axis=1, keepdims=True)
    static = encode_static(wo, wo, rng.random(n), dtype=F64)
    e1, e2 = rng.random(n), rng.random(n)
    static_c = np.concatenate([static, eps1_encoding(e1)], axis=1)
    weights = rng.random(n)

    def loss_parts(keep=False):
        r1 = marg.forward(pos, static, keep=keep)
        r2 = cond.forward(pos, static_c, keep=keep)
        a = DiscretePdf1D.from_logits(r1, mode, WRAP).interp_weights(e1)
        b = DiscretePdf1D.from_logits(r2, mode, CLAMP).interp_weights(e2)
        l1, g1 = weighted_log_density_loss(r1, *a, weights)
        l2, g2 = weighted_log_density_loss(r2, *b, weights)
        return l1 + l2, g1, g2

    _, g1, g2 = loss_parts(keep=True)
    grads = marg.backward(g1) + cond.backward(g2)
    params = marg.params + cond.params
    for k, idx in probe_indices(rng, params, 120):
        fd = central_difference(lambda: loss_parts()[0], params[k], idx)
        assert rel_err(grads[k][idx], fd, floor=1e-7) < 1e-4


def test_relative_l2_examples():
    loss, grad = relative_l2_loss(np.ones((3, 3)), np.ones((3, 3)))
    assert loss == 0.0 and np.all(grad == 0)
    loss, grad = relative_l2_loss(np.zeros((2, 3)), np.zeros((2, 3)))
    assert loss == 0.0 and np.all(grad == 0)
    # pred = 2 in every channel, so lum(pred) = 2 and each channel costs 1 / 4.01
    loss, _ = relative_l2_loss(np.full((1, 3), 2.0), np.ones((1, 3)), 0.01)
    assert loss == pytest.approx(1.0 / 4.01, rel=1e-12)


def test_relative_l2_head_gradient_through_network():
    rng = np.random.default_rng(12)
    net = GridMlp(static_width(False), 3, hidden=(16, 16, 16), rng=rng, dtype=F64, output_scale=1.0)
    for p in net.grid.params:
        p[...] = rng.uniform(-0.5, 0.5, size=p.shape)
    n = 10
    pos = rng.random((n, 3))
    wo = rng.normal(size=(n, 3))
    wo /= np.linalg.norm(wo, axis=1, keepdims=True)
    static = encode_static(wo, wo, rng.random(n), dtype=F64)
    target = rng.random((n, 3)) * 2
    pred0 = net.forward(pos, static, keep=True)
    _, g = relative_l2_loss(pred0, target)
    grads = net.backward(g)
    # the denominator is a stop-gradient: freeze it at the evaluation point
    denom = luminance(pred0)[:, None] ** 2 + 0.01

    def loss():
        return float(np.mean((net.forward(pos, static) - target) ** 2 / denom))

    for k, idx in probe_indices(rng, net.params, 100):
        assert rel_err(grads[k][idx], central_difference(loss, net.params[k], idx), floor=1e-7) < 1e-4


# --- Adam -----------------------------------------------------------------------------


def test_adam_first_step():
    p = [np.zeros(5)]
    st = AdamState.for_params(p, lr=1e-2)
    adam_step(p, [np.ones(5)], st)
    np.testing.assert_allclose(p[0], -1e-2 / (1 + 1e-8), rtol=1e-12)


def test_adam_zero_gradient_leaves_params():
    p = [np.arange(4.0)]
    st = AdamState.for_params(p)
    adam_step(p, [np.zeros(4)], st)
    np.testing.assert_array_equal(p[0], np.arange(4.0))
    assert st.step == 1


def test_adam_zero_gradient_decays_moments():
    p = [np.arange(4.0)]
    st = AdamState.for_params(p)
    st.m[0][...] = 0.5
    st.v[0][...] = 0.25
    adam_step(p, [np.zeros(4)], st)
    np.testing.assert_allclose(st.m[0], 0.45)
    np.testing.assert_allclose(st.v[0], 0.24975)


def test_adam_two_steps_match_recurrence():
    # [DERIVED] scalar recurrence with g = 0.5 on both steps, lr = 0.1
    b1, b2, eps, lr, g = 0.9, 0.999, 1e-8, 0.1, 0.5
    x, m, v = 1.0, 0.0, 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    p = [np.array([1.0])]
    st = AdamState.for_params(p, lr=lr)
    adam_step(p, [np.array([g])], st)
    adam_step(p, [np.array([g])], st)
    assert p[0][0] == pytest.approx(x, rel=1e-14)
    assert x == pytest.approx(0.8, abs=1e-8)


def test_adam_shape_mismatch():
    p = [np.zeros(3)]
    with pytest.raises(ValueError):
        adam_step(p, [np.zeros(4)], AdamState.for_params(p))


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_dense_grid_backends_agree_bitwise(dtype):
    pytest.importorskip("dfguide._kernels")
    rng = np.random.default_rng(31)
    p01 = rng.random((500, 3))
    p01[:5] = [[0, 0, 0], [1, 1, 1], [0.5, 0.5, 0.5], [1, 0, 1], [0.999999, 0.0, 0.25]]
    grad_out = rng.normal(size=(500, 6)).astype(dtype)
    outs, grads = [], []
    for backend in ("cython", "python"):
        grid = DenseGrid((8, 16, 32), 2, rng=np.random.default_rng(32), dtype=dtype)
        grid.backend = backend
        outs.append(grid.forward(p01))
        grads.append(grid.backward(grad_out))
    np.testing.assert_array_equal(outs[0], outs[1])
    for a, b in zip(*grads):
        np.testing.assert_array_equal(a, b)
