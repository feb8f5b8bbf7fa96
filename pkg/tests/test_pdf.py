import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfguide.pdf import (
    CLAMP,
    FLOOR_SCALE,
    FOUR_PI,
    LINEAR,
    NEAREST,
    WRAP,
    DiscretePdf1D,
    eval_linear,
    eval_nearest,
    joint_grid,
    logits_to_values,
    pdf_solid_angle_to_square,
    pdf_square_to_solid_angle,
    product_eval,
    product_sample,
    sphere_to_square,
    square_to_sphere,
)

COMBOS = [(NEAREST, CLAMP), (NEAREST, WRAP), (LINEAR, CLAMP), (LINEAR, WRAP)]


def reference_linear(v, eps, boundary):
    """Loop-based tent interpolation written straight from the definition."""
    m = len(v)
    out = []
    for e in np.atleast_1d(eps):
        x = e * m - 0.5
        i = int(np.floor(x))
        a = x - i
        if boundary == WRAP:
            out.append((1 - a) * v[i % m] + a * v[(i + 1) % m])
        elif x < 0:
            out.append(v[0])
        elif x >= m - 1:
            out.append(v[-1])
        else:
            out.append((1 - a) * v[i] + a * v[i + 1])
    return np.array(out)


def midpoint_quadrature(f, m, per_half_bin=2000):
    # nodes aligned to half-bins so no cell straddles a knot
    n = 2 * m * per_half_bin
    x = (np.arange(n) + 0.5) / n
    return float(np.mean(f(x)))


# --- construction ---------------------------------------------------------------


def test_zero_logits_give_uniform_values():
    v = logits_to_values(np.zeros(32))
    np.testing.assert_allclose(v, 1.0, atol=1e-12)


def test_softmax_example():
    v = logits_to_values(np.array([np.log(2.0), 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(v, [1.6, 0.8, 0.8, 0.8], atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-60, 60), min_size=2, max_size=64))
def test_values_sum_to_m_and_respect_floor(raw):
    v = logits_to_values(np.array(raw))
    m = len(raw)
    assert abs(v.sum() - m) < 1e-4
    assert np.all(v >= FLOOR_SCALE * m * (1 - 1e-9))


def test_non_finite_logits_rejected():
    with pytest.raises(ValueError):
        logits_to_values(np.array([0.0, np.nan, 1.0]))


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        DiscretePdf1D(np.ones(4), "cubic", CLAMP)


# --- evaluation -------------------------------------------------------------------


def test_nearest_examples():
    v = np.array([2.0, 1.0, 0.5, 0.5])
    assert eval_nearest(v, 0.3) == 1.0
    np.testing.assert_array_equal(eval_nearest(np.ones(7), np.linspace(0, 1, 11)), 1.0)


def test_linear_examples():
    v = np.array([1.5, 0.5])
    assert eval_linear(v, 0.25, CLAMP) == pytest.approx(1.5)
    assert eval_linear(v, 0.5, CLAMP) == pytest.approx(1.0)
    assert eval_linear(v, 0.1, CLAMP) == pytest.approx(1.5)
    # wrap: halfway between the last and first centers
    assert eval_linear(v, 0.0, WRAP) == pytest.approx(1.0)


def test_linear_wrap_edge_value():
    # [DERIVED] v=[1.6,.8,.8,.8] at eps=0.05: x=-0.3 blends v[3] (0.3) and v[0] (0.7)
    v = np.array([1.6, 0.8, 0.8, 0.8])
    assert eval_linear(v, 0.05, WRAP) == pytest.approx(1.36)
    assert eval_linear(v, 0.05, CLAMP) == pytest.approx(1.6)


@pytest.mark.parametrize("boundary", [WRAP, CLAMP])
def test_linear_matches_reference(boundary):
    rng = np.random.default_rng(3)
    v = logits_to_values(rng.normal(size=9))
    eps = rng.random(2000)
    np.testing.assert_allclose(eval_linear(v, eps, boundary), reference_linear(v, eps, boundary), atol=1e-12)


@pytest.mark.parametrize("mode,boundary", COMBOS)
def test_quadrature_normalization(mode, boundary):
    rng = np.random.default_rng(11)
    for _ in range(20):
        p = DiscretePdf1D.from_logits(rng.normal(scale=3.0, size=rng.integers(2, 65)), mode, boundary)
        assert abs(midpoint_quadrature(p.eval, p.size) - 1.0) < 1e-4


@pytest.mark.parametrize("boundary", [WRAP, CLAMP])
def test_linear_continuity_at_junctions(boundary):
    rng = np.random.default_rng(5)
    m = 16
    p = DiscretePdf1D.from_logits(rng.normal(size=m), LINEAR, boundary)
    joints = np.concatenate([(np.arange(m) + 0.5) / m, np.arange(1, m) / m])
    h = 1e-10
    left = p.eval(joints - h)
    right = p.eval(joints + h)
    assert np.max(np.abs(left - right)) < 1e-6


def test_wrap_periodicity():
    rng = np.random.default_rng(6)
    p = DiscretePdf1D.from_logits(rng.normal(size=32), LINEAR, WRAP)
    _, values = p.knots()
    assert values[0] == values[-1]
    assert p.eval(0.0) == values[0]
    # the left limit at 1 agrees up to the rounding of the tent weights
    assert abs(p.eval(0.0) - p.eval(np.nextafter(1.0, 0.0))) < 1e-12


def test_batched_values_evaluate_per_row():
    rng = np.random.default_rng(7)
    raw = rng.normal(size=(5, 8))
    eps = rng.random(5)
    batched = DiscretePdf1D.from_logits(raw, LINEAR, WRAP).eval(eps)
    rows = [DiscretePdf1D.from_logits(raw[i], LINEAR, WRAP).eval(eps[i:i + 1])[0] for i in range(5)]
    np.testing.assert_allclose(batched, rows, rtol=1e-12)


def test_interp_weights_reproduce_eval():
    rng = np.random.default_rng(8)
    for mode, boundary in COMBOS:
        p = DiscretePdf1D.from_logits(rng.normal(size=(100, 12)), mode, boundary)
        eps = rng.random(100)
        i0, i1, w0, w1 = p.interp_weights(eps)
        rows = np.arange(100)
        np.testing.assert_allclose(w0 * p.v[rows, i0] + w1 * p.v[rows, i1], p.eval(eps), rtol=1e-12)


# --- sampling ---------------------------------------------------------------------


def test_nearest_sample_example():
    p = DiscretePdf1D(np.array([2.0, 1.0, 0.5, 0.5]), NEAREST, CLAMP)
    eps, pdf = p.sample(np.array([0.6]))
    assert eps[0] == pytest.approx(0.35, abs=1e-12)
    assert pdf[0] == pytest.approx(1.0)


@pytest.mark.parametrize("mode", [NEAREST, LINEAR])
def test_uniform_sampling_is_identity(mode):
    p = DiscretePdf1D(np.ones(8), mode, CLAMP)
    eps, pdf = p.sample(np.array([0.37]))
    assert eps[0] == pytest.approx(0.37, abs=1e-12)
    assert pdf[0] == pytest.approx(1.0)


@pytest.mark.parametrize("mode,boundary", COMBOS)
def test_sample_pdf_matches_eval(mode, boundary):
    rng = np.random.default_rng(9)
    p = DiscretePdf1D.from_logits(rng.normal(scale=2.0, size=16), mode, boundary)
    eps, pdf = p.sample(rng.random(10_000))
    assert np.all((eps >= 0) & (eps < 1))
    np.testing.assert_allclose(pdf, p.eval(eps), rtol=1e-9)


@pytest.mark.parametrize("mode,boundary", COMBOS)
def test_round_trip_against_quadrature_cdf(mode, boundary):
    rng = np.random.default_rng(10)
    p = DiscretePdf1D.from_logits(rng.normal(scale=2.0, size=16), mode, boundary)
    # cumulative midpoint quadrature of eval as an independent cdf
    n = 400_000
    grid = (np.arange(n) + 0.5) / n
    cdf_grid = np.concatenate([[0.0], np.cumsum(p.eval(grid)) / n])
    u = rng.random(20_000)
    eps, _ = p.sample(u)
    oracle = np.interp(eps, np.linspace(0, 1, n + 1), cdf_grid)
    assert np.max(np.abs(oracle - u)) < 1e-5


def test_extreme_logits_sample_stably():
    raw = np.full(32, -50.0)
    raw[7] = 50.0
    for mode, boundary in COMBOS:
        p = DiscretePdf1D.from_logits(raw, mode, boundary)
        u = np.concatenate([np.linspace(0, 1, 1001), [np.nextafter(1.0, 0.0)]])
        eps, pdf = p.sample(u)
        assert np.all(np.isfinite(eps)) and np.all(pdf > 0)
        assert np.all(np.diff(eps) >= 0)
        np.testing.assert_allclose(p.cdf(eps), np.clip(u, 0, np.nextafter(1.0, 0.0)), atol=1e-6)


# --- warp -------------------------------------------------------------------------


def test_warp_poles_and_equator():
    np.testing.assert_allclose(square_to_sphere(0.0, 0.0), [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(square_to_sphere(0.25, 0.5), [0, 1, 0], atol=1e-15)


def test_warp_round_trip():
    rng = np.random.default_rng(12)
    e1, e2 = rng.random(10_000), rng.random(10_000)
    w = square_to_sphere(e1, e2)
    np.testing.assert_allclose(np.linalg.norm(w, axis=1), 1.0, atol=1e-12)
    b1, b2 = sphere_to_square(w)
    np.testing.assert_allclose(b1, e1, atol=1e-9)
    np.testing.assert_allclose(b2, e2, atol=1e-9)


def test_warp_octants_are_uniform():
    rng = np.random.default_rng(13)
    n = 1_000_000
    w = square_to_sphere(rng.random(n), rng.random(n))
    octant = (w[:, 0] > 0) * 4 + (w[:, 1] > 0) * 2 + (w[:, 2] > 0)
    frac = np.bincount(octant, minlength=8) / n
    sigma = np.sqrt(0.125 * 0.875 / n)
    assert np.all(np.abs(frac - 0.125) < max(3 * sigma, 0.002))


def test_jacobian_constants():
    assert pdf_square_to_solid_angle(1.0) == pytest.approx(0.0795775, abs=1e-7)
    assert pdf_square_to_solid_angle(FOUR_PI) == pytest.approx(1.0)
    assert pdf_solid_angle_to_square(1.0 / FOUR_PI) == pytest.approx(1.0)


# --- product ----------------------------------------------------------------------


def _conditional_family(rng, m2, mode):
    a, b = rng.normal(size=m2), rng.normal(size=m2)

    def at(eps1):
        eps1 = np.atleast_1d(eps1)
        raw = np.cos(2 * np.pi * eps1)[:, None] * a + np.sin(2 * np.pi * eps1)[:, None] * b
        return DiscretePdf1D.from_logits(raw if raw.shape[0] > 1 else raw[0], mode, CLAMP)

    return at


def test_uniform_product_sample_is_identity():
    m = DiscretePdf1D(np.ones(32), LINEAR, WRAP)
    s = product_sample(m, lambda e: DiscretePdf1D(np.ones((len(np.atleast_1d(e)), 16)), LINEAR, CLAMP),
                       np.array([0.3]), np.array([0.8]))
    assert s.eps1[0] == pytest.approx(0.3) and s.eps2[0] == pytest.approx(0.8) and s.pdf[0] == pytest.approx(1.0)


@pytest.mark.parametrize("mode", [NEAREST, LINEAR])
def test_product_integrates_to_one(mode):
    rng = np.random.default_rng(14)
    marginal = DiscretePdf1D.from_logits(rng.normal(size=32), mode, WRAP)
    cond_at = _conditional_family(rng, 16, mode)
    n = 128
    g = (np.arange(n) + 0.5) / n
    e1, e2 = np.repeat(g, n), np.tile(g, n)
    joint = product_eval(marginal, cond_at(e1), e1, e2)
    assert abs(joint.mean() - 1.0) < 1e-3


@pytest.mark.parametrize("mode", [NEAREST, LINEAR])
def test_product_sample_pdf_and_determinism(mode):
    rng = np.random.default_rng(15)
    marginal = DiscretePdf1D.from_logits(rng.normal(size=32), mode, WRAP)
    cond_at = _conditional_family(rng, 16, mode)
    u1, u2 = rng.random(5000), rng.random(5000)
    a = product_sample(marginal, cond_at, u1, u2)
    b = product_sample(marginal, cond_at, u1, u2)
    np.testing.assert_array_equal(a.eps1, b.eps1)
    np.testing.assert_array_equal(a.eps2, b.eps2)
    np.testing.assert_allclose(a.pdf, product_eval(marginal, cond_at(a.eps1), a.eps1, a.eps2), rtol=1e-9)


def test_solid_angle_density_integrates_to_one():
    rng = np.random.default_rng(16)
    marginal = DiscretePdf1D.from_logits(rng.normal(size=32), LINEAR, WRAP)
    cond_at = _conditional_family(rng, 16, LINEAR)
    n = 1_000_000
    w = rng.normal(size=(n, 3))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    e1, e2 = sphere_to_square(w)
    p = pdf_square_to_solid_angle(product_eval(marginal, cond_at(e1), e1, e2))
    assert abs(np.mean(p) * FOUR_PI - 1.0) < 0.005


def test_joint_grid_shape_and_mass():
    rng = np.random.default_rng(17)
    marginal = DiscretePdf1D.from_logits(rng.normal(size=32), NEAREST, WRAP)
    cond_at = _conditional_family(rng, 16, NEAREST)
    grid = joint_grid(marginal, cond_at, 32, 16)
    assert grid.shape == (32, 16)
    assert grid.mean() == pytest.approx(1.0, abs=1e-9)
