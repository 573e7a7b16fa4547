import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imethod_lab.spectral import (
    AdmissiblePair, Field, Grid, MultiplierSpec, Spectrum, apply_multiplier, evaluate_multiplier,
    field_from_bytes, field_to_bytes, gradient, i_symbol, inverse_transform, is_admissible,
    l2_norm_spectral, lebesgue_norm, lp_bump, make_grid, resize_spectrum, sobolev_seminorm,
    spacetime_norm, spectrum_from_bytes, spectrum_to_bytes, symbol_on_grid, time_norm,
    transform, z_norm,
)
from imethod_lab.initial_data import planewave, random_field
from imethod_lab.solver import Trajectory


def test_grid_frequencies_integer_on_2pi_box():
    g = make_grid(1, 16, 2 * np.pi)
    assert sorted(g.frequencies().round().astype(int)) == list(range(-8, 8))
    g3 = make_grid(3, 8, 2 * np.pi)
    assert np.prod(g3.shape) == 512
    assert g3.frequencies().min() == -4 and g3.frequencies().max() == 3


@pytest.mark.parametrize("dim,modes,length", [(4, 8, 1.0), (1, 7, 1.0), (1, 2, 1.0), (1, 8, 0.0), (2, 8, -1)])
def test_grid_rejects_bad_parameters(dim, modes, length):
    with pytest.raises(ValueError):
        make_grid(dim, modes, length)


def test_field_shape_checked():
    g = make_grid(2, 8, 1.0)
    with pytest.raises(ValueError):
        Field(g, np.zeros(8))


@pytest.mark.parametrize("dim,modes", [(1, 32), (2, 16), (3, 8)])
def test_plancherel_and_roundtrip(dim, modes):
    g = make_grid(dim, modes, 3.0)
    rng = np.random.default_rng(dim)
    f = random_field(g, rng)
    sp = transform(f)
    assert lebesgue_norm(f, 2) == pytest.approx(l2_norm_spectral(sp), rel=1e-12)
    back = inverse_transform(sp)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * np.max(np.abs(f.values))


def test_constant_field_norm():
    g = make_grid(1, 16, 2 * np.pi)
    f = Field(g, np.full(g.shape, 3.0 + 0j))
    assert lebesgue_norm(f, 2) == pytest.approx(3.0 * math.sqrt(2 * math.pi), rel=1e-14)
    # the whole mass sits on the zero mode
    sp = transform(f)
    assert np.count_nonzero(np.abs(sp.coeffs) > 1e-12) == 1


def test_planewave_spectrum_single_mode():
    g = make_grid(1, 16, 2 * np.pi)
    sp = transform(planewave(g, 3, 2.0))
    nz = np.nonzero(np.abs(sp.coeffs) > 1e-10)[0]
    assert list(g.integer_modes()[nz]) == [3]


def test_resize_roundtrip_and_truncation():
    g = make_grid(2, 8, 1.0)
    sp = transform(random_field(g, np.random.default_rng(0)))
    up = resize_spectrum(sp, 16)
    assert l2_norm_spectral(up) == pytest.approx(l2_norm_spectral(sp), rel=1e-14)
    assert np.allclose(resize_spectrum(up, 8).coeffs, sp.coeffs, atol=0)
    down = resize_spectrum(sp, 4)
    assert l2_norm_spectral(down) < l2_norm_spectral(sp)


def test_lp_bump_shape():
    assert lp_bump(0.0) == 1.0 and lp_bump(1.0) == 1.0 and lp_bump(2.0) == 0.0
    r = np.linspace(1, 2, 101)
    v = lp_bump(r)
    assert np.all(np.diff(v) <= 0)
    # C^1 at the ends: one-sided difference quotients vanish
    h = 1e-6
    assert abs(lp_bump(1 + h) - 1) / h < 1e-9
    assert abs(lp_bump(2 - h)) / h < 1e-9


def test_littlewood_paley_partition():
    spec_lo = MultiplierSpec("lp_below", N=4.0)
    spec_hi = MultiplierSpec("lp_above", N=4.0)
    r = np.linspace(0, 20, 301)
    assert np.allclose(evaluate_multiplier(spec_lo, r) + evaluate_multiplier(spec_hi, r), 1.0)
    # dyadic bands telescope: P_{<=1} + sum_{N=2..16} P_N = P_{<=16}
    total = evaluate_multiplier(MultiplierSpec("lp_below", N=1.0), r)
    for N in (2.0, 4.0, 8.0, 16.0):
        total = total + evaluate_multiplier(MultiplierSpec("lp_band", N=N), r)
    assert np.allclose(total, evaluate_multiplier(MultiplierSpec("lp_below", N=16.0), r))


@pytest.mark.parametrize("transition", ["power", "smooth"])
def test_i_symbol_properties(transition):
    N, s = 8.0, 0.6
    assert i_symbol(0.0, N, s, transition) == 1.0
    assert i_symbol(N, N, s, transition) == 1.0
    r = np.linspace(0, 100, 2001)
    m = i_symbol(r, N, s, transition)
    assert np.all(np.diff(m) <= 1e-15)
    far = np.array([2 * N, 5 * N, 40 * N])
    assert np.allclose(i_symbol(far, N, s, transition), (N / far) ** (1 - s))


def test_i_symbol_identity_at_s1():
    r = np.linspace(0, 50, 11)
    assert np.allclose(i_symbol(r, 4.0, 1.0), 1.0)


def test_multiplier_spec_validation():
    with pytest.raises(ValueError):
        MultiplierSpec("I", N=4.0, s=0.3)
    with pytest.raises(ValueError):
        MultiplierSpec("nope")
    with pytest.raises(ValueError):
        MultiplierSpec("lp_below", N=0.0)
    g = make_grid(1, 8, 2 * np.pi)
    with pytest.raises(ZeroDivisionError):
        symbol_on_grid(MultiplierSpec("derivative", order=1, sign=-1), g)
    v = symbol_on_grid(MultiplierSpec("derivative", order=1, sign=-1), g, drop_zero=True)
    assert v[0] == 0.0


def test_gradient_matches_sobolev():
    g = make_grid(2, 16, 2.0)
    sp = transform(random_field(g, np.random.default_rng(3)))
    comps = np.stack([inverse_transform(c).values for c in gradient(sp)])
    assert lebesgue_norm(comps, 2, g) == pytest.approx(sobolev_seminorm(sp, 1), rel=1e-12)


def test_lebesgue_norm_infinity_and_validation():
    g = make_grid(1, 8, 1.0)
    f = Field(g, np.arange(8) * 1j)
    assert lebesgue_norm(f, math.inf) == 7.0
    with pytest.raises(ValueError):
        lebesgue_norm(f, 0.5)


def test_time_norm_cases():
    t = [0.0, 1.0, 2.0]
    assert time_norm(t, [1.0, 3.0, 2.0], math.inf) == 3.0
    assert time_norm([0.0], [5.0], 2) == 0.0
    assert time_norm(t, [1.0, 1.0, 1.0], 2) == pytest.approx(math.sqrt(2.0))
    with pytest.raises(ValueError):
        time_norm([], [], 2)


def test_spacetime_norm_requires_increasing_times():
    g = make_grid(1, 8, 1.0)
    f = Field(g, np.ones(8))
    with pytest.raises(ValueError):
        Trajectory((0.0, 0.0), (f, f))


@pytest.mark.parametrize("q,r,ok", [
    (math.inf, 2, True), (2, 6, True), (4, 3, True), (8, Fraction(12, 5), True), (8, 2.4, True),
    (2, 2, False), (4, 4, False), (1, 6, False), (math.inf, 3, False),
])
def test_admissibility(q, r, ok):
    assert is_admissible(q, r) is ok


def test_admissible_pair_rejects():
    with pytest.raises(ValueError):
        AdmissiblePair(3, 3)


def test_z_norm_dominates_each_pair():
    g = make_grid(1, 16, 2 * np.pi)
    f = planewave(g, 2, 0.5)
    traj = Trajectory((0.0, 0.5), (f, f))
    z = z_norm(traj, 4.0, 0.7)
    for q, r in [(math.inf, 2), (4, 3)]:
        assert z >= z_norm(traj, 4.0, 0.7, [(q, r)])
    with pytest.raises(ValueError):
        z_norm(traj, 4.0, 0.7, [])


def test_binary_roundtrip_and_truncation():
    g = make_grid(2, 8, 2.5)
    f = random_field(g, np.random.default_rng(1))
    buf = field_to_bytes(f)
    assert len(buf) == 24 + 16 * 64
    back, end = field_from_bytes(buf)
    assert end == len(buf) and np.array_equal(back.values, f.values) and back.grid == g
    sp = transform(f)
    sb, _ = spectrum_from_bytes(spectrum_to_bytes(sp))
    assert np.array_equal(sb.coeffs, sp.coeffs)
    with pytest.raises(ValueError):
        field_from_bytes(buf[:-1])
    with pytest.raises(ValueError):
        field_from_bytes(buf[:10])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.sampled_from([4, 8, 16]), st.floats(0.5, 20.0), st.integers(0, 2**31))
def test_plancherel_property(dim, modes, length, seed):
    g = make_grid(dim, modes, length)
    f = random_field(g, np.random.default_rng(seed))
    sp = transform(f)
    assert lebesgue_norm(f, 2) == pytest.approx(l2_norm_spectral(sp), rel=1e-12)
    assert np.allclose(inverse_transform(sp).values, f.values, rtol=0, atol=1e-12 * np.abs(f.values).max())


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 30.0), st.floats(0.5, 1.0))
def test_multiplier_linear(N, s):
    g = make_grid(1, 16, 2 * np.pi)
    rng = np.random.default_rng(0)
    a = transform(random_field(g, rng))
    b = transform(random_field(g, rng))
    spec = MultiplierSpec("I", N=N, s=s)
    lhs = apply_multiplier(Spectrum(g, 2 * a.coeffs + b.coeffs), spec).coeffs
    rhs = 2 * apply_multiplier(a, spec).coeffs + apply_multiplier(b, spec).coeffs
    assert np.allclose(lhs, rhs)
