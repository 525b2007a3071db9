import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mforge.bernoulli import analytic_tau
from mforge.construct import build_measure, build_schedule
from mforge.dyadic import DyadicCube
from mforge.legendre import SpectrumFunction
from mforge.wavelet import (
    WaveletSeries,
    bridge_tau,
    brute_force_leader,
    evaluate,
    holder_profile,
    leader_tau,
    leaders,
    measure_log2_table,
    mother_wavelet,
    synth_from_spectrum,
    tail_bound,
    theta,
)
from cases import TINY
from oracles import brute_force_measure, group_to_generation, pl_eval

Q = np.round(np.linspace(-3, 3, 25), 10)


def cascade_log2_mu(p, n_max):
    """Binomial cascade masses, generation by generation."""
    out = []
    for n in range(n_max + 1):
        k = np.array([bin(i).count("1") for i in range(1 << n)], dtype=float)
        out.append(k * math.log2(p) + (n - k) * math.log2(1 - p))
    return out


def random_coefficients(rng, n_max, density=0.6):
    out = []
    for n in range(n_max + 1):
        a = -n * rng.uniform(0.2, 1.5, 1 << n) + rng.normal(0, 1, 1 << n)
        a[rng.random(1 << n) > density] = -np.inf
        out.append(a)
    return out


def window_sup(lam, n, k):
    """Leader by explicit interval arithmetic on endpoints (independent of index shifting)."""
    lo, hi = (k - 1) / 2**n, (k + 2) / 2**n
    best = -math.inf
    for g, a in enumerate(lam):
        if g < n:
            continue
        for i, v in enumerate(a):
            if lo <= i / 2**g and (i + 1) / 2**g <= hi:
                best = max(best, float(v))
    return best


# --- mother wavelet ----------------------------------------------------------


def test_mother_wavelet_shape():
    assert mother_wavelet(0.25) == 1.0 and mother_wavelet(0.75) == -1.0
    for t in (0.0, 0.5, 1.0, -0.3, 1.7):
        assert mother_wavelet(t) == 0.0
    t = np.linspace(-1, 2, 3001)
    v = mother_wavelet(t)
    assert np.max(np.abs(v)) == 1.0
    assert np.all(v[(t < 0) | (t > 1)] == 0)
    # zero mean
    assert abs(np.trapezoid(v, t)) < 1e-12


# --- leaders -----------------------------------------------------------------


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_leaders_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    s = WaveletSeries.from_coefficients(random_coefficients(rng, 10))
    tab = leaders(s)
    for n in range(tab.n_max + 1):
        for k in range(1 << n):
            assert tab.log2_leader[n][k] == brute_force_leader(s, n, k)
    for n in (0, 3, 7):
        for k in range(1 << n):
            assert tab.log2_leader[n][k] == window_sup(s.log2_lambda, n, k)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_leaders_dominate_and_decrease(seed):
    rng = np.random.default_rng(seed)
    s = WaveletSeries.from_coefficients(random_coefficients(rng, 8, density=0.4))
    tab = leaders(s)
    for n in range(tab.n_max + 1):
        lam = s.log2_lambda[n]
        assert np.all(tab.log2_leader[n] >= lam)
        if n:
            parent = np.repeat(tab.log2_leader[n - 1], 2)
            assert np.all(parent >= tab.log2_leader[n])


def test_single_coefficient_leaders():
    n_max, n0, k0 = 7, 5, 13
    lam = [np.full(1 << n, -np.inf) for n in range(n_max + 1)]
    lam[n0][k0] = -3.0
    tab = leaders(WaveletSeries.from_coefficients(lam))
    for n in range(n_max + 1):
        nz = set(np.flatnonzero(np.isfinite(tab.log2_leader[n])).tolist())
        if n > n0:
            assert nz == set()
        else:
            anc = k0 >> (n0 - n)
            assert nz == {j for j in (anc - 1, anc, anc + 1) if 0 <= j < (1 << n)}
            assert all(tab.log2_leader[n][j] == -3.0 for j in nz)


@pytest.mark.parametrize("h", [0.3, 0.8, 1.7])
def test_monofractal_leader_tau(h):
    lam = [np.full(1 << n, -n * h) for n in range(11)]
    lt = leader_tau(leaders(WaveletSeries.from_coefficients(lam)), Q)
    for n in lt.gens:
        assert np.allclose(lt.row(n), h * Q - 1, atol=1e-12)
    assert np.allclose(lt.as_lq().tau, h * Q - 1, atol=1e-12)
    hp = holder_profile(leaders(WaveletSeries.from_coefficients(lam)), 0.37)
    assert np.allclose(hp.exponents, h) and hp.tail_min == pytest.approx(h)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_leader_tau_scaling(seed, c):
    rng = np.random.default_rng(seed)
    s = WaveletSeries.from_coefficients(random_coefficients(rng, 8, density=1.0))
    a = leader_tau(leaders(s), Q)
    b = leader_tau(leaders(s.scaled(c)), Q)
    for n in a.gens:
        assert np.allclose(b.row(n), a.row(n) - Q * math.log2(c) / n, atol=1e-9)
    assert abs(b.row(8)[0] - a.row(8)[0]) <= 3 * abs(math.log2(c)) / 8 + 1e-9


def test_leader_tau_needs_depth():
    s = WaveletSeries.from_coefficients([np.array([0.0])])
    with pytest.raises(ValueError):
        leader_tau(leaders(s), Q)
    with pytest.raises(ValueError):
        WaveletSeries.from_coefficients([np.array([0.0]), np.zeros(3)])


# --- measure-driven series ---------------------------------------------------


def test_measure_table_matches_enumeration():
    mu = build_measure(build_schedule(**TINY["single"]))
    cubes, _ = brute_force_measure(mu)
    n_full = int(mu.n[-1])
    n_max = 12
    got = measure_log2_table(mu, n_max)
    for n in range(n_max + 1):
        ref = group_to_generation(cubes, n_full, n)
        want = np.full(1 << n, -np.inf)
        for (k,), v in ref.items():
            want[k] = v
        fin = np.isfinite(want)
        assert np.array_equal(fin, np.isfinite(got[n]))
        assert np.max(np.abs(got[n][fin] - want[fin])) <= 1e-9


def test_bridge_on_cascade():
    g1, g2, p = 0.3, 0.8, 0.25
    s = WaveletSeries.from_log2_mu(cascade_log2_mu(p, 12), g1, g2)
    tab = leaders(s)
    br = bridge_tau(s, tab, Q)
    ref = analytic_tau(p, 1, g2 * Q).tau + g1 * Q
    for n in range(1, 13):
        assert np.allclose(br.predicted[n - 1], ref, atol=1e-9)
    lt = leader_tau(tab, Q)
    excess = np.abs(lt.rows - br.predicted) - br.bound()
    assert np.max(excess) <= 1e-12
    assert not br.extra.any()


def test_series_validation():
    mu = cascade_log2_mu(0.3, 4)
    with pytest.raises(ValueError):
        WaveletSeries.from_log2_mu(mu, -0.1, 1.0)
    with pytest.raises(ValueError):
        WaveletSeries.from_log2_mu(mu, 0.1, 0.0)
    # a point mass has Holder floor 0
    dirac = [np.where(np.arange(1 << n) == 0, 0.0, -np.inf) for n in range(5)]
    with pytest.raises(ValueError):
        WaveletSeries.from_log2_mu(dirac, 0.0, 1.0)
    assert WaveletSeries.from_log2_mu(dirac, 0.5, 1.0).holder_floor() == pytest.approx(0.5)
    table = {DyadicCube(1, 1, (0,)): 0.5, DyadicCube(1, 1, (1,)): 0.5, DyadicCube(1, 0, (0,)): 1.0}
    s = WaveletSeries.from_table(table, 0.0, 1.0, log2=False)
    assert np.allclose(s.log2_mu[1], [-1, -1])
    with pytest.raises(ValueError):
        WaveletSeries.from_table({}, 0.0, 1.0)


def test_holder_profile_point_and_interval_agree():
    s = WaveletSeries.from_log2_mu(cascade_log2_mu(0.3, 10), 0.2, 1.0)
    tab = leaders(s)
    x = 0.61803
    cube = DyadicCube(1, 12, (int(x * 2**12),))
    a, b = holder_profile(tab, x), holder_profile(tab, cube)
    assert np.array_equal(a.exponents, b.exponents)
    with pytest.raises(ValueError):
        holder_profile(tab, 1.5)
    with pytest.raises(ValueError):
        holder_profile(tab, DyadicCube(1, 3, (1,)))


# --- synthesis ---------------------------------------------------------------


def test_theta_and_scale_recipe():
    f = SpectrumFunction.from_knots([(0.5, 0.4), (1.0, 0.9), (2.0, 0.5)])
    # sup f(h)/h over the knots: 0.8, 0.9, 0.25
    assert theta(f, 1.0) == pytest.approx(0.9)
    r = synth_from_spectrum(f)
    assert r.case == "scale"
    assert r.lam0 == pytest.approx(0.9, rel=1e-12)
    assert r.gamma1 == 0.0 and r.gamma2 == pytest.approx(1 / 0.9)
    assert r.theta_at_lam0 == pytest.approx(1.0, abs=1e-10)
    h = np.linspace(0.5, 2.0, 31)
    assert np.allclose(r.f_tilde(r.lam0 * h), pl_eval([(0.5, 0.4), (1.0, 0.9), (2.0, 0.5)], h))
    # the rescaled target never exceeds the diagonal
    assert np.all(r.f_tilde(r.lam0 * h) <= r.lam0 * h + 1e-12)
    assert r.exponent_of(r.lam0 * 1.3) == pytest.approx(1.3)


def test_theta_ratio_peak_at_left_end():
    f = SpectrumFunction.from_knots([(0.5, 0.4), (1.5, 0.6)])
    assert synth_from_spectrum(f).lam0 == pytest.approx(0.8, rel=1e-12)


def test_shift_recipe_for_zero_spectrum():
    f = SpectrumFunction.from_knots([(0.5, 0.0), (1.5, 0.0)])
    r = synth_from_spectrum(f)
    assert r.case == "shift"
    assert (r.gamma1, r.gamma2, r.shift) == (0.5, 1.0, 0.5)
    assert r.f_tilde.dom_min == pytest.approx(0.0) and r.f_tilde.dom_max == pytest.approx(1.0)


def test_synth_rejects_bad_targets():
    with pytest.raises(ValueError):
        synth_from_spectrum(SpectrumFunction.from_knots([(0.0, 0.0), (1.0, 0.5)]))
    with pytest.raises(ValueError):
        synth_from_spectrum(SpectrumFunction.from_knots([(1.0, 1.0), (3.0, 1.5)]))
    with pytest.raises(ValueError):
        synth_from_spectrum(SpectrumFunction.from_knots([(1.0, 1.0), (2.0, 1.0)], d=2))


# --- rendering ---------------------------------------------------------------


def test_evaluate_single_coefficient():
    n_max, n0, k0 = 6, 4, 9
    lam = [np.full(1 << n, -np.inf) for n in range(n_max + 1)]
    lam[n0][k0] = -2.0
    s = WaveletSeries.from_coefficients(lam)
    x = np.linspace(0, 1, 2049)
    ref = 0.25 * mother_wavelet(2**n0 * x - k0)
    assert np.max(np.abs(evaluate(s, x) - ref)) <= 1e-15
    with pytest.raises(ValueError):
        evaluate(s, [1.2])


def test_evaluate_matches_direct_sum():
    rng = np.random.default_rng(5)
    lam = random_coefficients(rng, 7)
    s = WaveletSeries.from_coefficients(lam)
    x = rng.random(200)
    ref = np.zeros_like(x)
    for n, a in enumerate(lam):
        for k, v in enumerate(a):
            if np.isfinite(v):
                ref += 2.0**v * mother_wavelet(2**n * x - k)
    assert np.max(np.abs(evaluate(s, x) - ref)) <= 1e-12


def test_tail_bound_controls_truncation():
    deep = WaveletSeries.from_log2_mu(cascade_log2_mu(0.3, 14), 0.4, 1.0)
    x = np.linspace(0, 1, 4097)
    full = evaluate(deep, x)
    for n_max in (6, 9):
        short = WaveletSeries.from_log2_mu(cascade_log2_mu(0.3, n_max), 0.4, 1.0)
        assert np.max(np.abs(full - evaluate(short, x))) <= tail_bound(short)


@pytest.mark.parametrize(
    "f,lam0",
    [
        (SpectrumFunction.tent(0.5, 1.0, 1.5), 1.0),
        (SpectrumFunction.point(0.6, 0.6), 1.0),
    ],
)
def test_scale_recipe_frozen(f, lam0):
    r = synth_from_spectrum(f)
    assert r.case == "scale"
    assert r.lam0 == pytest.approx(lam0, rel=1e-12)
    assert r.theta_at_lam0 == pytest.approx(1.0, abs=1e-10)


def test_shift_recipe_on_zero_point():
    r = synth_from_spectrum(SpectrumFunction.point(0.6, 0.0))
    assert r.case == "shift" and r.gamma1 == 0.6 and r.gamma2 == 1.0
    assert r.f_tilde.points == ((0.0, 0.0),)


def test_zero_series_is_zero_function():
    lam = [np.full(1 << n, -np.inf) for n in range(6)]
    assert np.all(evaluate(WaveletSeries.from_coefficients(lam), np.linspace(0, 1, 101)) == 0.0)


def test_holder_profile_along_sampled_points():
    from mforge.construct import sample

    mu = build_measure(build_schedule(SpectrumFunction.point(0.7, 0.7), m_max=2, preset="desk-small"))
    g1, g2 = 0.2, 1.0
    n_max = 16
    s = WaveletSeries.from_measure(mu, g1, g2, n_max)
    tab = leaders(s)
    for smp in sample(mu, 11, 8, members=True):
        hp = holder_profile(tab, smp.cube)
        idx = [smp.cube.k[0] >> (smp.cube.n - int(n)) for n in hp.gens]
        own = np.array([g1 + g2 * -s.log2_mu[n][k] / n for n, k in zip(hp.gens, idx)])
        # the leader dominates the interval's own coefficient
        assert np.all(hp.exponents <= own + 1e-12)
        assert hp.tail_min == pytest.approx(float(np.min(hp.exponents[n_max // 2 - 1:])))
