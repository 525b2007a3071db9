import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mforge.bernoulli import analytic_tau, log2sumexp2
from mforge.construct import build_measure, build_schedule, generation_table
from mforge.legendre import SpectrumFunction
from mforge.spectra import empirical_tau, exact_partition, ld_counts, tau_profile
from cases import F_PAIR, G_PAIR, TINY
from oracles import binary_entropy, brute_force_measure, group_to_generation

Q = np.round(np.linspace(-3, 3, 25), 10)


@pytest.fixture(scope="module", params=sorted(TINY))
def tiny(request):
    mu = build_measure(build_schedule(**TINY[request.param]))
    cubes, _ = brute_force_measure(mu)
    n_full = int(mu.n[-1])
    per_stage = {s: group_to_generation(cubes, n_full, int(mu.n[s])) for s in range(1, mu.num_stages + 1)}
    return request.param, mu, per_stage


@pytest.fixture(scope="module")
def small_pair():
    return build_measure(build_schedule(F_PAIR, G_PAIR, m_max=3, preset="desk-small"))


# --- partition function ------------------------------------------------------


def test_partition_matches_enumeration(tiny):
    _, mu, per_stage = tiny
    for s, table in per_stage.items():
        lm = np.array(list(table.values()))
        ref = np.array([float(log2sumexp2(q * lm)) for q in Q])
        got = exact_partition(mu, Q, s)
        assert np.max(np.abs(got - ref)) <= 1e-9


def test_partition_special_exponents(small_pair):
    mu = small_pair
    for s in (1, 7, mu.num_stages):
        assert exact_partition(mu, 1.0, s) == 0.0
        assert exact_partition(mu, 0.0, s) == pytest.approx(mu.log2_count(s), abs=1e-9)
    with pytest.raises(IndexError):
        exact_partition(mu, 2.0, mu.num_stages + 1)


def test_tau_profile_rows_are_scaling_functions(small_pair):
    mu = small_pair
    q = np.round(np.linspace(-3, 3, 61), 10)
    tp = tau_profile(mu, q)
    dq = q[1] - q[0]
    for s in range(1, mu.num_stages + 1):
        row = tp.row(s)
        assert row[q == 1.0][0] == 0.0
        t0 = row[q == 0.0][0]
        assert -mu.d - 1e-12 <= t0 <= 1e-12
        assert t0 == pytest.approx(-mu.log2_count(s) / mu.n[s], abs=1e-12)
        assert np.all(np.diff(row) >= -1e-12)
        # concavity: second differences are non-positive
        assert np.all(np.diff(row, 2) <= 1e-9 * dq)
        assert np.allclose(tp.as_lq(s).tau, row)
    assert [tuple(r) for r in tp.at_s_m] == [tuple(tp.row(s)) for s in mu.s_m]
    assert np.all(tp.lower <= tp.upper)


def test_monofractal_rows_approach_linear_scaling():
    D = 0.7
    mu = build_measure(build_schedule(SpectrumFunction.point(D, D), SpectrumFunction.point(D, D), m_max=3, preset="desk-small"))
    q = np.round(np.linspace(-3, 3, 61), 10)
    tp = tau_profile(mu, q)
    errs = [float(np.max(np.abs(tp.row(s) - D * (q - 1)))) for s in mu.s_prime_m]
    assert errs[0] > errs[1] > errs[2]
    # frozen against the closed form D(q-1)
    assert errs == pytest.approx([1.015508, 0.235786, 0.228770], abs=1e-5)
    # the two tail envelopes coincide up to the tolerance-driven spread
    spread = float(np.max(tp.upper - tp.lower))
    assert spread == pytest.approx(0.113230, abs=1e-5)
    assert spread < errs[-1]


# --- large-deviation counts --------------------------------------------------


def _brute_count(table, n, lo, hi):
    """Number of cubes whose exponent ``-log2 mu / n`` lies in ``[lo, hi]``."""
    return sum(1 for lm in table.values() if lo <= -lm / n <= hi)


def test_ld_counts_match_enumeration(tiny):
    _, mu, per_stage = tiny
    eps = 0.05
    for s, table in per_stage.items():
        n = int(mu.n[s])
        ex = np.array([-lm / n for lm in table.values()])
        grid = np.round(np.linspace(ex.min() - 0.2, ex.max() + 0.2, 41), 10)
        cs = ld_counts(mu, s, grid, eps, resolution=2.0**-24, max_buckets=1 << 20)
        assert cs.error < 1e-6
        assert cs.ceiling == pytest.approx(math.log2(len(table)) / n, abs=1e-12)
        for a, lc in zip(grid, cs.log2_count):
            inner = _brute_count(table, n, a - eps + cs.error, a + eps - cs.error)
            outer = _brute_count(table, n, a - eps - cs.error, a + eps + cs.error)
            got = 0 if lc == -math.inf else round(2.0**lc)
            assert inner <= got <= outer
            if lc > -math.inf:
                assert abs(2.0**lc - got) < 1e-6 * got
        assert np.all(cs.c <= cs.ceiling + 1e-12)


def test_ld_counts_window_and_tail(tiny):
    _, mu, per_stage = tiny
    s = mu.num_stages
    table = per_stage[s]
    n = int(mu.n[s])
    ex = sorted(-lm / n for lm in table.values())
    mid = ex[len(ex) // 2]
    eps = 1e-3
    cs = ld_counts(mu, s, [], eps, window=(ex[0], mid), resolution=2.0**-24, max_buckets=1 << 20)
    want = _brute_count(table, n, ex[0] - eps, mid + eps)
    assert round(2.0 ** cs.log2_count[0]) == want
    tail = ld_counts(mu, s, [], eps, infinity=mid, resolution=2.0**-24, max_buckets=1 << 20)
    assert round(2.0 ** tail.log2_count[0]) == sum(1 for x in ex if x >= mid)
    far = ld_counts(mu, s, [ex[-1] + 5.0], eps)
    assert far.c[0] == -math.inf


def test_ld_counts_errors(small_pair):
    with pytest.raises(ValueError):
        ld_counts(small_pair, 1, [1.0], 0.0)
    with pytest.raises(IndexError):
        ld_counts(small_pair, 0, [1.0], 0.1)


def test_counting_exponents_bound_scaling_function(small_pair):
    """``tau_s(q) <= q a - c_s(a) + |q| (eps + error)`` for every counted exponent ``a``."""
    mu = small_pair
    q = np.round(np.linspace(-3, 3, 31), 10)
    tp = tau_profile(mu, q)
    grid = np.round(np.linspace(0.3, 1.7, 141), 10)
    eps = 0.02
    for s in (3, 10, mu.s_m[-1], mu.s_prime_m[-1]):
        cs = ld_counts(mu, s, grid, eps)
        ok = np.isfinite(cs.c)
        assert ok.any()
        bound = np.min(q[:, None] * grid[ok][None, :] - cs.c[ok][None, :], axis=1)
        assert np.all(tp.row(s) <= bound + np.abs(q) * (eps + cs.error) + 1e-9)


def _bernoulli_only(N):
    """Single-atom schedule whose only stage is the full p = 1/4 cascade over ``N`` digits."""
    h = binary_entropy(0.25)
    sch = build_schedule(SpectrumFunction.point(h, h), m_max=1, n_override=[N], eps_override=[50.0])
    return build_measure(sch)


@pytest.mark.parametrize("N", [64, 256])
def test_bernoulli_stage_counts_against_binomials(N):
    mu = _bernoulli_only(N)
    n = int(mu.n[1])
    ell = n - N
    eps = 0.01
    grid = np.round(np.linspace(0.45, 1.95, 31), 10)
    cs = ld_counts(mu, 1, grid, eps, resolution=2.0**-24, max_buckets=1 << 20)
    k = np.arange(N + 1)
    logc = np.array([math.log2(math.comb(N, int(i))) for i in k])
    expo = -(k * math.log2(0.25) + (N - k) * math.log2(0.75)) / n
    for a, got in zip(grid, cs.log2_count):
        m = (expo >= a - eps) & (expo <= a + eps)
        want = float(log2sumexp2(logc[m])) if m.any() else -math.inf
        assert got == pytest.approx(want, abs=1e-9) or got == want == -math.inf
    assert ell == mu.table(1).block.ell


def test_bernoulli_counts_approach_rate_function():
    """Rescaled counting exponents converge to the binomial entropy rate."""
    gaps = []
    for N in (64, 256, 1024):
        mu = _bernoulli_only(N)
        n = int(mu.n[1])
        x = np.linspace(0.05, 0.6, 12)
        alpha = -(x * math.log2(0.25) + (1 - x) * math.log2(0.75))
        eps = 2.0 / N
        cs = ld_counts(mu, 1, alpha * N / n, eps * N / n)
        rate = np.array([binary_entropy(v) for v in x])
        gaps.append(float(np.max(np.abs(cs.c * n / N - rate))))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.02


# --- empirical scaling -------------------------------------------------------


def test_empirical_tau_bernoulli_cascade():
    p = 0.25
    table = {}
    for n in (14, 15, 16):
        k = np.array([bin(i).count("1") for i in range(1 << n)])
        table[n] = k * math.log2(p) + (n - k) * math.log2(1 - p)
    got = empirical_tau(table, Q, log2=True)
    ref = analytic_tau(p, 1, Q)
    assert np.max(np.abs(got.tau - ref.tau)) <= 1e-9
    assert got.at(2.0) == pytest.approx(0.678071905, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(2, 6))
def test_empirical_tau_uniform(d, n0):
    table = {n: np.full(1 << (n * d), 2.0 ** (-n * d)) for n in (n0, n0 + 1)}
    got = empirical_tau(table, Q)
    assert np.allclose(got.tau, d * (Q - 1), atol=1e-9)


def test_empirical_tau_on_generation_tables(tiny):
    _, mu, _ = tiny
    if mu.num_stages < 2:
        pytest.skip("needs two stages")
    s1, s2 = 1, 2
    n1, n2 = int(mu.n[s1]), int(mu.n[s2])
    table = {}
    for n in (n1, n2):
        table.update(generation_table(mu, n))
    got = empirical_tau(table, Q, log2=True)
    ref = -(exact_partition(mu, Q, s2) - exact_partition(mu, Q, s1)) / (n2 - n1)
    assert np.max(np.abs(got.tau - ref)) <= 1e-9


def test_empirical_tau_input_checks():
    with pytest.raises(ValueError):
        empirical_tau({3: np.full(8, 1 / 8)}, Q)
    with pytest.raises(ValueError):
        empirical_tau({2: np.full(4, 0.3), 3: np.full(8, 1 / 8)}, Q)
