import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlspb.errors import DomainError
from qlspb.filters import (FilterSpec, chebyshev_t, delta_prime, eval_f, eval_k,
                           inv_edge_chebyshev, kr_envelope, log_chebyshev_t, order_for)

deltas = st.floats(1 / 5000, 0.2)
etas = st.floats(1e-4, 1.0)
xs = st.floats(-1.0, 1.0)


def u_of(delta, x):
    return (1 + delta**2 - 2 * x * x) / (1 - delta**2)


def test_order_examples():
    assert order_for(1 / 20, 0.009) == math.ceil(10 * math.log(2 / 0.009)) == 55
    assert FilterSpec("KR", 1 / 20, 0.009).degree == 110
    assert order_for(0.5, 2 / math.e**2) == 2
    for d in (0.9, 0.1, 1e-3):
        assert order_for(d, 1.0) == max(1, math.ceil(math.log(2) / (2 * d)))


@pytest.mark.parametrize("delta,eta", [(0.0, 0.5), (1.0, 0.5), (0.1, 0.0), (0.1, 1.5)])
def test_order_domain(delta, eta):
    with pytest.raises(DomainError):
        order_for(delta, eta)


def test_spec_override_recorded():
    s = FilterSpec("KP", 0.1, 0.01, order=7)
    assert s.order == 7 and s.overridden and s.degree == 14
    assert not FilterSpec("KP", 0.1, 0.01).overridden
    with pytest.raises(DomainError):
        FilterSpec("XX", 0.1, 0.01)


def test_chebyshev_examples():
    assert chebyshev_t(3, 0.5) == pytest.approx(-1.0)
    for l in range(11):
        assert chebyshev_t(l, 1.0) == pytest.approx(1.0)
    with pytest.raises(OverflowError):
        chebyshev_t(20000, 1.5)


def test_chebyshev_recurrence_oracle():
    mpmath.mp.dps = 60
    y = mpmath.mpf("1.0002")
    t0, t1 = mpmath.mpf(1), y
    for _ in range(99):
        t0, t1 = t1, 2 * y * t1 - t0
    assert chebyshev_t(100, 1.0002) == pytest.approx(float(t1), rel=1e-10)
    s, lg = log_chebyshev_t(100, 1.0002)
    assert s * math.exp(lg) == pytest.approx(float(t1), rel=1e-10)


@given(st.integers(0, 40), st.floats(-3, 3))
def test_log_chebyshev_matches_plain(l, y):
    v = chebyshev_t(l, y)
    s, lg = log_chebyshev_t(l, y)
    if v == 0:
        assert lg == -math.inf
    else:
        assert s * math.exp(lg) == pytest.approx(v, rel=1e-9, abs=1e-12)


def test_f_examples():
    s = FilterSpec("KP", 1 / 80, 0.016)
    assert s.F(0.0) == 1.0
    x = np.random.default_rng(1).uniform(1 / 80, 1.0, 1000)
    assert np.all(np.abs(s.F(x)) <= 0.016)
    T = chebyshev_t(20, u_of(0.1, 0.0))
    assert eval_f(0.1, 20, 0.1) == pytest.approx(1 / T, rel=1e-12)
    assert inv_edge_chebyshev(0.1, 20) == pytest.approx(1 / T, rel=1e-12)


def test_f_matches_direct_ratio():
    d, l = 0.07, 9
    for x in np.linspace(-1, 1, 41):
        direct = chebyshev_t(l, u_of(d, x)) / chebyshev_t(l, u_of(d, 0.0))
        assert eval_f(d, l, x) == pytest.approx(direct, rel=1e-10, abs=1e-13)


def test_k_examples():
    s = FilterSpec("KR", 1 / 40, 0.016)
    assert s.K(0.0) == pytest.approx(1.0, abs=1e-15)
    x = np.random.default_rng(2).uniform(1 / 40, 1.0, 1000)
    k = s.K(x)
    assert np.all(k >= -1 - 1e-12) and np.all(k <= -1 + kr_envelope(0.016))
    T = chebyshev_t(40, u_of(0.05, 0.0))
    assert eval_k(0.05, 40, 0.05) == pytest.approx((3 - T) / (T + 1), rel=1e-10)
    assert eval_k(0.05, 40, 0.05) == pytest.approx(-1 + 4 / (T + 1), rel=1e-10)


@given(st.floats(0.01, 0.3), st.integers(1, 60), xs)
def test_k_closed_form_identity(d, l, x):
    T = chebyshev_t(l, u_of(d, 0.0))
    closed = (2 * chebyshev_t(l, u_of(d, x)) + 2) / (T + 1) - 1
    assert eval_k(d, l, x) == pytest.approx(closed, abs=1e-10)


@given(deltas, etas, xs)
def test_filter_properties(d, eta, x):
    l = order_for(d, eta)
    f = eval_f(d, l, x)
    k = eval_k(d, l, x)
    assert math.isfinite(f) and math.isfinite(k)
    assert abs(f) <= 1 + 1e-9 and abs(k) <= 1 + 1e-9
    if abs(x) >= d:
        assert abs(f) <= inv_edge_chebyshev(d, l) + 1e-9 <= eta + 2e-9
        assert -1 - 1e-9 <= k <= -1 + kr_envelope(eta) + 1e-9
    assert eval_f(d, l, 0.0) == 1.0
    assert eval_k(d, l, 0.0) == pytest.approx(1.0, abs=1e-12)


@given(deltas, st.integers(1, 20000), xs)
def test_even_and_finite(d, l, x):
    assert abs(eval_f(d, l, x) - eval_f(d, l, -x)) <= 1e-12
    assert abs(eval_k(d, l, x) - eval_k(d, l, -x)) <= 1e-12
    assert np.isfinite(eval_f(d, l, np.array([x, d, 0.0, 1.0]))).all()


def test_extreme_order_no_overflow():
    x = np.linspace(-1, 1, 2001)
    for d in (1 / 5000, 1 / 2560):
        for l in (1, 5000, 20000):
            assert np.all(np.isfinite(eval_f(d, l, x)))
            assert np.all(np.isfinite(eval_k(d, l, x)))


@given(st.floats(1e-4, 0.99), st.floats(1e-4, 0.99))
def test_envelope_increasing(a, b):
    lo, hi = sorted((a, b))
    if lo < hi:
        assert kr_envelope(lo) < kr_envelope(hi)


def test_delta_prime_relations():
    rng = np.random.default_rng(3)
    for _ in range(200):
        eta = rng.uniform(1e-3, 0.5)
        r, th = eta * math.sqrt(rng.uniform()), rng.uniform(0, 2 * math.pi)
        d1, d2 = r * math.cos(th), r * math.sin(th)
        if d1 < -eta:
            continue
        p1, p2 = delta_prime(eta, d1, d2)
        assert p1 >= -1e-15
        assert math.hypot(p1, p2) <= 4 * eta / (1 + eta) + 1e-12
        assert abs(p2) <= 2 * eta / (1 + eta) + 1e-12


def test_f_rejects_outside_domain():
    with pytest.raises(DomainError):
        eval_f(0.1, 3, 1.5)
