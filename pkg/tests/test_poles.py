import numpy as np
import pytest

from bowenlab.errors import DomainError, InsufficientData
from bowenlab.families import PoleRecord, enumerate_poles, poles_by_count, tan_power
from bowenlab.poles import (
    borel_partial_sum, chunked_sum, detect_mult_star, estimate_order,
)


def _synthetic(moduli, mult=1):
    return [PoleRecord(complex(r), mult, 1.0, i) for i, r in enumerate(moduli)]


def test_borel_sum_zsinz_matches_brute_force(zsinz):
    # brute force: both signs of n*pi, n = 1..31, pole 0 dropped (|a| < 1)
    poles = enumerate_poles(zsinz, 100.0)
    got = borel_partial_sum(poles, 3.0)
    n = np.arange(1, 32)
    want = 2 * np.sum((n * np.pi) ** -3.0)
    assert got.partial_sum == pytest.approx(want, rel=1e-13)
    assert got.term_count == 62


def test_borel_sum_tan_converges_to_one():
    # 2 * sum_k ((k+1/2) pi)^-2 = 1 exactly
    poles = enumerate_poles(tan_power(1), 100.0)
    s = borel_partial_sum(poles, 2.0).partial_sum
    assert 0.99 < s < 1.0
    big = borel_partial_sum(enumerate_poles(tan_power(1), 1e5), 2.0).partial_sum
    assert abs(big - 1.0) < 1e-4


def test_borel_sum_restrict_multiplicity(zsinz):
    poles = enumerate_poles(zsinz, 20.0) + [PoleRecord(50.0, 2, 1.0)]
    full = borel_partial_sum(poles, 2.0)
    simple = borel_partial_sum(poles, 2.0, restrict_mult=1)
    assert full.partial_sum - simple.partial_sum == pytest.approx(50.0 ** -2)


def test_borel_sum_rejects_nonpositive_t(zsinz):
    with pytest.raises(DomainError):
        borel_partial_sum(enumerate_poles(zsinz, 10.0), 0.0)


def test_chunked_sum_is_order_fixed():
    x = np.random.default_rng(0).random(5000)
    assert chunked_sum(x) == chunked_sum(x.copy())
    assert chunked_sum(x) == pytest.approx(x.sum(), rel=1e-13)
    assert chunked_sum(np.zeros(0)) == 0.0


def test_estimate_order_tan(tan1):
    est = estimate_order(poles_by_count(tan1, 1000).records())
    assert abs(est.rho_hat - 1.0) < 0.05


def test_estimate_order_zcos(zcos):
    est = estimate_order(poles_by_count(zcos, 1000).records())
    assert abs(est.rho_hat - 0.5) < 0.05
    assert est.ci_halfwidth > 0


def test_estimate_order_synthetic_power_law():
    # n(r) = sqrt(r) exactly for moduli k^2
    est = estimate_order(_synthetic(np.arange(1, 3001) ** 2.0))
    assert abs(est.rho_hat - 0.5) < 0.01


def test_estimate_order_needs_data():
    with pytest.raises(InsufficientData):
        estimate_order(_synthetic(np.arange(1, 20.0)))


def test_detect_mult_star():
    assert detect_mult_star(poles_by_count(tan_power(3), 2000).records(), 1.0) == 3
    mixed = _synthetic(np.arange(2, 2002.0), 1) + _synthetic(2.0 ** np.arange(1, 12), 2)
    assert detect_mult_star(mixed, 1.0) == 1
