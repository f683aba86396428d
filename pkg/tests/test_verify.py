import mpmath
import numpy as np
import pytest
from scipy import optimize

from bowenlab.complex_core import Disk
from bowenlab.errors import DomainError, InvalidAddress
from bowenlab.families import PerturbationSequence, ZERO_PERTURBATION, z_sin_z
from bowenlab.ncifs import bowen_dimension, similarity_system
from bowenlab.verify import (
    SymbolicAddress, derivative_blowup_audit, derivative_blowup_report, escape_witness,
    forward_orbit, moran_oracle, sample_addresses, sample_limit_point,
)


@pytest.mark.parametrize("ratios,expected", [
    ([0.5, 0.5], 1.0),
    ([1 / 3, 1 / 3], np.log(2) / np.log(3)),
    ([0.25] * 4, 1.0),
    ([0.2] * 3, np.log(3) / np.log(5)),
])
def test_moran_closed_forms(ratios, expected):
    assert abs(moran_oracle(ratios) - expected) < 1e-12


def test_moran_against_brentq():
    r = np.array([0.1, 0.37, 0.22, 0.05])
    ref = optimize.brentq(lambda t: np.sum(r ** t) - 1, 0, 5, xtol=1e-15)
    assert abs(moran_oracle(r) - ref) < 1e-12


def test_moran_edge_cases():
    assert moran_oracle([0.4]) == 0.0
    for bad in ([], [1.0, 0.5], [0.0, 0.5]):
        with pytest.raises(DomainError):
            moran_oracle(bad)


def test_engine_matches_moran():
    r = [0.3, 0.2, 0.15]
    rep = bowen_dimension(similarity_system(r), 0.0, 2.0, tol=1e-6, max_depth=4)
    lo, hi = rep.bowen_bracket
    assert lo - 1e-6 <= moran_oracle(r) <= hi + 1e-6


def test_limit_point_converges_to_fixed_point():
    s = similarity_system([0.5, 0.3])  # phi_0(z) = z/2 - 1/2, fixed point -1
    z = sample_limit_point(s, SymbolicAddress([0] * 20))
    assert abs(z - (-1.0)) < 2e-6
    zm = sample_limit_point(s, SymbolicAddress([0] * 20), dps=40)
    assert abs(complex(zm) - z) < 1e-14


def test_depth_zero_is_centre(mayer8):
    assert sample_limit_point(mayer8, SymbolicAddress([])) == mayer8.X(0).center


def test_nested_cylinders(mayer8):
    addr = SymbolicAddress([3, 1, 7, 0, 5])
    pts = [sample_limit_point(mayer8, addr.prefix(k)) for k in range(1, 6)]
    # deeper points stay close to shallower ones at a geometric rate
    gaps = [abs(b - a) for a, b in zip(pts, pts[1:])]
    assert all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
    for k, p in enumerate(pts, start=1):
        assert mayer8.X(0).contains(np.array([p]), closed=True)[0]


def test_mp_limit_point_agrees_with_float(escape_sys):
    addr = SymbolicAddress([0, 1, 2, 0])
    zf = sample_limit_point(escape_sys, addr)
    zm = sample_limit_point(escape_sys, addr, dps=60)
    assert isinstance(zm, mpmath.mpc)
    assert abs(complex(zm) - zf) < 1e-9 * max(1, abs(zf))


def test_invalid_addresses(mayer8):
    with pytest.raises(InvalidAddress):
        SymbolicAddress([8]).validate(mayer8)
    with pytest.raises(InvalidAddress):
        sample_limit_point(mayer8, SymbolicAddress([0, -1]))


def test_sample_addresses_in_range(escape_sys):
    sizes = escape_sys.alphabet_sizes(5)
    for method in ("halton", "uniform"):
        for a in sample_addresses(escape_sys, 5, 50, seed=3, method=method):
            a.validate(escape_sys)
            assert all(0 <= i < s for i, s in zip(a.word, sizes))
    with pytest.raises(ValueError):
        sample_addresses(escape_sys, 5, 4, method="grid")


def test_forward_orbit_zero_steps():
    orb = forward_orbit(z_sin_z(), ZERO_PERTURBATION, 0.3 + 0.1j, 0)
    assert orb.steps == 0 and orb.iterates == [0.3 + 0.1j]
    assert orb.derivative_moduli == [1.0]


def test_forward_orbit_returning_orbit_does_not_escape():
    fam = z_sin_z()
    orb = forward_orbit(fam, ZERO_PERTURBATION, 0.2, 10)
    assert not orb.truncated
    assert min(abs(z) for z in orb.iterates) <= fam.R_star
    assert orb.escaped_past is None
    # below every iterate the radius is met, so escaped_past is the minimum modulus
    big = forward_orbit(fam, ZERO_PERTURBATION, 0.2, 10, radius=0.1)
    assert big.escaped_past == pytest.approx(min(abs(z) for z in big.iterates))


def test_forward_orbit_mp_matches_float():
    fam = z_sin_z()
    p = PerturbationSequence("RandomInBall", 0.01, 0.01, 7)
    a = forward_orbit(fam, p, 1.3 + 0.4j, 4)
    b = forward_orbit(fam, p, 1.3 + 0.4j, 4, dps=50)
    np.testing.assert_allclose(a.iterates, b.iterates, rtol=1e-10)
    np.testing.assert_allclose(a.derivative_moduli, b.derivative_moduli, rtol=1e-10)


def test_forward_orbit_pole_truncates():
    from bowenlab.families import tan_power
    orb = forward_orbit(tan_power(1), ZERO_PERTURBATION, np.pi / 2, 3)
    assert orb.truncated and orb.steps == 0


def test_blowup_mayer(mayer8):
    addrs = sample_addresses(mayer8, 8, 8, seed=1)
    assert derivative_blowup_audit(mayer8, addrs)


def test_blowup_affine(affine_small):
    addrs = sample_addresses(affine_small, 8, 8, seed=2)
    assert derivative_blowup_audit(affine_small, addrs)


def test_blowup_escape(escape_sys, zsinz):
    addrs = sample_addresses(escape_sys, 5, 6, seed=4)
    rep = derivative_blowup_report(escape_sys, addrs, fam=zsinz, dps=80)
    assert rep.passed
    assert all(m[-1] > 1e3 for m in rep.moduli)


def test_blowup_fails_for_weak_contraction():
    s = similarity_system([0.9, 0.9], domain=Disk(0, 10))
    addrs = sample_addresses(s, 6, 4)
    assert not derivative_blowup_audit(s, addrs)


def test_blowup_requires_depth(mayer8):
    with pytest.raises(DomainError):
        derivative_blowup_report(mayer8, [SymbolicAddress([0, 0, 0])])


def test_escape_witnesses(escape_sys, zsinz):
    c = escape_sys.constants
    for a in sample_addresses(escape_sys, 4, 6, seed=9):
        w = escape_witness(escape_sys, a, zsinz, ZERO_PERTURBATION, c.value("R2"),
                           c.value("S"), dps=80)
        assert w.escaped and w.near_poles
        assert w.min_modulus > c.value("R2")
        assert w.to_dict()["address"] == list(a.word)
