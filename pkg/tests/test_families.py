import mpmath
import numpy as np
import pytest

from bowenlab.complex_core import Disk
from bowenlab.errors import BranchDomainInvalid, DomainError, PoleHit, Unsupported
from bowenlab.families import (
    IDENTITY, PerturbationMode, PerturbationSequence, PerturbationStep, b_points, derivative,
    elliptic, enumerate_poles, evaluate, formula_only, local_branch, mayer_dimension,
    pole_preimage, pole_table, poles_by_count, rational_exp, tan_power, theoretical_dimension,
    z_cos_sqrt_z, z_sin_z,
)


@pytest.mark.parametrize("make", [lambda: tan_power(1), lambda: tan_power(2, 0.5), z_sin_z,
                                  z_cos_sqrt_z, lambda: rational_exp([1.0], [1.0, -2.0])])
def test_f0_and_df0_agree_with_mpmath(make):
    fam = make()
    z = np.array([0.7 + 0.3j, -2.1 + 0.4j, 5.3 - 1.2j])
    with mpmath.workdps(30):
        ref = [complex(fam.f0_mp(mpmath.mpc(v))) for v in z]
        dref = [complex(mpmath.diff(fam.f0_mp, mpmath.mpc(v))) for v in z]
    np.testing.assert_allclose(fam.f0(z), ref, rtol=1e-12)
    np.testing.assert_allclose(fam.df0(z), dref, rtol=1e-9)


def test_evaluate_applies_affine_perturbation(zsinz):
    s = PerturbationStep(0.1 + 0.05j, 1.02)
    z = 1.3 + 0.2j
    assert evaluate(zsinz, s, z) == pytest.approx(1.02 / (z * np.sin(z)) + 0.1 + 0.05j)
    assert derivative(zsinz, s, z) == pytest.approx(1.02 * complex(zsinz.df0(z)))


def test_evaluate_at_pole_raises(zsinz):
    with pytest.raises(PoleHit):
        evaluate(zsinz, IDENTITY, np.pi)


def test_tan_poles_closed_form():
    tab = pole_table(tan_power(2), 10.0)
    expected = sorted([np.pi / 2 + k * np.pi for k in range(-4, 3)
                       if abs(np.pi / 2 + k * np.pi) <= 10], key=abs)
    np.testing.assert_allclose(np.sort(tab.location.real), np.sort(expected))
    assert set(tab.multiplicity) == {2}


def test_zsinz_pole_at_origin_is_double(zsinz):
    recs = enumerate_poles(zsinz, 7.0)
    origin = [r for r in recs if abs(r.location) < 1e-12]
    assert len(origin) == 1 and origin[0].multiplicity == 2
    assert sorted(r.multiplicity for r in recs if abs(r.location) > 1) == [1, 1, 1, 1]


def test_laurent_coefficients_match_residues(zsinz, zcos):
    # oracle: residue by contour integral around each simple pole
    for fam in (zsinz, zcos):
        tab = poles_by_count(fam, 4, min_modulus=1.0)
        for a, c in zip(tab.location, tab.coeff):
            r = 0.2
            with mpmath.workdps(20):
                res = mpmath.quad(lambda th: fam.f0_mp(a + r * mpmath.expj(th)) * r
                                  * mpmath.expj(th), [0, 2 * mpmath.pi]) / (2 * mpmath.pi)
            assert abs(complex(res) - c) < 1e-10 * max(1, abs(c))


def test_zcos_poles_are_odd_half_pi_squares(zcos):
    tab = pole_table(zcos, 300.0)
    want = np.concatenate([[0.0], ((2 * np.arange(6) + 1) * np.pi / 2) ** 2])
    want = want[want <= 300]
    np.testing.assert_allclose(np.sort(tab.location.real), np.sort(want))


def test_rational_exp_poles_periodic():
    fam = rational_exp([1.0], [1.0, -2.0])  # 1/(e^z - 2)
    tab = pole_table(fam, 20.0)
    np.testing.assert_allclose(np.exp(tab.location), 2.0, rtol=1e-12)
    assert np.allclose(np.diff(np.sort(tab.location.imag)), 2 * np.pi)


def test_poles_by_count_filters(zsinz):
    tab = poles_by_count(zsinz, 10, min_modulus=1.0, multiplicity=1)
    assert len(tab) == 10
    assert np.all(tab.modulus > 1)
    assert np.all(np.diff(tab.modulus) >= 0)


def test_pole_preimage_inverts(zsinz):
    u = np.array([40.0, 50j, -35 + 20j])
    tab = poles_by_count(zsinz, 3, min_modulus=1.0)
    for a, m, c in zip(tab.location, tab.multiplicity, tab.coeff):
        z, d = pole_preimage(zsinz, u, a, m, c)
        np.testing.assert_allclose(zsinz.f0(z), u, rtol=1e-11)
        assert np.all(np.abs(z - a) < 0.1)


def test_multiple_pole_branches_are_distinct():
    fam = tan_power(3)
    a = fam.R_dagger
    pts = [pole_preimage(fam, 200.0, np.pi / 2, 3, -1.0, j)[0] for j in (1, 2, 3)]
    assert len({np.round(complex(p), 8) for p in pts}) == 3
    for p in pts:
        assert abs(complex(fam.f0(p)) - 200) < 1e-8
    assert a > 0


def test_local_branch_standoff(zsinz):
    rec = poles_by_count(zsinz, 1, min_modulus=1.0).record(0)
    br = local_branch(zsinz, IDENTITY, rec, 1, Disk(30.0, 1.0))
    w = 30.2 + 0.1j
    assert abs(complex(zsinz.f0(br.value(w))) - w) < 1e-10
    with pytest.raises(BranchDomainInvalid):
        local_branch(zsinz, IDENTITY, rec, 1, Disk(0.0, 0.5))
    with pytest.raises(BranchDomainInvalid):
        local_branch(zsinz, IDENTITY, rec, 2, Disk(30.0, 1.0))


def test_b_points_solve_equation(tan1):
    b = np.pi / 2
    z = b_points(tan1, b, 40.0)
    np.testing.assert_allclose(np.tan(z), b, rtol=1e-11)
    # closed form: arctan(b) + k*pi
    want = np.sort(np.arctan(b) + np.pi * np.arange(-13, 13))
    want = want[np.abs(want) <= 40]
    np.testing.assert_allclose(np.sort(z.real), want, atol=1e-10)


def test_perturbation_random_in_ball_bounds_and_determinism():
    p = PerturbationSequence(PerturbationMode.RANDOM_IN_BALL, 0.01, 0.02, rng_seed=42)
    steps = [p.step(n) for n in range(1, 200)]
    assert all(abs(s.c) < 0.01 for s in steps)
    assert all(abs(s.lam - 1) < 0.02 and abs(1 / s.lam - 1) < 0.02 for s in steps)
    q = PerturbationSequence(PerturbationMode.RANDOM_IN_BALL, 0.01, 0.02, rng_seed=42)
    assert q.step(150) == p.step(150)
    # order of access does not change the stream
    r = PerturbationSequence(PerturbationMode.RANDOM_IN_BALL, 0.01, 0.02, rng_seed=42)
    assert r.step(5) == p.step(5)


def test_perturbation_validation():
    with pytest.raises(DomainError):
        PerturbationSequence(PerturbationMode.CONSTANT_SHIFT, epsilon=0.01, shift=0.5)
    with pytest.raises(DomainError):
        PerturbationSequence(PerturbationMode.USER_LIST, 0.1, 0.0, user_steps=[(0.01, 1.5)])
    with pytest.raises(DomainError):
        PerturbationSequence().step(0)
    p = PerturbationSequence(PerturbationMode.USER_LIST, 0.1, 0.1,
                             user_steps=[(0.01, 1.0), (0.02j, 1.05)])
    assert p.step(3) == p.step(1)


def test_additive_only_has_unit_lambda():
    p = PerturbationSequence(PerturbationMode.RANDOM_IN_BALL, 0.1, 0.1, 3, additive_only=True)
    assert all(p.step(n).lam == 1 for n in range(1, 50))


def test_formula_only_has_no_numeric_services():
    fam = elliptic(3)
    with pytest.raises(Unsupported):
        pole_table(fam, 10.0)
    assert mayer_dimension(fam.order_rho, fam.mayer_alpha, fam.mayer_q) == pytest.approx(1.5)


@pytest.mark.parametrize("rho,beta,M,want", [(1, 1, 1, 1 / 3), (0.5, 0.5, 1, 1 / 5),
                                             (1, 0, 3, 3 / 4), (2, 0, 3, 1.5)])
def test_theoretical_dimension_closed_forms(rho, beta, M, want):
    assert theoretical_dimension(rho, beta, M) == pytest.approx(want, abs=1e-15)


def test_dimension_formula_domain_errors():
    with pytest.raises(DomainError):
        theoretical_dimension(0, 0, 1)
    with pytest.raises(DomainError):
        theoretical_dimension(1, -1, 1)
    with pytest.raises(DomainError):
        mayer_dimension(1, 0, 0)
    assert formula_only(2.0, 0.0, 3, 3).numeric is False


@pytest.mark.parametrize("make", [lambda: tan_power(2), z_sin_z, z_cos_sqrt_z,
                                  lambda: rational_exp([1.0], [1.0, -2.0])])
@pytest.mark.parametrize("r", [0.0, 1.0, 30.0, 3 * np.pi])
def test_pole_ring_matches_filtered_disk(make, r):
    fam = make()
    full = pole_table(fam, 200.0)
    keep = full.modulus >= r
    ring = pole_table(fam, 200.0, r)
    np.testing.assert_array_equal(ring.location, full.location[keep])
    np.testing.assert_array_equal(ring.multiplicity, full.multiplicity[keep])


def test_far_poles_by_count_is_cheap():
    fam = z_sin_z()
    tab = poles_by_count(fam, 6, min_modulus=1e12)
    n = np.ceil(1e12 / np.pi)
    np.testing.assert_allclose(np.abs(tab.location), np.repeat([n, n + 1, n + 2], 2) * np.pi)
