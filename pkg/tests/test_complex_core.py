import mpmath
import numpy as np
import pytest

from bowenlab.complex_core import (
    Disk, boundary_points, newton_invert, newton_solve, principal_root, sup_norm_on_disk,
)
from bowenlab.errors import DerivativeVanished, DomainError, NoConvergence, NonFiniteValue


def test_disk_rejects_bad_radius():
    with pytest.raises(DomainError):
        Disk(0, 0)
    with pytest.raises(DomainError):
        Disk(0, -1)
    with pytest.raises(DomainError):
        Disk(np.inf, 1)


def test_disk_contains_open_and_closed():
    d = Disk(1j, 2.0)
    assert d.contains(1j + 1.9)
    assert not d.contains(1j + 2.0)
    assert d.contains(1j + 2.0, closed=True)


def test_boundary_points_lie_on_circle():
    d = Disk(3 - 1j, 0.5)
    pts = boundary_points(d, 64)
    assert pts.shape == (64,)
    np.testing.assert_allclose(np.abs(pts - d.center), 0.5, rtol=1e-14)


def test_newton_invert_matches_mpmath_findroot():
    # oracle: mpmath root finder at 50 digits
    target = 0.3 + 0.2j
    z = newton_invert(target, 0.3, np.tan, lambda z: 1 / np.cos(z) ** 2)
    with mpmath.workdps(50):
        ref = mpmath.findroot(lambda x: mpmath.tan(x) - mpmath.mpc(target), mpmath.mpc(0.3))
    assert abs(z - complex(ref)) < 1e-13


def test_newton_solve_vectorised_and_scalar_shapes():
    t = np.array([[1.0, 4.0], [9.0, 16.0]], dtype=complex)
    z, d = newton_solve(t, np.full(t.shape, 1.0 + 0j), lambda z: z * z, lambda z: 2 * z)
    np.testing.assert_allclose(z, np.sqrt(t), rtol=1e-12)
    np.testing.assert_allclose(d, 2 * np.sqrt(t), rtol=1e-12)
    z0, _ = newton_solve(np.asarray(2.0 + 0j), 1.0, lambda z: z * z, lambda z: 2 * z)
    assert z0.shape == ()
    assert abs(complex(z0) - np.sqrt(2)) < 1e-12


def test_newton_reports_vanishing_derivative():
    with pytest.raises(DerivativeVanished):
        newton_invert(1.0, 0.0, lambda z: z * z, lambda z: 2 * z)


def test_newton_reports_non_convergence():
    # exp has no zero
    with pytest.raises((NoConvergence, DerivativeVanished)):
        newton_invert(0.0, 1.0, np.exp, np.exp, max_iter=20)


def test_sup_norm_on_disk_exp():
    # |exp| on B(0, r) peaks at z = r, which is a sample point
    assert sup_norm_on_disk(np.exp, Disk(0, 1.5), 64) == pytest.approx(np.exp(1.5), rel=1e-14)


def test_sup_norm_detects_singularity():
    with pytest.raises(NonFiniteValue):
        sup_norm_on_disk(lambda z: 1 / (z - 1), Disk(0, 1), 64)
    with pytest.raises(DomainError):
        sup_norm_on_disk(np.exp, Disk(0, 1), 8)


def test_principal_root_branches():
    r = [principal_root(8.0, 3, j) for j in (1, 2, 3)]
    assert abs(r[0] - 2) < 1e-14
    for v in r:
        assert abs(v ** 3 - 8) < 1e-12
    assert len({np.round(complex(v), 10) for v in r}) == 3
