"""Complex-plane helpers: disks, damped Newton inversion, boundary sup norms.

Points of the plane are plain Python ``complex`` values (or complex numpy
arrays); no wrapper type is introduced for them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DerivativeVanished, DomainError, NoConvergence, NonFiniteValue

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 60
MAX_HALVINGS = 40
DERIV_FLOOR = 1e-14
STEP_FLOOR = 8 * np.finfo(float).eps

AnalyticMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Disk:
    """Disk ``B(center, radius)``; ``contains`` is open unless ``closed=True``."""

    center: complex
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise DomainError(f"disk radius must be positive, got {self.radius}")
        if not np.isfinite(complex(self.center)):
            raise DomainError("disk center must be finite")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, z, closed: bool = False, slack: float = 0.0):
        d = np.abs(np.asarray(z) - self.center)
        if closed:
            return d <= self.radius * (1 + slack)
        return d < self.radius * (1 + slack)

    def boundary(self, samples: int = 128) -> np.ndarray:
        return boundary_points(self, samples)

    def scaled(self, factor: float) -> "Disk":
        return Disk(self.center, self.radius * factor)

    def to_dict(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "radius": self.radius}


def boundary_points(disk: Disk, samples: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(samples) / samples
    return disk.center + disk.radius * np.exp(1j * theta)


def newton_solve(target, seed, eval: AnalyticMap, deriv: AnalyticMap,
                 tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER):
    """Vectorised damped Newton iteration for ``eval(z) = target``.

    Returns ``(z, deriv(z))``. Convergence is declared when
    ``|eval(z) - target| <= tol * max(1, |target|)``, or when the Newton step
    falls below a few ulps of ``z`` (the rounding floor of an ill-conditioned
    residual). A step that increases the residual is halved, at most
    ``MAX_HALVINGS`` times.
    """
    target = np.asarray(target, dtype=complex)
    shape = np.broadcast(target, np.asarray(seed)).shape
    z = np.array(np.broadcast_to(np.asarray(seed, dtype=complex), shape)).reshape(-1)
    target = np.broadcast_to(target, shape).reshape(-1)
    if not np.all(np.isfinite(target)):
        raise NoConvergence("non-finite target (inversion onto a pole)")
    scale = tol * np.maximum(1.0, np.abs(target))

    with np.errstate(all="ignore"):
        f = eval(z)
        res = np.abs(f - target)
        res = np.where(np.isfinite(res), res, np.inf)
        at_floor = np.zeros(z.shape, dtype=bool)
        for _ in range(max_iter):
            active = (res > scale) & ~at_floor
            if not active.any():
                break
            za, fa, ra, ta = z[active], f[active], res[active], target[active]
            d = deriv(za)
            if np.any(~np.isfinite(d)) or np.any(np.abs(d) < DERIV_FLOOR):
                raise DerivativeVanished("derivative vanished or blew up along Newton path")
            step = (fa - ta) / d
            # the residual can sit above tol purely from rounding (large |z f'/f|);
            # a step below a few ulps of z means nothing more is attainable
            tiny = np.abs(step) <= STEP_FLOOR * np.maximum(1.0, np.abs(za))
            if tiny.any():
                sub = np.flatnonzero(active)[tiny]
                at_floor[sub] = True
            lam = np.ones(za.shape)
            znew = za - step
            fnew = eval(znew)
            rnew = np.abs(fnew - ta)
            rnew = np.where(np.isfinite(rnew), rnew, np.inf)
            for _ in range(MAX_HALVINGS):
                worse = rnew > ra
                if not worse.any():
                    break
                lam = np.where(worse, lam / 2, lam)
                znew = np.where(worse, za - lam * step, znew)
                fw = eval(znew[worse])
                fnew[worse] = fw
                rw = np.abs(fw - ta[worse])
                rnew[worse] = np.where(np.isfinite(rw), rw, np.inf)
            z[active], f[active], res[active] = znew, fnew, rnew
        failed = (res > scale) & ~at_floor
        if failed.any():
            raise NoConvergence(f"{int(failed.sum())} point(s) failed to converge, "
                                f"worst residual {float(np.max(res[failed])):.3e}")
        d = deriv(z)
    if np.any(np.abs(d) < DERIV_FLOOR):
        raise DerivativeVanished("derivative vanished at the solution")
    return z.reshape(shape), np.asarray(d).reshape(shape)


def newton_invert(target: complex, seed: complex, eval: AnalyticMap, deriv: AnalyticMap,
                  tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> complex:
    z, _ = newton_solve(np.asarray(target, dtype=complex), seed, eval, deriv, tol, max_iter)
    return complex(z)


def sup_norm_on_disk(g: AnalyticMap, d: Disk, samples: int = 128) -> float:
    """Max of ``|g|`` over ``samples`` equispaced points of the circle ``∂d``.

    By the maximum-modulus principle this is a lower estimate of the sup over
    the closed disk that converges as ``samples`` grows.
    """
    if samples < 16:
        raise DomainError("at least 16 boundary samples are required")
    with np.errstate(all="ignore"):
        vals = np.abs(np.asarray(g(boundary_points(d, samples)), dtype=complex))
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValue("non-finite sample: a singularity lies on or inside the disk")
    return float(vals.max())


def principal_root(w, m: int, j: int = 1):
    """The ``j``-th complex ``m``-th root of ``w`` (``j=1`` is the principal one)."""
    w = np.asarray(w, dtype=complex)
    if m == 1:
        return w
    return w ** (1.0 / m) * np.exp(2j * np.pi * (j - 1) / m)
