"""Constant ledger and the numerical comparability audits behind it.

Every constant a construction uses is stored with its provenance:
``analytic`` (closed form), ``audited`` (measured, then inflated by a safety
factor) or ``user`` (supplied in the config).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..complex_core import Disk, boundary_points
from ..families import FamilyDescriptor, pole_preimage, poles_by_count

SAFETY = 1.5
RESOLUTION = 1e-8
PROVENANCES = ("analytic", "audited", "user")


@dataclass(frozen=True)
class Constant:
    value: float
    provenance: str
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def to_dict(self) -> dict:
        v = self.value
        if isinstance(v, complex):
            v = [v.real, v.imag]
        elif isinstance(v, (np.integer,)):
            v = int(v)
        elif isinstance(v, (np.floating,)):
            v = float(v)
        out = {"value": v, "provenance": self.provenance}
        if self.note:
            out["note"] = self.note
        return out


class ConstantLedger(dict):
    """name -> Constant, serialisable in insertion order."""

    def put(self, name: str, value, provenance: str, note: str = "") -> "ConstantLedger":
        self[name] = Constant(value, provenance, note)
        return self

    def value(self, name: str):
        return self[name].value

    def to_dict(self) -> dict:
        return {k: c.to_dict() for k, c in self.items()}


def pstar_poles(fam: FamilyDescriptor, count: int, multiplicity: int | None = None):
    """The ``count`` smallest poles of P* (optionally of one multiplicity), |a| > 1."""
    floor = max(fam.pstar_min_modulus, 1.0)
    return poles_by_count(fam, count, min_modulus=floor, multiplicity=multiplicity)


def _audit_poles(fam: FamilyDescriptor, near: int = 12):
    # a handful of small poles plus a few far ones
    tab = pstar_poles(fam, 1200)
    idx = sorted(set(list(range(min(near, len(tab)))) + [i for i in (50, 200, 1000)
                                                          if i < len(tab)]))
    return tab.location[idx], tab.multiplicity[idx], tab.coeff[idx]


def _resolvable(a, m, c, w_max: float) -> bool:
    # the preimage offset from the pole must be well above the spacing of doubles at a
    return abs(c / w_max) ** (1.0 / m) > RESOLUTION * max(1.0, abs(a))


@lru_cache(maxsize=64)
def comparability_K(fam: FamilyDescriptor, S: float, samples: int = 32) -> float:
    """Constant K in ``|(f0^{-1})'(z)| ~ |z|^{-(m+1)/m} |a|^{-beta/m}``.

    Branches to each audited pole ``a1`` are evaluated on the circles
    ``|z - a2| = S`` around audited poles ``a2``; the worst two-sided ratio is
    inflated by the safety factor.
    """
    loc, mult, coeff = _audit_poles(fam)
    worst = 1.0
    for a2 in loc:
        z = np.concatenate([[a2], boundary_points(Disk(a2, S), samples)])
        for a1, m, c in zip(loc, mult, coeff):
            if not _resolvable(a1, m, c, abs(a2) + S):
                continue
            zeta, d = pole_preimage(fam, z, a1, m, c)
            model = np.abs(z) ** (-(m + 1) / m) * abs(a1) ** (-fam.beta / m)
            r = (1.0 / np.abs(d)) / model
            worst = max(worst, float(r.max()), float(1.0 / r.min()))
    return SAFETY * worst


def component_diameter(fam: FamilyDescriptor, a, m, c, R: float, samples: int = 64) -> float:
    """Diameter of the component of ``f0^{-1}({|w| > R})`` around the pole ``a``."""
    w = R * np.exp(2j * np.pi * np.arange(samples) / samples)
    ref = np.full(samples, w[0])
    z = np.concatenate([pole_preimage(fam, w, a, m, c, j, ref=ref if m > 1 else None)[0]
                        for j in range(1, int(m) + 1)])
    return float(np.max(np.abs(z[:, None] - z[None, :])))


@lru_cache(maxsize=64)
def diameter_L(fam: FamilyDescriptor, R_min: float) -> float:
    """Constant L in ``diam B_a(R) <= L R^{-1/m} |a|^{-beta/m}`` for ``R >= R_min``."""
    loc, mult, coeff = _audit_poles(fam)
    worst = 1.0
    for R in R_min * np.array([1.0, 2.0, 8.0, 64.0]):
        for a, m, c in zip(loc, mult, coeff):
            if not _resolvable(a, m, c, R):
                continue
            d = component_diameter(fam, a, m, c, R)
            worst = max(worst, d * R ** (1 / m) * abs(a) ** (fam.beta / m))
    return SAFETY * worst


def family_K_emp(fam: FamilyDescriptor, S: float | None = None) -> float:
    """Un-inflated branch-derivative comparability factor."""
    S = fam.S_default if S is None else S
    return comparability_K(fam, S) / SAFETY
