"""Cover sums for the escaping set and the choice of the cut-off radius R3."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NotSupercritical, ScheduleInfeasible
from ..families import (
    FamilyDescriptor, PerturbationSequence, PoleTable, ZERO_PERTURBATION, pole_preimage,
    poles_by_count, theoretical_dimension,
)
from ..poles import _counting_fit, chunked_sum
from .constants import comparability_K, diameter_L, pstar_poles

DIRECT_MAX_DEPTH = 3
DIRECT_MAX_WORDS = 50_000
CURVE_SAMPLES = 48
SUPERCRITICAL_MARGIN = 0.02


def _exponent_M(fam: FamilyDescriptor) -> float:
    M = fam.mult_bound_M
    return (fam.beta + M + 1) / M


def _as_table(alphabet) -> PoleTable:
    if isinstance(alphabet, PoleTable):
        return alphabet
    alphabet = list(alphabet)
    if not alphabet:
        return PoleTable(np.zeros(0, complex), np.zeros(0, int), np.zeros(0, complex))
    return PoleTable.from_records(alphabet)


@dataclass
class CoverSumReport:
    t: float
    levels: list
    sigma_n: list
    per_level_factor: float
    sigma_direct: list = field(default_factory=list)
    R: float = 0.0
    constants: dict = field(default_factory=dict)

    def bounded(self) -> bool:
        return self.per_level_factor <= 1

    def to_dict(self) -> dict:
        return {"t": self.t, "levels": list(self.levels), "sigma_n": list(self.sigma_n),
                "per_level_factor": self.per_level_factor,
                "sigma_direct": list(self.sigma_direct), "R": self.R,
                "constants": self.constants}


def _diameters(curves: np.ndarray) -> np.ndarray:
    out = np.empty(len(curves))
    step = max(1, 2_000_000 // max(1, curves.shape[1] ** 2))
    for i in range(0, len(curves), step):
        c = curves[i:i + step]
        out[i:i + step] = np.abs(c[:, :, None] - c[:, None, :]).max(axis=(1, 2))
    return out


def _direct_sums(fam, tab: PoleTable, t, R, n_max, perturb) -> list:
    """Sum of ``diam^t`` over the cylinder components of the cover, by enumeration.

    A word ``(a_1, ..., a_n)`` contributes the component
    ``f_1^{-1}(a_1 <- a_2) o ... o f_n^{-1}(a_n <- inf)(B_R)``; its boundary is
    tracked by pulling back samples of ``|w| = R``.
    """
    N = len(tab)
    w = R * np.exp(2j * np.pi * np.arange(CURVE_SAMPLES) / CURVE_SAMPLES)
    out = []
    for n in range(1, min(n_max, DIRECT_MAX_DEPTH) + 1):
        if N ** n > DIRECT_MAX_WORDS:
            break
        # innermost stage: all branches at a_n form one component
        u = perturb.step(n).pull(w)
        pieces = []
        for a, m, c in zip(tab.location, tab.multiplicity, tab.coeff):
            z = [pole_preimage(fam, u, a, m, c, j, ref=np.full(u.shape, u[0]) if m > 1 else None)[0]
                 for j in range(1, int(m) + 1)]
            pieces.append(np.concatenate(z))
        width = max(len(p) for p in pieces)
        curves = np.array([np.resize(p, width) for p in pieces])
        for k in range(n - 1, 0, -1):
            u = perturb.step(k).pull(curves)  # (W, P)
            new = []
            for a, m, c in zip(tab.location, tab.multiplicity, tab.coeff):
                ref = u.mean(axis=1, keepdims=True) if m > 1 else None
                for j in range(1, int(m) + 1):
                    new.append(pole_preimage(fam, u, a, m, c, j,
                                             ref=None if ref is None else np.broadcast_to(ref, u.shape))[0])
            curves = np.concatenate(new, axis=0)
        out.append(chunked_sum(_diameters(curves) ** t))
    return out


def escape_cover_sum(fam: FamilyDescriptor, t: float, S: float | None = None, alphabet=(),
                     n_max: int = 3, perturb: PerturbationSequence = ZERO_PERTURBATION,
                     R: float | None = None, direct: bool = True) -> CoverSumReport:
    """Cover sums ``Sigma_n`` of the escaping set over words in ``alphabet``.

    ``sigma_n`` is the chained upper bound
    ``L^t (2/S)^{t/M} (M K^t sum_a |a|^{-t(beta+M+1)/M})^n``; ``sigma_direct``
    holds enumerated sums for short words over small alphabets.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    S = fam.S_default if S is None else S
    tab = _as_table(alphabet)
    M = fam.mult_bound_M
    K = comparability_K(fam, S)
    mods = np.abs(tab.location)
    if R is None:
        R = 8 * max(float(mods.max()) if len(mods) else 1.0, fam.R_star, 1.0)
    L = diameter_L(fam, R)
    u = t * _exponent_M(fam)
    factor = M * K ** t * chunked_sum(mods ** (-u)) if len(mods) else 0.0
    levels = list(range(1, n_max + 1))
    pre = L ** t * (2 / S) ** (t / M)
    sigma = [pre * factor ** n for n in levels]
    sig_direct = _direct_sums(fam, tab, t, R, n_max, perturb) if direct and len(tab) else \
        ([0.0] * n_max if direct else [])
    return CoverSumReport(t=t, levels=levels, sigma_n=sigma, per_level_factor=float(factor),
                          sigma_direct=sig_direct, R=float(R),
                          constants={"K": {"value": K, "provenance": "audited"},
                                     "L": {"value": L, "provenance": "audited"},
                                     "M": {"value": M, "provenance": "analytic"},
                                     "S": {"value": S, "provenance": "analytic"},
                                     "alphabet_size": len(tab)})


@dataclass
class R3Selection:
    R3: float
    index: int
    tail: float
    rho_hat: float
    C: float
    extrapolated: bool
    threshold: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def select_R3_details(fam: FamilyDescriptor, t: float, pole_budget: int = 100_000,
                      S: float | None = None) -> R3Selection:
    S = fam.S_default if S is None else S
    poles = pstar_poles(fam, pole_budget)
    mods = np.sort(np.abs(poles.location))
    fit = _counting_fit(mods)
    if fit is None:
        raise ScheduleInfeasible("too few poles to model the Borel tail")
    reg = fit[0]
    rho_hat, C = float(reg.slope), float(np.exp(reg.intercept))
    u = t * _exponent_M(fam)
    if u <= rho_hat + SUPERCRITICAL_MARGIN:
        raise NotSupercritical(
            f"t={t} gives Borel exponent {u:.4g} <= fitted order {rho_hat:.4g} "
            f"(+{SUPERCRITICAL_MARGIN}); the tail sums diverge "
            f"(threshold {theoretical_dimension(fam.order_rho, fam.beta, fam.mult_bound_M):.4g})")
    thr = 1.0 / (fam.mult_bound_M * comparability_K(fam, S) ** t)
    r_max = mods[-1]
    beyond = C * rho_hat * r_max ** (rho_hat - u) / (u - rho_hat)
    terms = mods ** (-u)
    suffix = np.cumsum(terms[::-1])[::-1] + beyond  # tail over |a| >= mods[i]
    # only cut between distinct moduli, so every pole of modulus >= R3 is counted
    first = np.r_[True, mods[1:] > mods[:-1] * (1 + 1e-12)]
    ok = np.nonzero((suffix <= thr) & first)[0]
    if len(ok):
        i = int(ok[0])
        return R3Selection(float(mods[i]), i, float(suffix[i]), rho_hat, C, False, thr)
    # the whole catalogue is needed and still too heavy: solve the integral tail for R
    R = (thr * (u - rho_hat) / (C * rho_hat)) ** (1.0 / (rho_hat - u))
    return R3Selection(float(R), len(mods), float(thr), rho_hat, C, True, thr)


def select_R3(fam: FamilyDescriptor, t: float, pole_budget: int = 100_000) -> float:
    """Least pole modulus beyond which ``M K^t sum |a|^{-t(beta+M+1)/M} <= 1``."""
    return select_R3_details(fam, t, pole_budget).R3


def cover_alphabet(fam: FamilyDescriptor, R3: float, count: int) -> PoleTable:
    """The ``count`` smallest P* poles with modulus at least ``R3``."""
    floor = max(R3 * (1 - 1e-12), fam.pstar_min_modulus, 1.0)
    return poles_by_count(fam, count, min_modulus=floor)
