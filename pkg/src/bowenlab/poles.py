"""Borel series over pole sets: partial sums, order estimates, M* detection."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, InsufficientData
from .families import PoleTable

CHUNK = 1024
MIN_POLES = 50


@dataclass(frozen=True)
class BorelSum:
    exponent_t: float
    max_modulus: float
    partial_sum: float
    term_count: int


class EstimateMethod(str, enum.Enum):
    COUNTING_REGRESSION = "CountingRegression"
    SUM_RATIO = "SumRatio"


@dataclass(frozen=True)
class ExponentEstimate:
    rho_hat: float
    ci_halfwidth: float
    method: EstimateMethod
    sample_range: tuple


def _moduli(poles) -> tuple[np.ndarray, np.ndarray]:
    tab = PoleTable.from_records(poles)
    return tab.modulus, tab.multiplicity


def chunked_sum(x: np.ndarray) -> float:
    """Fixed-order reduction: pairwise within 1024-chunks, then across chunks."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    pad = (-x.size) % CHUNK
    parts = np.pad(x, (0, pad)).reshape(-1, CHUNK).sum(axis=1)
    return float(np.sum(parts))


def borel_terms(moduli: np.ndarray, t: float) -> np.ndarray:
    moduli = np.asarray(moduli, dtype=float)
    moduli = moduli[moduli >= 1.0]
    return moduli ** (-t)


def borel_partial_sum(poles, t: float, restrict_mult: int | None = None) -> BorelSum:
    """Sum of ``|a|^{-t}`` over poles with ``|a| >= 1`` (optionally one multiplicity)."""
    if t <= 0:
        raise DomainError("t must be positive")
    mod, mult = _moduli(poles)
    if restrict_mult is not None:
        mod = mod[mult == restrict_mult]
    keep = mod[mod >= 1.0]
    return BorelSum(float(t), float(mod.max()) if mod.size else 0.0,
                    chunked_sum(keep ** (-t)), int(keep.size))


def _counting_fit(mod: np.ndarray):
    mod = np.sort(mod[mod > 0])
    lo = max(1.0, mod[min(len(mod) - 1, 9)])
    hi = mod[-1]
    if hi <= 2 * lo:
        return None
    # dyadic checkpoints across the sampled range
    r = lo * 2.0 ** np.arange(0, int(np.floor(np.log2(hi / lo))) + 1)
    r = r[r <= hi]
    counts = np.searchsorted(mod, r, side="right")
    ok = counts > 0
    if ok.sum() < 3:
        return None
    fit = stats.linregress(np.log(r[ok]), np.log(counts[ok]))
    return fit, (float(r[ok][0]), float(r[ok][-1])), int(ok.sum())


def estimate_order(poles) -> ExponentEstimate:
    """Slope of log n(r) against log r over dyadic radii."""
    mod, _ = _moduli(poles)
    if mod.size < MIN_POLES:
        raise InsufficientData(f"need at least {MIN_POLES} poles, got {mod.size}")
    res = _counting_fit(mod)
    if res is None:
        raise InsufficientData("pole moduli span less than one dyadic range")
    fit, rng, k = res
    half = float(stats.t.ppf(0.975, max(k - 2, 1)) * fit.stderr) if k > 2 else 0.0
    return ExponentEstimate(float(fit.slope), half, EstimateMethod.COUNTING_REGRESSION, rng)


def detect_mult_star(poles, rho: float, tol: float = 0.1) -> int:
    """Largest multiplicity whose pole sub-family has counting exponent ``rho``."""
    if rho <= 0:
        raise DomainError("rho must be positive")
    mod, mult = _moduli(poles)
    if mod.size == 0:
        raise InsufficientData("no poles")
    populous = []
    for m in sorted(np.unique(mult), reverse=True):
        sub = mod[mult == m]
        if sub.size < MIN_POLES:
            continue
        populous.append(int(m))
        res = _counting_fit(sub)
        if res is not None and abs(res[0].slope - rho) <= tol:
            return int(m)
    if populous:
        return populous[0]
    raise InsufficientData("no multiplicity class has enough poles")
