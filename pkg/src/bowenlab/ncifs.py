"""Non-autonomous conformal IFS: levels, partition sums, pressure, Bowen dimension.

A level holds the branches ``phi_i^(n): X_n -> X_{n-1}``. Levels are
vectorised: ``apply(w)`` evaluates every branch at every point, ``apply_index``
evaluates a per-point branch choice. Sup norms of branch derivatives are
estimated on boundary samples (maximum modulus).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .complex_core import Disk, boundary_points, newton_solve
from .errors import DomainError, NoSignChange, NonFiniteValue, WordBudgetExceeded
from .families import FamilyDescriptor, PerturbationStep, _root_seed

KOEBE_HALF = 81.0  # ((1 + 1/2) / (1 - 1/2))**4
WORD_CAP = 2_000_000
SUP_SAMPLES = 128
WORD_SAMPLES = 64
CHUNK_POINTS = 1 << 20


class Level:
    """Base class; subclasses implement ``_run(w, idx)`` returning ``(z, dz)``."""

    index_n: int
    domain: Disk
    codomain: Disk
    probe = None

    def __len__(self):
        return self.size

    @property
    def size(self) -> int:
        raise NotImplementedError

    def _run(self, w, idx):
        raise NotImplementedError

    def apply(self, w):
        """All branches at all points: arrays of shape ``(size,) + w.shape``."""
        w = np.asarray(w, dtype=complex)
        idx = np.arange(self.size).reshape((-1,) + (1,) * w.ndim)
        return self._run(np.broadcast_to(w, (self.size,) + w.shape), np.broadcast_to(
            idx, (self.size,) + w.shape))

    def apply_index(self, idx, w):
        w = np.asarray(w, dtype=complex)
        idx = np.broadcast_to(np.asarray(idx), w.shape)
        if np.any(idx < 0) or np.any(idx >= self.size):
            raise IndexError("branch index out of range")
        return self._run(w, idx)

    def log_sup_norms(self, samples: int = SUP_SAMPLES) -> np.ndarray:
        cache = self.__dict__.setdefault("_sup_cache", {})
        if samples not in cache:
            if samples < 16:
                raise DomainError("at least 16 boundary samples are required")
            if self.size == 0:
                cache[samples] = np.zeros(0)
            else:
                _, dz = self.apply(boundary_points(self.domain, samples))
                a = np.abs(dz)
                if not np.all(np.isfinite(a)):
                    raise NonFiniteValue("non-finite branch derivative on the domain boundary")
                cache[samples] = np.log(a.max(axis=1))
        return cache[samples]

    def distortion(self, samples: int = SUP_SAMPLES) -> float:
        """Max over branches of sup|phi'| / inf|phi'| on the domain."""
        if self.size == 0:
            return 1.0
        _, dz = self.apply(boundary_points(self.domain, samples))
        a = np.abs(dz)
        return float(np.max(a.max(axis=1) / a.min(axis=1)))


class SimilarityLevel(Level):
    """``phi_i(w) = r_i * (w - center) + offset_i`` with complex ratios ``r_i``."""

    def __init__(self, ratios, offsets, domain: Disk, codomain: Disk | None = None,
                 index_n: int = 1):
        self.ratios = np.asarray(ratios, dtype=complex).reshape(-1)
        self.offsets = np.asarray(offsets, dtype=complex).reshape(-1)
        if self.ratios.shape != self.offsets.shape:
            raise DomainError("ratios and offsets must align")
        self.domain = domain
        self.codomain = codomain or domain
        self.index_n = index_n

    @property
    def size(self) -> int:
        return len(self.ratios)

    def _run(self, w, idx):
        r = self.ratios[idx]
        return r * (w - self.domain.center) + self.offsets[idx], r + 0 * w


@dataclass
class Stage:
    """One inverse step ``z = f0^{-1}((w - c)/lam)`` across all branches of a level.

    ``kind='pole'`` lands near ``loc`` (Laurent seed); ``kind='point'`` lands near
    ``anchor`` with ``f0(anchor) = anchor_value``. Arrays are indexed by branch.
    """

    kind: str
    step: PerturbationStep
    loc: np.ndarray = None
    mult: np.ndarray = None
    coeff: np.ndarray = None
    ref: np.ndarray = None
    anchor: np.ndarray = None
    anchor_value: np.ndarray = None
    anchor_deriv: np.ndarray = None
    j: int = 1


class InverseLevel(Level):
    """Branches that are compositions of inverse branches of perturbed maps."""

    def __init__(self, fam: FamilyDescriptor, stages: list, domain: Disk, codomain: Disk,
                 index_n: int = 1, labels=None, probe=None, size: int | None = None):
        self.fam = fam
        self.stages = stages
        self.domain = domain
        self.codomain = codomain
        self.index_n = index_n
        self._size = size if size is not None else len(_first_array(stages[0]))
        self.labels = labels
        self.probe = probe
        self._fill_refs()

    @property
    def size(self) -> int:
        return self._size

    def _fill_refs(self):
        # fix the root branch for multiple poles from the image of the domain center
        if self._size == 0:
            return
        w = np.full(self._size, self.domain.center)
        idx = np.arange(self._size)
        for st in self.stages:
            if st.kind == "pole" and st.ref is None and np.any(np.asarray(st.mult) > 1):
                st.ref = np.broadcast_to(st.step.pull(w), (self._size,)).copy()
            w, _ = self._stage(st, w, idx)

    def _stage(self, st: Stage, w, idx):
        fam = self.fam
        u = st.step.pull(w)
        if st.kind == "pole":
            loc = _take(st.loc, idx)
            coeff = _take(st.coeff, idx)
            mult = _take(st.mult, idx)
            off = coeff / u
            if np.any(mult > 1):
                ref = coeff / (u if st.ref is None else _take(st.ref, idx))
                off = np.array(np.broadcast_to(off, np.broadcast(off, mult).shape))
                mult_b = np.broadcast_to(mult, off.shape)
                ref_b = np.broadcast_to(ref, off.shape)
                for m in np.unique(mult_b):
                    sel = mult_b == m
                    off[sel] = _root_seed(off[sel], int(m), st.j, ref_b[sel])
            seed = loc + off
        else:
            seed = _take(st.anchor, idx) + (u - _take(st.anchor_value, idx)) / _take(
                st.anchor_deriv, idx)
        z, d = newton_solve(u, seed, fam.f0, fam.df0)
        return z, 1.0 / (st.step.lam * d)

    def _run(self, w, idx):
        dz = np.ones(w.shape, dtype=complex)
        for st in self.stages:
            w, d = self._stage(st, w, idx)
            dz = dz * d
        return w, dz


def _first_array(st: Stage):
    for a in (st.loc, st.anchor):
        if a is not None:
            return np.asarray(a).reshape(-1)
    raise DomainError("stage without per-branch data")


def _take(a, idx):
    a = np.asarray(a)
    if a.ndim == 0:
        return a
    return a[idx]


# -- systems ------------------------------------------------------------------------

class NcifsSystem:
    """A sequence of levels (list or factory ``n -> Level``) with distortion constant K."""

    def __init__(self, levels, koebe_K: float = KOEBE_HALF, stationary: bool = False,
                 provenance: dict | None = None, max_levels: int | None = None):
        if koebe_K < 1:
            raise DomainError("K must be at least 1")
        self.koebe_K = float(koebe_K)
        self.stationary = stationary
        self.provenance = dict(provenance or {})
        if callable(levels):
            self._factory: Callable[[int], Level] | None = levels
            self._levels: dict = {}
            self.max_levels = max_levels
        else:
            levels = list(levels)
            self._factory = None
            self._levels = {i + 1: lv for i, lv in enumerate(levels)}
            self.max_levels = len(levels) if not stationary else max_levels
        self._logsup_cache: dict = {}

    def level(self, n: int) -> Level:
        if n < 1:
            raise IndexError("levels are indexed from 1")
        if self.max_levels is not None and n > self.max_levels:
            raise IndexError(f"level {n} beyond the generated prefix ({self.max_levels})")
        if n not in self._levels:
            if self._factory is not None:
                self._levels[n] = self._factory(n)
            elif self.stationary:
                self._levels[n] = self._levels[1]
            else:
                raise IndexError(f"level {n} not generated")
        return self._levels[n]

    def X(self, n: int) -> Disk:
        return self.level(1).codomain if n == 0 else self.level(n).domain

    def alphabet_sizes(self, n: int) -> list:
        return [self.level(k).size for k in range(1, n + 1)]

    def with_K(self, K: float) -> "NcifsSystem":
        other = NcifsSystem.__new__(NcifsSystem)
        other.__dict__.update(self.__dict__)
        other.koebe_K = float(K)
        return other


def similarity_system(ratios, offsets=None, domain: Disk = Disk(0, 1)) -> NcifsSystem:
    """Autonomous system of similarities (K = 1) used as an engine oracle."""
    ratios = np.asarray(ratios, dtype=float)
    if offsets is None:
        span = domain.radius * (1 - ratios.max()) if ratios.size else 0.0
        offsets = domain.center + (np.linspace(-span, span, len(ratios)) if len(ratios) > 1
                                   else np.zeros(len(ratios)))
    lv = SimilarityLevel(ratios, offsets, domain)
    return NcifsSystem([lv], koebe_K=1.0, stationary=True, provenance={"kind": "similarity"})


# -- partition sums ---------------------------------------------------------------

def level_sum(level: Level, t: float, samples: int = SUP_SAMPLES) -> float:
    """Sum over branches of ``||phi_i'||**t``."""
    if t < 0:
        raise DomainError("t must be non-negative")
    ls = level.log_sup_norms(samples)
    if ls.size == 0:
        return 0.0
    return float(np.exp(logsumexp(t * ls)))


def probe_level_sum(level: Level, t: float, point=None) -> float:
    """Sum over branches of ``|phi_i'(point)|**t``; defaults to the level probe, else the centre."""
    if point is None:
        point = level.probe if level.probe is not None else level.domain.center
    if level.size == 0:
        return 0.0
    _, dz = level.apply(np.asarray([point], dtype=complex))
    return float(np.exp(logsumexp(t * np.log(np.abs(dz[:, 0])))))


def word_count(system: NcifsSystem, n: int) -> int:
    out = 1
    for k in range(1, n + 1):
        out *= system.level(k).size
    return out


def exact_log_sups(system: NcifsSystem, n: int, word_cap: int = WORD_CAP,
                   samples: int = WORD_SAMPLES) -> np.ndarray:
    """``log ||phi_w'||`` for every length-n word (chain rule along the pullback)."""
    key = (n, samples)
    if key in system._logsup_cache:
        return system._logsup_cache[key]
    if word_count(system, n) > word_cap:
        raise WordBudgetExceeded(f"{word_count(system, n)} words at depth {n} exceed {word_cap}")
    pts = boundary_points(system.X(n), samples)[None, :]
    out: list = []
    _descend(system, n, pts, np.zeros(pts.shape), out)
    res = np.concatenate(out) if out else np.zeros(0)
    system._logsup_cache[key] = res
    return res


def _descend(system, k, pts, logd, out):
    if k == 0:
        out.append(logd.max(axis=1))
        return
    lev = system.level(k)
    N, S = lev.size, pts.shape[1]
    if N == 0:
        return
    step = max(1, CHUNK_POINTS // (N * S))
    for s in range(0, pts.shape[0], step):
        z, dz = lev.apply(pts[s:s + step])
        a = np.abs(dz)
        if not np.all(np.isfinite(a)) or np.any(a == 0):
            raise NonFiniteValue("degenerate composite derivative")
        ld = logd[s:s + step][None] + np.log(a)
        _descend(system, k - 1, z.reshape(-1, S), ld.reshape(-1, S), out)


def exact_Zn(system: NcifsSystem, n: int, t: float, word_cap: int = WORD_CAP) -> float:
    ls = exact_log_sups(system, n, word_cap)
    if ls.size == 0:
        return 0.0
    return float(np.exp(logsumexp(t * ls)))


def log_product_lower_bound(system: NcifsSystem, n: int, t: float) -> float:
    total = -n * t * np.log(system.koebe_K)
    for k in range(1, n + 1):
        s = level_sum(system.level(k), t)
        if s == 0:
            return -np.inf
        total += np.log(s)
    return float(total)


def product_lower_bound(system: NcifsSystem, n: int, t: float) -> float:
    """``K^{-nt} * Z_(1)(t) ... Z_(n)(t)``."""
    return float(np.exp(log_product_lower_bound(system, n, t)))


class PressureMethod(str, enum.Enum):
    EXACT = "ExactEnumeration"
    PRODUCT = "ProductLowerBound"


@dataclass
class PressureEstimate:
    t: float
    depths: list
    log_Zn_over_n: list
    lower_pressure: float
    method: PressureMethod
    methods: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"t": self.t, "depths": self.depths, "log_Zn_over_n": self.log_Zn_over_n,
                "lower_pressure": self.lower_pressure, "method": self.method.value,
                "methods": [m.value for m in self.methods]}


def log_Zn(system: NcifsSystem, n: int, t: float, word_cap: int = WORD_CAP):
    """``(log Z_n(t), method)``, exact while affordable, product bound beyond."""
    if word_count(system, n) <= word_cap:
        ls = exact_log_sups(system, n, word_cap)
        return (float(logsumexp(t * ls)) if ls.size else -np.inf), PressureMethod.EXACT
    return log_product_lower_bound(system, n, t), PressureMethod.PRODUCT


def lower_pressure(system: NcifsSystem, t: float, max_depth: int = 6,
                   word_cap: int = WORD_CAP) -> PressureEstimate:
    """Finite-depth proxy for the liminf: min of (1/n) log Z_n over the last three depths."""
    if max_depth < 4:
        raise DomainError("max_depth must be at least 4")
    depths, vals, methods = [], [], []
    for n in range(1, max_depth + 1):
        lz, m = log_Zn(system, n, t, word_cap)
        depths.append(n)
        vals.append(lz / n)
        methods.append(m)
    tail = methods[-3:]
    method = PressureMethod.EXACT if all(m is PressureMethod.EXACT for m in tail) \
        else PressureMethod.PRODUCT
    return PressureEstimate(float(t), depths, vals, float(min(vals[-3:])), method, methods)


@dataclass
class DimensionReport:
    bowen_bracket: tuple
    t_grid: list
    pressures: list
    system_provenance: dict
    theoretical_target: float | None = None

    @property
    def estimate(self) -> float:
        return 0.5 * (self.bowen_bracket[0] + self.bowen_bracket[1])

    def to_dict(self) -> dict:
        return {"bowen_bracket": list(self.bowen_bracket), "t_grid": self.t_grid,
                "pressures": [p.to_dict() for p in self.pressures],
                "system_provenance": self.system_provenance,
                "theoretical_target": self.theoretical_target}


def bowen_dimension(system: NcifsSystem, t_lo: float = 0.0, t_hi: float = 2.0,
                    tol: float = 1e-4, max_depth: int = 6, word_cap: int = WORD_CAP,
                    theoretical_target: float | None = None) -> DimensionReport:
    """Bisection on the sign of the lower pressure."""
    if not t_lo < t_hi:
        raise DomainError("need t_lo < t_hi")
    trace = []

    def P(t):
        est = lower_pressure(system, t, max_depth, word_cap)
        trace.append(est)
        return est.lower_pressure

    if P(t_lo) < 0 or P(t_hi) > 0:
        raise NoSignChange(f"pressure does not change sign on [{t_lo}, {t_hi}]")
    lo, hi = t_lo, t_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if P(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return DimensionReport((lo, hi), [p.t for p in trace], trace, dict(system.provenance),
                           theoretical_target)


# -- audits ------------------------------------------------------------------------------

def image_enclosures(level: Level, samples: int = SUP_SAMPLES):
    """Centers and radii of disks containing each branch image of the domain."""
    c, _ = level.apply(np.asarray([level.domain.center]))
    rad = np.exp(level.log_sup_norms(samples)) * level.domain.radius * 1.01
    return c[:, 0], rad


def audit_open_set_condition(level: Level, samples: int = SUP_SAMPLES) -> bool:
    """True iff the image enclosures of all branches are pairwise disjoint."""
    if level.size < 2:
        return True
    c, rad = image_enclosures(level, samples)
    pts = np.column_stack([c.real, c.imag])
    # bucket by radius (factor 2 per bucket): disjoint disks of comparable size pack, so each
    # query below returns O(1) candidates and the audit stays near-linear in the level size
    key = np.floor(np.log2(np.maximum(rad, 1e-300))).astype(int)
    buckets = [np.nonzero(key == k)[0] for k in np.unique(key)]
    trees = [cKDTree(pts[b]) for b in buckets]
    for i, bi in enumerate(buckets):
        for j in range(i, len(buckets)):
            bj = buckets[j]
            hits = trees[j].query_ball_point(pts[bi], rad[bi] + rad[bj].max())
            lens = np.fromiter((len(h) for h in hits), int, len(hits))
            if not lens.sum():
                continue
            a = np.repeat(bi, lens)
            b = bj[np.concatenate([np.asarray(h, dtype=int) for h in hits if h])]
            keep = a != b
            a, b = a[keep], b[keep]
            if np.any(np.abs(c[a] - c[b]) - rad[a] - rad[b] <= 0):
                return False
    return True


def audit_containment(level: Level, samples: int = 64, slack: float = 1e-9) -> bool:
    """True iff every branch maps the domain boundary into the codomain."""
    if level.size == 0:
        return True
    z, _ = level.apply(boundary_points(level.domain, samples))
    return bool(np.all(level.codomain.contains(z, closed=True, slack=slack)))


def audit_distortion(system: NcifsSystem, n: int, samples: int = SUP_SAMPLES) -> float:
    """Empirical per-branch distortion constant over the first n levels."""
    return max(system.level(k).distortion(samples) for k in range(1, n + 1))


def audit_contraction(system: NcifsSystem, depth: int = 3, word_cap: int = 200_000) -> float:
    """Max sup-norm of depth-``depth`` composite derivatives (or a product bound)."""
    if word_count(system, depth) <= word_cap:
        return float(np.exp(exact_log_sups(system, depth, word_cap).max()))
    return float(np.exp(sum(system.level(k).log_sup_norms().max() for k in range(1, depth + 1))))


def audit_subexponential(system: NcifsSystem, n: int) -> float:
    """Smallest C with #I^(k) <= C*k over the generated prefix."""
    return max(system.level(k).size / k for k in range(1, n + 1))
