"""Independent checks: limit points, forward orbits, derivative blow-up, Moran roots.

Forward orbits are run in mpmath because errors in a limit point are amplified
by the forward derivative, which grows geometrically with depth.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import DomainError, InvalidAddress, NoConvergence, PoleHit
from .families import (
    FamilyDescriptor, PerturbationSequence, ZERO_PERTURBATION, derivative, evaluate,
)
from .ncifs import InverseLevel, NcifsSystem

DEFAULT_DPS = 120
MP_MAX_ITER = 200
BLOWUP_THRESHOLD = 1e3


@dataclass(frozen=True)
class SymbolicAddress:
    word: tuple

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(int(i) for i in self.word))

    @property
    def depth(self) -> int:
        return len(self.word)

    def prefix(self, k: int) -> "SymbolicAddress":
        return SymbolicAddress(self.word[:k])

    def validate(self, system: NcifsSystem):
        for k, i in enumerate(self.word, start=1):
            try:
                size = system.level(k).size
            except IndexError as e:
                raise InvalidAddress(f"depth {k} beyond the generated levels") from e
            if not 0 <= i < size:
                raise InvalidAddress(f"letter {i} at depth {k} outside alphabet of size {size}")


def sample_addresses(system: NcifsSystem, depth: int, count: int, seed: int = 0,
                     method: str = "halton") -> list:
    """Addresses from a scrambled Halton sequence or seeded uniform draws."""
    sizes = np.array(system.alphabet_sizes(depth))
    if method == "halton":
        x = qmc.Halton(d=depth, seed=seed).random(count)
    elif method == "uniform":
        x = np.random.default_rng(seed).random((count, depth))
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    idx = np.minimum((x * sizes).astype(int), sizes - 1)
    return [SymbolicAddress(row) for row in idx]


# -- limit points -------------------------------------------------------------------

@dataclass
class StageRecord:
    """One inverse step of a limit-point computation (in application order)."""
    level: int
    output: object
    target: complex  # pole or anchor the output sits next to


def _mp_newton(fam: FamilyDescriptor, u, seed, tol):
    z = mpmath.mpc(seed)
    for _ in range(MP_MAX_ITER):
        dz = (fam.f0_mp(z) - u) / fam.df0_mp(z)
        z -= dz
        if abs(dz) <= tol * max(1, abs(z)):
            return z
    raise NoConvergence("high-precision refinement of an inverse branch did not converge")


def _trace(system: NcifsSystem, addr: SymbolicAddress, dps: int | None):
    addr.validate(system)
    n = addr.depth
    w = complex(system.X(n).center)
    recs: list = []
    if dps is None:
        for k in range(n, 0, -1):
            z, _ = system.level(k).apply_index(np.array([addr.word[k - 1]]), np.array([w]))
            w = complex(z[0])
            recs.append(StageRecord(k, w, w))
        return w, recs
    with mpmath.workdps(dps):
        tol = mpmath.mpf(10) ** (-(dps - 10))
        wm = mpmath.mpc(w)
        for k in range(n, 0, -1):
            lv = system.level(k)
            i = addr.word[k - 1]
            if not isinstance(lv, InverseLevel):
                z, _ = lv.apply_index(np.array([i]), np.array([complex(wm)]))
                wm = mpmath.mpc(complex(z[0]))
                recs.append(StageRecord(k, wm, complex(wm)))
                continue
            idx = np.array([i])
            for st in lv.stages:
                zf, _ = lv._stage(st, np.array([complex(wm)]), idx)
                u = (wm - mpmath.mpc(st.step.c)) / mpmath.mpc(st.step.lam)
                wm = _mp_newton(lv.fam, u, complex(zf[0]), tol)
                src = st.loc if st.kind == "pole" else st.anchor
                src = np.asarray(src)
                recs.append(StageRecord(k, wm, complex(src if src.ndim == 0 else src[i])))
        return wm, recs


def sample_limit_point(system: NcifsSystem, addr: SymbolicAddress, dps: int | None = None):
    """``phi_omega`` applied to the centre of ``X_n``; an mpc when ``dps`` is given."""
    return _trace(system, addr, dps)[0]


# -- forward orbits -----------------------------------------------------------------

@dataclass
class OrbitTrace:
    start: complex
    iterates: list
    derivative_moduli: list
    escaped_past: float | None = None
    truncated: bool = False

    @property
    def steps(self) -> int:
        return len(self.iterates) - 1

    def to_dict(self) -> dict:
        return {"start": [self.start.real, self.start.imag],
                "iterates": [[z.real, z.imag] for z in self.iterates],
                "derivative_moduli": list(self.derivative_moduli),
                "escaped_past": self.escaped_past, "truncated": self.truncated}


def forward_orbit(fam: FamilyDescriptor, perturb: PerturbationSequence, z0, steps: int,
                  dps: int | None = None, radius: float | None = None) -> OrbitTrace:
    """Iterate ``F^j = f_j o ... o f_1`` with ``f_j = lam_j f0 + c_j``.

    Landing on a pole ends the trace early (``truncated``). ``escaped_past`` is
    the smallest recorded modulus if it exceeds ``radius`` (default R*).
    """
    radius = fam.R_star if radius is None else radius
    its = [complex(z0)]
    ders = [1.0]
    truncated = False
    if dps is None:
        z, d = complex(z0), 1.0
        for j in range(1, steps + 1):
            s = perturb.step(j)
            try:
                d *= abs(derivative(fam, s, z))
                z = evaluate(fam, s, z)
            except PoleHit:
                truncated = True
                break
            its.append(z)
            ders.append(d)
    else:
        with mpmath.workdps(dps):
            z, d = mpmath.mpc(z0), mpmath.mpf(1)
            for j in range(1, steps + 1):
                s = perturb.step(j)
                lam = mpmath.mpc(s.lam)
                try:
                    d *= abs(lam * fam.df0_mp(z))
                    z = lam * fam.f0_mp(z) + mpmath.mpc(s.c)
                except ZeroDivisionError:
                    truncated = True
                    break
                if not mpmath.isfinite(z):
                    truncated = True
                    break
                its.append(complex(z))
                ders.append(float(d))
    low = min(abs(z) for z in its)
    return OrbitTrace(its[0], its, ders, escaped_past=low if low > radius else None,
                      truncated=truncated)


def _stage_counts(system: NcifsSystem, depth: int) -> list:
    """Number of forward steps contributed by each of levels 1..depth."""
    out = []
    for k in range(1, depth + 1):
        lv = system.level(k)
        out.append(len(lv.stages) if isinstance(lv, InverseLevel) else 1)
    return out


@dataclass
class BlowupReport:
    passed: bool
    moduli: list = field(default_factory=list)  # per address: forward |F'| at level boundaries
    inside: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def derivative_blowup_report(system: NcifsSystem, addresses: list,
                             fam: FamilyDescriptor | None = None,
                             perturb: PerturbationSequence = ZERO_PERTURBATION,
                             dps: int = DEFAULT_DPS) -> BlowupReport:
    rep = BlowupReport(True)
    for addr in addresses:
        if addr.depth < 4:
            raise DomainError("blow-up audit needs addresses of depth at least 4")
        n = addr.depth
        inverse = all(isinstance(system.level(k), InverseLevel) for k in range(1, n + 1))
        if inverse and fam is not None:
            z0 = sample_limit_point(system, addr, dps=dps)
            counts = _stage_counts(system, n)
            orb = forward_orbit(fam, perturb, z0, sum(counts), dps=dps)
            marks = np.cumsum(counts)
            if orb.truncated:
                rep.passed = False
                rep.moduli.append([])
                rep.inside.append(False)
                continue
            mods = [orb.derivative_moduli[m] for m in marks]
            pts = [orb.iterates[m] for m in marks]
        else:
            # forward derivative of the level composite = 1 / |inverse derivative|
            mods, pts, d = [], [], 1.0
            pts = [_shift(system, addr, k) for k in range(1, n + 1)]
            for k in range(1, n + 1):
                lv = system.level(k)
                z_next = pts[k - 1]
                _, dz = lv.apply_index(np.array([addr.word[k - 1]]), np.array([z_next]))
                d /= abs(complex(dz[0]))
                mods.append(d)
        inside = all(bool(system.X(k).contains(np.array([p]), closed=True, slack=1e-9)[0])
                     for k, p in zip(range(1, n + 1), pts))
        grows = all(b > a for a, b in zip(mods[1:], mods[2:])) and mods[-1] > BLOWUP_THRESHOLD
        rep.moduli.append([float(m) for m in mods])
        rep.inside.append(inside)
        rep.passed = rep.passed and inside and grows
    return rep


def _shift(system: NcifsSystem, addr: SymbolicAddress, k: int) -> complex:
    """The point ``phi^(k+1)_{w_k+1} o ... o phi^(n)_{w_n}(centre of X_n)`` in ``X_k``."""
    n = addr.depth
    w = complex(system.X(n).center)
    for j in range(n, k, -1):
        z, _ = system.level(j).apply_index(np.array([addr.word[j - 1]]), np.array([w]))
        w = complex(z[0])
    return w


def derivative_blowup_audit(system: NcifsSystem, addresses: list,
                            fam: FamilyDescriptor | None = None,
                            perturb: PerturbationSequence = ZERO_PERTURBATION,
                            dps: int = DEFAULT_DPS) -> bool:
    """Forward derivatives along sampled limit points grow strictly past depth 2 and exceed 1e3,
    with the orbit staying in the construction's disks."""
    return derivative_blowup_report(system, addresses, fam, perturb, dps).passed


# -- escape realisation -------------------------------------------------------------

@dataclass
class EscapeWitness:
    address: SymbolicAddress
    min_modulus: float
    max_pole_distance: float
    steps: int
    escaped: bool
    near_poles: bool

    def to_dict(self) -> dict:
        return {"address": list(self.address.word), "min_modulus": self.min_modulus,
                "max_pole_distance": self.max_pole_distance, "steps": self.steps,
                "escaped": self.escaped, "near_poles": self.near_poles}


def escape_witness(system: NcifsSystem, addr: SymbolicAddress, fam: FamilyDescriptor,
                   perturb: PerturbationSequence, R2: float, S: float,
                   dps: int = DEFAULT_DPS) -> EscapeWitness:
    """Forward orbit of a limit point checked against the scheduled poles.

    The j-th iterate is expected within ``S`` of the pole targeted by the
    (j+1)-th inverse step; the final iterate is the centre of ``X_n``.
    """
    z0, recs = _trace(system, addr, dps)
    scheduled = [r.target for r in reversed(recs)] + [complex(system.X(addr.depth).center)]
    steps = len(recs)
    orb = forward_orbit(fam, perturb, z0, steps, dps=dps, radius=R2)
    its = np.array(orb.iterates)
    dist = np.abs(its - np.array(scheduled[:len(its)]))
    mods = np.abs(its)
    return EscapeWitness(addr, float(mods.min()), float(dist.max()), orb.steps,
                         escaped=bool(not orb.truncated and mods.min() > R2),
                         near_poles=bool(not orb.truncated and dist.max() < S))


# -- Moran oracle -------------------------------------------------------------------

def moran_oracle(ratios) -> float:
    """Root of ``sum r_i^t = 1``."""
    r = np.asarray(list(ratios), dtype=float)
    if r.size == 0:
        raise DomainError("at least one ratio is required")
    if np.any(r <= 0) or np.any(r >= 1):
        raise DomainError("ratios must lie in (0, 1)")
    if r.size == 1:
        return 0.0
    hi = np.log(r.size) / -np.log(r.max()) * (1 + 1e-9)  # exact root when all ratios agree
    return float(optimize.bisect(lambda t: np.sum(r ** t) - 1.0, 0.0, hi, xtol=1e-13,
                                 rtol=4 * np.finfo(float).eps, maxiter=200))
