"""Catalogued meromorphic families, their poles and local inverse branches.

Each family is a closed-form catalog entry: pole locations, multiplicities
and Laurent leading coefficients are analytic facts, not computed by search.
Affine perturbations ``f_n = lam_n * f0 + c_n`` are carried by
:class:`PerturbationStep`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .complex_core import Disk, boundary_points, newton_solve
from .errors import BranchDomainInvalid, DomainError, PoleHit, Unsupported

POLE_HIT_DISTANCE = 1e-13
RANDOM_BLOCK = 64


class FamilyId(str, enum.Enum):
    TAN_POWER = "TanPower"
    ZSINZ = "ZSinZ"
    ZCOS_SQRT_Z = "ZCosSqrtZ"
    RATIONAL_EXP = "RationalExp"
    FORMULA_ONLY = "FormulaOnly"


@dataclass(frozen=True)
class FamilyDescriptor:
    """A meromorphic family ``f0`` plus the analytic metadata the constructions use.

    ``sing_values`` lists isolated singular values of ``f0^{-1}``; infinite
    clusters are covered by ``sing_radius`` (all remaining singular values lie
    in the closed disk of that radius about 0). ``pstar_min_modulus`` cuts
    out the finitely many poles excluded from the co-finite set P*.
    """

    family_id: FamilyId
    order_rho: float
    beta: float
    mult_bound_M: int
    mult_star: int
    mayer_q: int = 1
    mayer_alpha: float = 0.0
    mayer_Q: float = 1.0
    divergence_type: bool = True
    mu: complex = 1.0
    m_power: int = 1
    rat_num: tuple = ()
    rat_den: tuple = ()
    sing_values: tuple = ()
    sing_radius: float = 0.0
    pstar_min_modulus: float = 1.0
    R_star: float = 1.0
    R_dagger: float = 1.0
    S_default: float = 0.5
    infinity_asymptotic: bool = False

    def __post_init__(self):
        if not 1 <= self.mult_star <= self.mult_bound_M:
            raise DomainError("need 1 <= mult_star <= mult_bound_M")
        if not self.mayer_alpha > -1 - 1 / self.mayer_q:
            raise DomainError("mayer_alpha must exceed -1 - 1/q")
        if self.order_rho <= 0 or self.beta < 0:
            raise DomainError("need rho > 0 and beta >= 0")

    @property
    def numeric(self) -> bool:
        return self.family_id is not FamilyId.FORMULA_ONLY

    @property
    def S_star(self) -> float:
        return min(2 * self.R_star, self.R_dagger)

    def _require_numeric(self):
        if not self.numeric:
            raise Unsupported("FormulaOnly families carry metadata only")

    # -- the unperturbed map and its derivative (vectorised) -------------------
    def f0(self, z):
        self._require_numeric()
        z = np.asarray(z, dtype=complex)
        fid = self.family_id
        if fid is FamilyId.TAN_POWER:
            return self.mu * np.tan(z) ** self.m_power
        if fid is FamilyId.ZSINZ:
            return 1.0 / (z * np.sin(z))
        if fid is FamilyId.ZCOS_SQRT_Z:
            return 1.0 / (z * _cos_sqrt(z))
        ez = np.exp(z)
        return np.polyval(self.rat_num, ez) / np.polyval(self.rat_den, ez)

    def df0(self, z):
        self._require_numeric()
        z = np.asarray(z, dtype=complex)
        fid = self.family_id
        if fid is FamilyId.TAN_POWER:
            t = np.tan(z)
            m = self.m_power
            return self.mu * m * t ** (m - 1) * (1 + t * t)
        if fid is FamilyId.ZSINZ:
            s = np.sin(z)
            return -(s + z * np.cos(z)) / (z * s) ** 2
        if fid is FamilyId.ZCOS_SQRT_Z:
            c = _cos_sqrt(z)
            return -(c - 0.5 * _sqrt_sin_sqrt(z)) / (z * c) ** 2
        ez = np.exp(z)
        p, q = np.polyval(self.rat_num, ez), np.polyval(self.rat_den, ez)
        dp = np.polyval(np.polyder(self.rat_num), ez)
        dq = np.polyval(np.polyder(self.rat_den), ez)
        return (dp * q - p * dq) / q ** 2 * ez

    # -- extended-precision twins used by the oracle paths ------------------------
    def f0_mp(self, z):
        self._require_numeric()
        fid = self.family_id
        if fid is FamilyId.TAN_POWER:
            return mpmath.mpc(self.mu) * mpmath.tan(z) ** self.m_power
        if fid is FamilyId.ZSINZ:
            return 1 / (z * mpmath.sin(z))
        if fid is FamilyId.ZCOS_SQRT_Z:
            return 1 / (z * mpmath.cos(mpmath.sqrt(z)))
        ez = mpmath.exp(z)
        return mpmath.polyval(list(self.rat_num), ez) / mpmath.polyval(list(self.rat_den), ez)

    def df0_mp(self, z):
        self._require_numeric()
        fid = self.family_id
        if fid is FamilyId.TAN_POWER:
            t = mpmath.tan(z)
            m = self.m_power
            return mpmath.mpc(self.mu) * m * t ** (m - 1) * (1 + t * t)
        if fid is FamilyId.ZSINZ:
            s = mpmath.sin(z)
            return -(s + z * mpmath.cos(z)) / (z * s) ** 2
        if fid is FamilyId.ZCOS_SQRT_Z:
            r = mpmath.sqrt(z)
            c = mpmath.cos(r)
            return -(c - r * mpmath.sin(r) / 2) / (z * c) ** 2
        return mpmath.diff(self.f0_mp, z)

    def singular_distance(self, u):
        """Distance from the point(s) ``u`` to the singular values of ``f0^{-1}``."""
        u = np.asarray(u, dtype=complex)
        d = np.full(u.shape, np.inf)
        for v in self.sing_values:
            d = np.minimum(d, np.abs(u - v))
        if self.sing_radius > 0:
            d = np.minimum(d, np.maximum(np.abs(u) - self.sing_radius, 0.0))
        return d


def _cos_sqrt(z):
    # cos(sqrt z) is entire; principal sqrt is fine for either branch
    return np.cos(np.sqrt(z))


def _sqrt_sin_sqrt(z):
    r = np.sqrt(z)
    return r * np.sin(r)


# -- catalog -----------------------------------------------------------------

def tan_power(m: int = 1, mu: complex = 1.0) -> FamilyDescriptor:
    """``mu * tan(z)**m``: rho=1, beta=0, every pole of multiplicity m."""
    if m < 1:
        raise DomainError("m must be >= 1")
    mu = complex(mu)
    sing = (mu * 1j ** m, mu * (-1j) ** m) + ((0j,) if m >= 2 else ())
    dist = min(abs(np.pi / 2 - v) for v in sing)
    return FamilyDescriptor(
        FamilyId.TAN_POWER, order_rho=1.0, beta=0.0, mult_bound_M=m, mult_star=m,
        mayer_q=m, mayer_alpha=0.0, mu=mu, m_power=m, sing_values=sing,
        pstar_min_modulus=0.0, R_star=0.45 * dist, R_dagger=np.pi / 2, S_default=0.5,
    )


def z_sin_z() -> FamilyDescriptor:
    """``1/(z sin z)``: poles n*pi, simple except the double pole at 0."""
    return FamilyDescriptor(
        FamilyId.ZSINZ, order_rho=1.0, beta=1.0, mult_bound_M=1, mult_star=1,
        mayer_q=1, mayer_alpha=1.0, sing_values=(0j,), sing_radius=0.5496,
        pstar_min_modulus=1.0, R_star=1.25, R_dagger=np.pi / 2, S_default=0.5,
    )


def z_cos_sqrt_z() -> FamilyDescriptor:
    """``1/(z cos sqrt z)``: poles 0 and ((2n+1)pi/2)^2, all simple."""
    return FamilyDescriptor(
        FamilyId.ZCOS_SQRT_Z, order_rho=0.5, beta=0.5, mult_bound_M=1, mult_star=1,
        mayer_q=1, mayer_alpha=0.5, sing_values=(0j,), sing_radius=1.8190,
        pstar_min_modulus=10.0, R_star=5.0, R_dagger=1.2, S_default=0.5,
    )


def rational_exp(num: Sequence[complex], den: Sequence[complex]) -> FamilyDescriptor:
    """``R(exp z)`` with ``R = num/den`` (numpy coefficient order, highest first).

    Requires ``R(0)`` and ``R(inf)`` finite and simple, nonzero roots of ``den``.
    """
    num = tuple(complex(c) for c in np.trim_zeros(np.asarray(num, dtype=complex), "f"))
    den = tuple(complex(c) for c in np.trim_zeros(np.asarray(den, dtype=complex), "f"))
    if len(den) < 2:
        raise DomainError("denominator must have a root")
    if den[-1] == 0:
        raise DomainError("R(0) must be finite")
    if len(num) > len(den):
        raise DomainError("R(inf) must be finite")
    roots = np.roots(den)
    if len(roots) > 1:
        gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots))
        if gaps.min() < 1e-9:
            raise Unsupported("repeated denominator roots are not catalogued")
    r0 = num[-1] / den[-1]
    rinf = num[0] / den[0] if len(num) == len(den) else 0j
    logs = np.log(roots)
    # nearest pole to a singular value sets the stand-off
    dist = min(abs(lg - v) for lg in logs for v in (r0, rinf)) if len(logs) else 1.0
    spacing = min([2 * np.pi] + [abs(a - b) for i, a in enumerate(logs) for b in logs[i + 1:]])
    return FamilyDescriptor(
        FamilyId.RATIONAL_EXP, order_rho=1.0, beta=0.0, mult_bound_M=1, mult_star=1,
        mayer_q=1, mayer_alpha=0.0, rat_num=num, rat_den=den, sing_values=(r0, rinf),
        pstar_min_modulus=0.0, R_star=max(0.45 * dist, 0.1), R_dagger=spacing / 2,
        S_default=min(0.5, spacing / 6),
    )


def formula_only(rho: float, beta: float = 0.0, M: int = 1, q: int = 1,
                 alpha: float = 0.0, mult_star: int | None = None) -> FamilyDescriptor:
    """Metadata-only entry (e.g. elliptic functions with rho=2, beta=0)."""
    return FamilyDescriptor(
        FamilyId.FORMULA_ONLY, order_rho=rho, beta=beta, mult_bound_M=M,
        mult_star=M if mult_star is None else mult_star, mayer_q=q, mayer_alpha=alpha,
    )


def elliptic(q: int) -> FamilyDescriptor:
    return formula_only(2.0, 0.0, q, q, 0.0)


CATALOG = {
    "tan": tan_power,
    "zsinz": z_sin_z,
    "zcossqrtz": z_cos_sqrt_z,
    "rationalexp": rational_exp,
    "formula": formula_only,
    "elliptic": elliptic,
}


# -- perturbations -----------------------------------------------------------

@dataclass(frozen=True)
class PerturbationStep:
    """One affine perturbation ``w -> lam * w + c`` applied after ``f0``."""

    c: complex = 0j
    lam: complex = 1 + 0j

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "lam", complex(self.lam))
        if self.lam == 0:
            raise DomainError("lambda must be nonzero")

    @property
    def is_identity(self) -> bool:
        return self.c == 0 and self.lam == 1

    def pull(self, w):
        """Undo the perturbation: ``(w - c) / lam``."""
        return (np.asarray(w) - self.c) / self.lam


IDENTITY = PerturbationStep()


class PerturbationMode(str, enum.Enum):
    ZERO = "Zero"
    CONSTANT_SHIFT = "ConstantShift"
    RANDOM_IN_BALL = "RandomInBall"
    USER_LIST = "UserList"


@dataclass
class PerturbationSequence:
    """Lazily generated steps ``(c_n, lam_n)`` for ``n = 1, 2, ...``.

    RandomInBall draws ``|c_n| < epsilon`` and ``lam_n = 1 + eta`` with
    ``|eta| < delta/(1+delta)``, which puts both ``lam_n`` and ``1/lam_n`` in
    ``B(1, delta)``. Draws are deterministic given ``rng_seed``.
    """

    mode: PerturbationMode = PerturbationMode.ZERO
    epsilon: float = 0.0
    delta: float = 0.0
    rng_seed: int = 0
    shift: complex = 0j
    scale: complex = 1 + 0j
    user_steps: list = field(default_factory=list)
    additive_only: bool = False
    _cache: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.mode = PerturbationMode(self.mode)
        if self.epsilon < 0 or self.delta < 0:
            raise DomainError("epsilon and delta must be non-negative")
        if self.mode is PerturbationMode.CONSTANT_SHIFT:
            self._check(PerturbationStep(self.shift, self.scale))
        if self.mode is PerturbationMode.USER_LIST:
            self.user_steps = [s if isinstance(s, PerturbationStep) else PerturbationStep(*s)
                               for s in self.user_steps]
            for s in self.user_steps:
                self._check(s)

    def _check(self, s: PerturbationStep):
        if abs(s.c) >= self.epsilon and s.c != 0:
            raise DomainError(f"|c|={abs(s.c)} not below epsilon={self.epsilon}")
        if s.lam != 1 and (abs(s.lam - 1) >= self.delta or abs(1 / s.lam - 1) >= self.delta):
            raise DomainError("lambda or 1/lambda outside B(1, delta)")
        if self.additive_only and s.lam != 1:
            raise DomainError("additive sequence with lambda != 1")

    def step(self, n: int) -> PerturbationStep:
        if n < 1:
            raise DomainError("perturbation steps are indexed from 1")
        mode = self.mode
        if mode is PerturbationMode.ZERO:
            return IDENTITY
        if mode is PerturbationMode.CONSTANT_SHIFT:
            return PerturbationStep(self.shift, self.scale)
        if mode is PerturbationMode.USER_LIST:
            if not self.user_steps:
                return IDENTITY
            return self.user_steps[(n - 1) % len(self.user_steps)]
        block, i = divmod(n - 1, RANDOM_BLOCK)
        while len(self._cache) <= block:
            self._cache.append(self._draw_block(len(self._cache)))
        return self._cache[block][i]

    def _draw_block(self, b: int) -> list:
        # each block has its own child seed, so steps never depend on access history
        rng = np.random.default_rng([self.rng_seed, b])
        u = rng.random((4, RANDOM_BLOCK))
        r = self.epsilon * np.sqrt(u[0]) * (1 - 1e-12)
        rl = 0.0 if self.additive_only else self.delta / (1 + self.delta)
        rr = rl * np.sqrt(u[2]) * (1 - 1e-12)
        c = r * np.exp(2j * np.pi * u[1])
        lam = 1 + rr * np.exp(2j * np.pi * u[3])
        return [PerturbationStep(ci, li) for ci, li in zip(c, lam)]

    def max_shift(self, n: int) -> float:
        return max((abs(self.step(k).c) for k in range(1, n + 1)), default=0.0)

    def is_zero(self) -> bool:
        return self.mode is PerturbationMode.ZERO

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "epsilon": self.epsilon, "delta": self.delta,
                "rng_seed": self.rng_seed}


ZERO_PERTURBATION = PerturbationSequence()


def evaluate(fam: FamilyDescriptor, step: PerturbationStep, z):
    """``lam * f0(z) + c``; raises PoleHit within 1e-13 of a pole."""
    fam._require_numeric()
    with np.errstate(all="ignore"):
        v = fam.f0(z)
    if not np.all(np.isfinite(v)) or np.any(np.abs(v) > 1 / POLE_HIT_DISTANCE):
        raise PoleHit("evaluation at (or within 1e-13 of) a pole")
    out = step.lam * v + step.c
    return complex(out) if np.ndim(out) == 0 else out


def derivative(fam: FamilyDescriptor, step: PerturbationStep, z):
    """``lam * f0'(z)``: the additive shift drops out."""
    fam._require_numeric()
    with np.errstate(all="ignore"):
        v = fam.f0(z)
        d = fam.df0(z)
    if not np.all(np.isfinite(v)) or np.any(np.abs(v) > 1 / POLE_HIT_DISTANCE) \
            or not np.all(np.isfinite(d)):
        raise PoleHit("derivative at (or within 1e-13 of) a pole")
    out = step.lam * d
    return complex(out) if np.ndim(out) == 0 else out


# -- poles ---------------------------------------------------------------------

@dataclass(frozen=True)
class PoleRecord:
    location: complex
    multiplicity: int
    laurent_coeff: complex
    index: int = 0

    @property
    def modulus(self) -> float:
        return abs(self.location)


@dataclass(frozen=True)
class PoleTable:
    """Column-oriented pole list (sorted by modulus) for bulk sums."""

    location: np.ndarray
    multiplicity: np.ndarray
    coeff: np.ndarray

    def __len__(self):
        return len(self.location)

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.location)

    def select(self, mask) -> "PoleTable":
        return PoleTable(self.location[mask], self.multiplicity[mask], self.coeff[mask])

    def records(self) -> list:
        return [PoleRecord(complex(a), int(m), complex(c), i)
                for i, (a, m, c) in enumerate(zip(self.location, self.multiplicity, self.coeff))]

    def record(self, i: int) -> PoleRecord:
        return PoleRecord(complex(self.location[i]), int(self.multiplicity[i]),
                          complex(self.coeff[i]), i)

    @classmethod
    def from_records(cls, poles) -> "PoleTable":
        if isinstance(poles, PoleTable):
            return poles
        poles = list(poles)
        return cls(np.array([p.location for p in poles], dtype=complex),
                   np.array([p.multiplicity for p in poles], dtype=int),
                   np.array([p.laurent_coeff for p in poles], dtype=complex))


def _sorted_table(loc, mult, coeff) -> PoleTable:
    loc = np.asarray(loc, dtype=complex)
    order = np.lexsort((np.angle(loc), np.round(np.abs(loc), 12)))
    return PoleTable(loc[order], np.asarray(mult, dtype=int)[order],
                     np.asarray(coeff, dtype=complex)[order])


def pole_table(fam: FamilyDescriptor, max_modulus: float, min_modulus: float = 0.0) -> PoleTable:
    """All poles with ``min_modulus <= |a| <= max_modulus``, closed form per family."""
    if not fam.numeric:
        raise Unsupported("FormulaOnly families have no pole data")
    R, r = float(max_modulus), max(0.0, float(min_modulus))
    fid = fam.family_id

    def ring(loc, mult, coeff):
        keep = (np.abs(loc) <= R) & (np.abs(loc) >= r)
        return _sorted_table(loc[keep], np.asarray(mult)[keep], np.asarray(coeff)[keep])

    if fid is FamilyId.TAN_POWER:
        # |pi/2 + k pi| = pi/2 + j pi with j = k or -k-1
        j = np.arange(max(0, int((r - np.pi / 2) // np.pi)), max(0, int(R // np.pi)) + 1)
        k = np.concatenate([j, -j - 1])
        loc = (np.pi / 2 + k * np.pi).astype(complex)
        m = fam.m_power
        return ring(loc, np.full(len(loc), m), np.full(len(loc), fam.mu * (-1) ** m))
    if fid is FamilyId.ZSINZ:
        a = np.arange(max(0, int(r // np.pi)), int(R // np.pi) + 1)
        n = np.concatenate([a, -a[a > 0]])
        loc = (n * np.pi).astype(complex)
        mult = np.where(n == 0, 2, 1)
        coeff = np.where(n == 0, 1.0, (-1.0) ** np.abs(n) / np.where(n == 0, 1, n * np.pi))
        return ring(loc, mult, coeff)
    if fid is FamilyId.ZCOS_SQRT_Z:
        lo = max(0, int((np.sqrt(r) / (np.pi / 2) - 1) // 2))
        n = np.arange(lo, max(lo, int((np.sqrt(R) / (np.pi / 2) - 1) // 2) + 1) + 1)
        s = (2 * n + 1) * np.pi / 2
        loc = np.concatenate([[0.0], s ** 2]).astype(complex)
        coeff = np.concatenate([[1.0], -2 * (-1.0) ** n / s])
        return ring(loc, np.ones(len(loc), dtype=int), coeff)
    # RationalExp: exp(z) = d for each denominator root d
    roots = np.roots(fam.rat_den)
    locs, coeffs = [], []
    dq = np.polyder(np.asarray(fam.rat_den))
    for d in roots:
        base = np.log(d)
        if abs(base.real) > R:
            continue
        span = np.sqrt(R ** 2 - base.real ** 2)
        inner = np.sqrt(max(0.0, r ** 2 - base.real ** 2))
        ks = []
        for y0, y1 in ((inner, span), (-span, -inner)):  # the two arcs of the ring
            kmin = int(np.floor((y0 - base.imag) / (2 * np.pi)))
            kmax = int(np.ceil((y1 - base.imag) / (2 * np.pi)))
            ks.append(np.arange(kmin, kmax + 1))
        k = np.unique(np.concatenate(ks))
        z = base + 2j * np.pi * k
        locs.append(z)
        c = np.polyval(fam.rat_num, d) / (np.polyval(dq, d) * d)
        coeffs.append(np.full(len(z), c))
    loc = np.concatenate(locs) if locs else np.zeros(0, complex)
    coeff = np.concatenate(coeffs) if coeffs else np.zeros(0, complex)
    return ring(loc, np.ones(len(loc), dtype=int), coeff)


def enumerate_poles(fam: FamilyDescriptor, max_modulus: float) -> list[PoleRecord]:
    return pole_table(fam, max_modulus).records()


def pole_density_radius(fam: FamilyDescriptor, count: int, min_modulus: float = 0.0) -> float:
    """A modulus large enough that at least ``count`` poles exceed ``min_modulus``."""
    R = max(8.0, 2 * min_modulus)
    while True:
        tab = pole_table(fam, R)
        if np.sum(tab.modulus > min_modulus) >= count:
            return R
        R *= 2


def poles_by_count(fam: FamilyDescriptor, count: int, min_modulus: float = 0.0,
                   multiplicity: int | None = None) -> PoleTable:
    """The ``count`` smallest-modulus poles with ``|a| > min_modulus``."""
    # grow a ring outward from min_modulus; capping its starting width keeps far rings cheap
    width = max(8.0, min(min_modulus, 1e6))
    while True:
        R = min_modulus + width
        tab = pole_table(fam, R, min_modulus)
        mask = tab.modulus > min_modulus
        if multiplicity is not None:
            mask &= tab.multiplicity == multiplicity
        if mask.sum() >= count or R > 1e300:
            sel = tab.select(mask)
            return PoleTable(sel.location[:count], sel.multiplicity[:count], sel.coeff[:count])
        width *= 2


def pstar_table(fam: FamilyDescriptor, max_modulus: float) -> PoleTable:
    tab = pole_table(fam, max_modulus)
    return tab.select(tab.modulus > fam.pstar_min_modulus)


# -- inverse branches ------------------------------------------------------------

def _root_seed(w, m: int, j: int, ref):
    """m-th roots of ``w`` chosen continuously around the (broadcastable) reference ``ref``."""
    w = np.asarray(w, dtype=complex)
    if m == 1:
        return w
    r0 = np.asarray(ref, dtype=complex) ** (1.0 / m) * np.exp(2j * np.pi * (j - 1) / m)
    r = w ** (1.0 / m)
    rots = np.exp(2j * np.pi * np.arange(m) / m)
    cand = r[..., None] * rots
    pick = np.argmin(np.abs(cand - np.asarray(r0)[..., None]), axis=-1)
    return np.take_along_axis(cand, pick[..., None], axis=-1)[..., 0]


def pole_preimage(fam: FamilyDescriptor, u, loc, mult, coeff, j: int = 1, ref=None):
    """Solve ``f0(z) = u`` for ``z`` near the pole ``loc``; returns ``(z, f0'(z))``.

    ``loc``, ``mult`` and ``coeff`` broadcast against ``u``. For multiplicity
    above one the root is chosen continuously from ``ref`` (default: ``u``).
    """
    u = np.asarray(u, dtype=complex)
    loc = np.asarray(loc, dtype=complex)
    coeff = np.asarray(coeff, dtype=complex)
    mult = np.asarray(mult)
    ratio = coeff / u
    if np.all(mult == 1):
        off = ratio
    else:
        refv = coeff / (u if ref is None else np.asarray(ref, dtype=complex))
        off = np.empty(np.broadcast(ratio, mult).shape, dtype=complex)
        ratio_b = np.broadcast_to(ratio, off.shape)
        refv_b = np.broadcast_to(refv, off.shape)
        mult_b = np.broadcast_to(mult, off.shape)
        for m in np.unique(mult_b):
            sel = mult_b == m
            off[sel] = _root_seed(ratio_b[sel], int(m), j, refv_b[sel])
    seed = loc + off
    return newton_solve(np.broadcast_to(u, seed.shape), seed, fam.f0, fam.df0)


def point_preimage(fam: FamilyDescriptor, u, anchor, anchor_value, anchor_deriv):
    """Solve ``f0(z) = u`` for ``z`` near a known preimage ``anchor`` of ``anchor_value``."""
    u = np.asarray(u, dtype=complex)
    seed = anchor + (u - anchor_value) / anchor_deriv
    return newton_solve(np.broadcast_to(u, np.shape(seed)), seed, fam.f0, fam.df0)


@dataclass(frozen=True)
class InverseBranch:
    """Local inverse of ``f_n = lam*f0 + c`` on ``source_disk`` landing near a pole."""

    fam: FamilyDescriptor
    source_disk: Disk
    target_pole: PoleRecord
    branch_index: int = 1
    perturbation: PerturbationStep = IDENTITY

    def _solve(self, w):
        p = self.target_pole
        u = self.perturbation.pull(w)
        ref = self.perturbation.pull(self.source_disk.center)
        return pole_preimage(self.fam, u, p.location, p.multiplicity, p.laurent_coeff,
                             self.branch_index, ref)

    def value(self, w):
        z, _ = self._solve(w)
        return complex(z) if np.ndim(z) == 0 else z

    def derivative(self, w):
        _, d = self._solve(w)
        out = 1.0 / (self.perturbation.lam * d)
        return complex(out) if np.ndim(out) == 0 else out


def local_branch(fam: FamilyDescriptor, step: PerturbationStep, pole: PoleRecord, j: int,
                 domain: Disk, standoff: float | None = None, samples: int = 32) -> InverseBranch:
    """Inverse branch of ``f_n`` on ``domain`` whose values lie near ``pole``."""
    fam._require_numeric()
    if not 1 <= j <= pole.multiplicity:
        raise BranchDomainInvalid(f"branch index {j} outside [1, {pole.multiplicity}]")
    standoff = fam.R_star if standoff is None else standoff
    pts = np.concatenate([[domain.center], boundary_points(domain, samples)])
    u = step.pull(pts)
    if np.min(fam.singular_distance(u)) <= standoff:
        raise BranchDomainInvalid("domain meets the singular-value stand-off")
    # a disk around the origin would wrap the root branch cut
    if pole.multiplicity > 1 and np.min(np.abs(u)) <= abs(u[0]) - domain.radius / abs(step.lam) * 1.5:
        raise BranchDomainInvalid("domain not simply placed for a multiple pole")
    br = InverseBranch(fam, domain, pole, j, step)
    br.value(pts)
    return br


def singular_standoff_ok(fam: FamilyDescriptor, disk: Disk, step: PerturbationStep = IDENTITY,
                         standoff: float | None = None, samples: int = 32) -> bool:
    standoff = fam.R_star if standoff is None else standoff
    pts = np.concatenate([[disk.center], boundary_points(disk, samples)])
    return bool(np.min(fam.singular_distance(step.pull(pts))) > standoff)


# -- b-points for the Mayer construction ----------------------------------------

def b_points(fam: FamilyDescriptor, b: complex, max_modulus: float) -> np.ndarray:
    """Solutions of ``f0(z) = b`` with ``|z| <= max_modulus``, sorted by modulus.

    Seeds come from the Laurent expansion at each pole (``z ~ a + (c/b)^{1/m}``)
    and are refined by Newton; duplicates are merged.
    """
    tab = pole_table(fam, max_modulus + 1.0)
    seeds = []
    for a, m, c in zip(tab.location, tab.multiplicity, tab.coeff):
        for j in range(1, int(m) + 1):
            seeds.append(a + complex(c / b) ** (1.0 / m) * np.exp(2j * np.pi * (j - 1) / m))
    seeds = np.asarray(seeds, dtype=complex)
    z, _ = newton_solve(np.full(seeds.shape, complex(b)), seeds, fam.f0, fam.df0)
    z = z[np.abs(z) <= max_modulus]
    # merge seeds that converged to the same point
    key = np.round(z.real, 7) + 1j * np.round(z.imag, 7)
    _, first = np.unique(key, return_index=True)
    z = z[first]
    return z[np.lexsort((np.angle(z), np.round(np.abs(z), 10)))]


# -- closed-form dimension targets --------------------------------------------------

def theoretical_dimension(rho: float, beta: float, M: int) -> float:
    """``rho*M/(beta+M+1)``: the escaping-set dimension value."""
    if rho <= 0:
        raise DomainError("rho must be positive")
    if beta < 0 or M < 1:
        raise DomainError("need beta >= 0 and M >= 1")
    return rho * M / (beta + M + 1)


def mayer_dimension(rho: float, alpha: float, q: int) -> float:
    """``rho/(alpha+1+1/q)``: the radial-set lower bound."""
    if q < 1 or alpha + 1 + 1 / q <= 0:
        raise DomainError("need q >= 1 and alpha > -1 - 1/q")
    if rho <= 0:
        raise DomainError("rho must be positive")
    return rho * q / (q * (alpha + 1) + 1)  # cleared of 1/q so integer cases round once
