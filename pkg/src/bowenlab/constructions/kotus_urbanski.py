"""Pole-hopping systems for additive (escape) and affine (stationary) perturbations.

Both builders chain inverse branches ``f_n^{-1}(a1 <- a2)``: the branch of
``f_n^{-1}`` defined near the pole ``a2`` whose values lie near the pole ``a1``.
Hubs and alphabets are drawn from P* restricted to multiplicity M*, sorted by
modulus, with ``|a| > 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..complex_core import Disk, boundary_points
from ..errors import ConfigInfeasible, ScheduleInfeasible
from ..families import (
    FamilyDescriptor, PerturbationMode, PerturbationSequence, PoleTable, ZERO_PERTURBATION,
    theoretical_dimension,
)
from ..ncifs import InverseLevel, NcifsSystem, Stage, audit_containment, audit_open_set_condition
from .constants import ConstantLedger, comparability_K, pstar_poles

STAGNATION_WINDOW = 1024
STAGNATION_REL = 1e-6
DISTORTION_SLACK = 1.01


def _exponent(fam: FamilyDescriptor) -> float:
    """``(beta + M* + 1) / M*``."""
    return (fam.beta + fam.mult_star + 1) / fam.mult_star


def _critical(fam: FamilyDescriptor) -> float:
    return theoretical_dimension(fam.order_rho, fam.beta, fam.mult_star)


def _geometry(fam: FamilyDescriptor, S, S_star):
    fam._require_numeric()
    if fam.infinity_asymptotic:
        raise ConfigInfeasible("infinity is an asymptotic value of this family")
    S_star = fam.S_star if S_star is None else S_star
    S = fam.S_default if S is None else S
    if not 0 < S < S_star / 2:
        raise ConfigInfeasible(f"need 0 < S < S*/2 (S={S}, S*={S_star})")
    return S, S_star


def _stagnant(terms: np.ndarray, csum: np.ndarray) -> bool:
    if len(terms) < STAGNATION_WINDOW:
        return False
    gain = csum[-1] - csum[-STAGNATION_WINDOW - 1] if len(csum) > STAGNATION_WINDOW else csum[-1]
    return bool(gain < STAGNATION_REL * csum[-1])


def _pole_stage(step, tab: PoleTable, idx) -> Stage:
    idx = np.asarray(idx)
    return Stage("pole", step, loc=tab.location[idx], mult=tab.multiplicity[idx],
                 coeff=tab.coeff[idx])


# -- escaping set: non-stationary system --------------------------------------------

@dataclass
class KuEscapeConfig:
    fam: FamilyDescriptor
    S: float | None = None
    S_star: float | None = None
    epsilon: float | None = None
    R2: float | None = None
    t_target: float = 0.1
    xi: list | None = None
    perturb: PerturbationSequence = field(default_factory=lambda: ZERO_PERTURBATION)
    pole_budget: int = 10_000
    blocks: int = 1


def xi_schedule(fam: FamilyDescriptor, t: float, K: float, poles: PoleTable, blocks: int) -> list:
    """``[xi_0=0, xi_1, ..., xi_blocks]``: least integers whose block sums pass the threshold.

    Raises ScheduleInfeasible when the pole budget runs out or the running sum
    stagnates (1024 poles adding less than 1e-6 relative).
    """
    u = t * _exponent(fam)
    rho_star = _critical(fam)
    mods = np.abs(poles.location)
    terms = mods ** (-u)
    csum = np.concatenate([[0.0], np.cumsum(terms)])  # csum[j] = terms[0] + ... + terms[j-1]
    xi = [0]
    for n in range(1, blocks + 1):
        if n >= len(mods):
            raise ScheduleInfeasible("pole budget exhausted before the hub index")
        thr = 2 * K ** (4 * rho_star) * mods[n] ** (2 * fam.order_rho)
        # least j with terms[xi+1] + ... + terms[j] >= thr
        base = csum[xi[-1] + 1]
        hit = int(np.searchsorted(csum, base + thr))
        if hit >= len(csum):
            achieved = float(csum[-1] - base)
            why = "stagnated" if _stagnant(terms, csum) else "exhausted the pole budget"
            raise ScheduleInfeasible(
                f"xi_{n} threshold {thr:.4g} unreachable: partial sum {achieved:.4g} "
                f"({why}, {len(mods)} poles)", achieved=achieved, required=float(thr))
        xi.append(hit - 1)
    return xi


class EscapeSchedule:
    """Block bookkeeping: alpha_k, T(n), alphabets and hubs."""

    def __init__(self, xi: list):
        if xi[0] != 0 or any(b <= a for a, b in zip(xi, xi[1:])):
            raise ConfigInfeasible("xi must start at 0 and increase strictly")
        self.xi = list(xi)
        # gamma_k = xi_k - xi_{k-1}; block k covers alpha_k <= n < alpha_{k+1}
        self.alpha = [None, 1]
        for k in range(2, len(xi)):
            self.alpha.append(self.alpha[-1] + xi[k] - xi[k - 1])

    @property
    def n_levels(self) -> int:
        return self.alpha[-1] - 1

    def locate(self, n: int) -> tuple[int, int]:
        """``(k, j)`` with ``n = alpha_k + j``."""
        if not 1 <= n <= self.n_levels:
            raise IndexError(f"level {n} outside the scheduled prefix 1..{self.n_levels}")
        k = int(np.searchsorted(self.alpha[1:], n, side="right"))
        return k, n - self.alpha[k]

    def T(self, n: int) -> int:
        k, _ = self.locate(n)
        return 2 * n + k

    def alphabet(self, n: int) -> np.ndarray:
        k, j = self.locate(n)
        return np.arange(self.xi[k - 1] + 1, self.xi[k] + j + 1)


def build_ku_escape(cfg: KuEscapeConfig, audit_levels: int = 3) -> NcifsSystem:
    fam = cfg.fam
    S, S_star = _geometry(fam, cfg.S, cfg.S_star)
    eps = cfg.epsilon if cfg.epsilon is not None else 0.99 * (S_star - 2 * S)
    if not 0 <= eps < S_star - 2 * S:
        raise ConfigInfeasible("need 0 <= epsilon < S* - 2S")
    p = cfg.perturb
    if p.mode is PerturbationMode.RANDOM_IN_BALL:
        if p.delta != 0 and not p.additive_only:
            raise ConfigInfeasible("escape construction takes additive perturbations only")
        if p.epsilon > eps:
            raise ConfigInfeasible("perturbation epsilon exceeds the construction epsilon")
    elif p.mode is not PerturbationMode.ZERO:
        for n in range(1, 65):
            s = p.step(n)
            if s.lam != 1:
                raise ConfigInfeasible("escape construction takes additive perturbations only")
            if abs(s.c) >= eps:
                raise ConfigInfeasible(f"|c_{n}| exceeds epsilon")

    K = comparability_K(fam, S)
    R2 = cfg.R2 if cfg.R2 is not None else max(2 * fam.R_star, fam.R_dagger)
    poles = pstar_poles(fam, cfg.pole_budget, multiplicity=fam.mult_star)
    if cfg.xi is not None:
        xi = [int(x) for x in cfg.xi]
        if xi[-1] >= len(poles):
            raise ScheduleInfeasible("user schedule exceeds the pole budget")
    else:
        xi = xi_schedule(fam, cfg.t_target, K, poles, cfg.blocks + 1)
    sched = EscapeSchedule(xi)
    if np.abs(poles.location[0]) - S <= R2:
        raise ConfigInfeasible("hub disks do not clear the escape radius R2")

    def make_level(n: int) -> InverseLevel:
        k, j = sched.locate(n)
        T = sched.T(n)
        alph = sched.alphabet(n)
        N = len(alph)
        hub = np.full(N, k)
        stages = [_pole_stage(p.step(T), poles, alph), _pole_stage(p.step(T - 1), poles, hub)]
        if j == 0:
            stages.append(_pole_stage(p.step(T - 2), poles, np.full(N, k - 1)))
        dom = Disk(poles.location[k], S)
        cod = Disk(poles.location[k - 1], S) if j == 0 else dom
        return InverseLevel(fam, stages, dom, cod, index_n=n, labels=alph, size=N)

    cache: dict = {}

    def factory(n):
        if n not in cache:
            cache[n] = make_level(n)
        return cache[n]

    audited = range(1, min(audit_levels, sched.n_levels) + 1)
    dist = 1.0
    for n in audited:
        lv = factory(n)
        if not audit_containment(lv):
            raise ConfigInfeasible(f"level {n}: branch images leave X_(n-1)")
        if not audit_open_set_condition(lv):
            raise ConfigInfeasible(f"level {n}: branch images overlap")
        dist = max(dist, lv.distortion())

    ledger = ConstantLedger()
    ledger.put("S", S, "user" if cfg.S is not None else "analytic")
    ledger.put("S_star", S_star, "user" if cfg.S_star is not None else "analytic",
               "min(2R*, R_dagger)")
    ledger.put("epsilon", eps, "user" if cfg.epsilon is not None else "analytic")
    ledger.put("R2", R2, "user" if cfg.R2 is not None else "analytic", "max(2R*, R_dagger)")
    ledger.put("K_comparability", K, "audited", "inverse-branch derivative comparability, x1.5")
    ledger.put("K", DISTORTION_SLACK * dist, "audited", "level distortion sup/inf, +1%")
    ledger.put("xi", xi, "user" if cfg.xi is not None else "audited")
    ledger.put("t_target", cfg.t_target, "user")
    ledger.put("M_star", fam.mult_star, "analytic")

    sysm = NcifsSystem(factory, koebe_K=DISTORTION_SLACK * dist, stationary=False,
                       max_levels=sched.n_levels,
                       provenance={"construction": "ku-escape", "family": fam.family_id.value,
                                   "t_target": cfg.t_target, "perturbation": p.to_dict(),
                                   "constants": ledger.to_dict()})
    sysm.constants = ledger
    sysm.schedule = sched
    sysm.poles = poles
    sysm.config = cfg
    return sysm


def escape_level_bound(system: NcifsSystem, n: int, t: float) -> float:
    """Proof-side lower bound on ``Z_(n)(t)`` for the escape system."""
    fam = system.config.fam
    K = system.constants.value("K_comparability")
    k, _ = system.schedule.locate(n)
    a = abs(system.poles.location[k])
    c = _critical(fam)
    return 2 * K ** (4 * c - 3 * t) * a ** (2 * (c - t) * _exponent(fam))


# -- affine perturbations: stationary hub system -------------------------------------

@dataclass
class KuAffineConfig:
    fam: FamilyDescriptor
    S: float | None = None
    S_star: float | None = None
    t_target: float = 0.1
    N_t: int | None = None
    epsilon_t: float | None = None
    delta_t: float | None = None
    perturb: PerturbationSequence = field(default_factory=lambda: ZERO_PERTURBATION)
    pole_budget: int = 250_000


def affine_N_t(fam: FamilyDescriptor, t: float, K: float, poles: PoleTable) -> int:
    """Least N with ``sum_{n=1}^N |a_n|^{-u} >= 2 K^{3 rho*} |a_0|^rho``."""
    if t == 0:
        return 1
    u = t * _exponent(fam)
    mods = np.abs(poles.location)
    thr = 2 * K ** (3 * _critical(fam)) * mods[0] ** fam.order_rho
    terms = mods[1:] ** (-u)
    csum = np.cumsum(terms)
    hit = int(np.searchsorted(csum, thr))
    if hit >= len(csum):
        why = "stagnated" if _stagnant(terms, csum) else "exhausted the pole budget"
        raise ScheduleInfeasible(
            f"N_t threshold {thr:.4g} unreachable: partial sum {csum[-1]:.4g} ({why})",
            achieved=float(csum[-1]), required=float(thr))
    return hit + 1


def affine_delta_bound(S: float, S_star: float, a_max: float) -> float:
    """Supremum of admissible delta_t for an alphabet reaching modulus ``a_max``."""
    A = 1 + a_max
    # (1+d)(d A + S) < S*/2  <=>  A d^2 + (A + S) d + S - S*/2 < 0
    quad = (-(A + S) + np.sqrt((A + S) ** 2 - 4 * A * (S - S_star / 2))) / (2 * A)
    root_bound = (-1 + np.sqrt(1 + 2 * S_star / A)) / 2
    return float(min(quad, root_bound, (S_star - 2 * S) / (2 * S)))


def build_ku_affine(cfg: KuAffineConfig, audit_levels: int = 3) -> NcifsSystem:
    fam = cfg.fam
    S, S_star = _geometry(fam, cfg.S, cfg.S_star)
    K = comparability_K(fam, S)
    if cfg.N_t is not None:
        N_t = int(cfg.N_t)
        poles = pstar_poles(fam, N_t + 1, multiplicity=fam.mult_star)
    else:
        poles = pstar_poles(fam, cfg.pole_budget, multiplicity=fam.mult_star)
        N_t = affine_N_t(fam, cfg.t_target, K, poles)
    if N_t < 1 or N_t + 1 > len(poles):
        raise ConfigInfeasible("N_t outside the available alphabet")
    poles = PoleTable(poles.location[:N_t + 1], poles.multiplicity[:N_t + 1],
                      poles.coeff[:N_t + 1])
    a_max = float(np.abs(poles.location[1:]).max())
    d_sup = affine_delta_bound(S, S_star, a_max)
    delta_t = 0.9 * d_sup if cfg.delta_t is None else cfg.delta_t
    eps_t = 0.99 * delta_t if cfg.epsilon_t is None else cfg.epsilon_t
    if not 0 < eps_t <= delta_t or not delta_t < d_sup:
        raise ConfigInfeasible(
            f"need 0 < eps_t <= delta_t < {d_sup:.4g} (got eps_t={eps_t}, delta_t={delta_t})")
    p = cfg.perturb
    if p.mode is PerturbationMode.RANDOM_IN_BALL:
        if p.epsilon > eps_t or p.delta > delta_t:
            raise ConfigInfeasible(
                f"perturbation (eps={p.epsilon}, delta={p.delta}) exceeds "
                f"(eps_t={eps_t:.4g}, delta_t={delta_t:.4g})")
    elif p.mode is not PerturbationMode.ZERO:
        for n in range(1, 65):
            s = p.step(n)
            if abs(s.c) >= eps_t or abs(s.lam - 1) >= delta_t or abs(1 / s.lam - 1) >= delta_t:
                raise ConfigInfeasible(f"perturbation step {n} outside (eps_t, delta_t)")

    a0 = poles.location[0]
    X = Disk(a0, S)
    alph = np.arange(1, N_t + 1)

    def make_level(n: int) -> InverseLevel:
        s_out, s_in = p.step(2 * n), p.step(2 * n - 1)
        stages = [_pole_stage(s_out, poles, alph), _pole_stage(s_in, poles, np.zeros(N_t, int))]
        return InverseLevel(fam, stages, X, X, index_n=n, labels=alph,
                            probe=s_out.lam * a0 + s_out.c, size=N_t)

    zero = p.is_zero()
    cache: dict = {}

    def factory(n):
        key = 1 if zero else n
        if key not in cache:
            cache[key] = make_level(key)
        return cache[key]

    dist = 1.0
    for n in range(1, (1 if zero else audit_levels) + 1):
        lv = factory(n)
        if not audit_containment(lv):
            raise ConfigInfeasible(f"level {n}: branch images leave B(a0, S)")
        if not audit_open_set_condition(lv):
            raise ConfigInfeasible(f"level {n}: branch images overlap")
        dist = max(dist, lv.distortion())
    # containment of the pulled-back disks (z - c)/lam in B(a, S*)
    for n in range(1, 2 * audit_levels + 1):
        s = p.step(n)
        for a in (poles.location[1], poles.location[-1]):
            w = (boundary_points(Disk(a, S), 32) - s.c) / s.lam
            if np.max(np.abs(w - a)) >= S_star:
                raise ConfigInfeasible(f"(B(a,S) - c_{n})/lam_{n} leaves B(a, S*)")

    ledger = ConstantLedger()
    ledger.put("S", S, "user" if cfg.S is not None else "analytic")
    ledger.put("S_star", S_star, "user" if cfg.S_star is not None else "analytic")
    ledger.put("a0", complex(a0), "analytic", "hub pole")
    ledger.put("N_t", N_t, "user" if cfg.N_t is not None else "audited")
    ledger.put("epsilon_t", eps_t, "user" if cfg.epsilon_t is not None else "analytic")
    ledger.put("delta_t", delta_t, "user" if cfg.delta_t is not None else "analytic")
    ledger.put("delta_sup", d_sup, "analytic")
    ledger.put("K_comparability", K, "audited", "inverse-branch derivative comparability, x1.5")
    ledger.put("K", DISTORTION_SLACK * dist, "audited", "level distortion sup/inf, +1%")
    ledger.put("t_target", cfg.t_target, "user")

    sysm = NcifsSystem(factory, koebe_K=DISTORTION_SLACK * dist, stationary=zero,
                       provenance={"construction": "ku-affine", "family": fam.family_id.value,
                                   "t_target": cfg.t_target, "perturbation": p.to_dict(),
                                   "constants": ledger.to_dict()})
    sysm.constants = ledger
    sysm.poles = poles
    sysm.config = cfg
    return sysm


def affine_level_bound(system: NcifsSystem, t: float) -> float:
    """Proof-side lower bound on ``Z_(n)(t)`` for the affine hub system."""
    fam = system.config.fam
    K = system.constants.value("K_comparability")
    c = _critical(fam)
    a0 = abs(system.poles.location[0])
    return 2 * K ** (3 * c - 2 * t) * a0 ** ((c - t) * _exponent(fam))
