"""Stationary system near a pole ``b``: return maps ``gamma_m = psi o phi_m``.

``phi_m`` inverts the (2n)-th perturbed map on ``U0 = B(b, s0)`` towards the
m-th b-point ``z_m`` (``f0(z_m) = b``); ``psi`` inverts the (2n-1)-th map
near ``b``, so ``gamma_m`` maps ``U1 = B(b, s1)`` into itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..complex_core import Disk, boundary_points
from ..errors import ConfigInfeasible, ScheduleInfeasible
from ..families import (
    FamilyDescriptor, PerturbationMode, PerturbationSequence, PoleRecord, ZERO_PERTURBATION,
    b_points, point_preimage, pole_preimage, pole_table,
)
from ..ncifs import InverseLevel, NcifsSystem, Stage, audit_containment, audit_open_set_condition
from .constants import SAFETY, ConstantLedger

DISTORTION_SLACK = 1.01


@dataclass
class MayerConfig:
    fam: FamilyDescriptor
    pole_b: PoleRecord | None = None
    s0: float = 0.9
    s1: float = 0.03
    M1: int | None = None
    N_t: int = 8
    t_target: float = 0.4
    perturb: PerturbationSequence = field(default_factory=lambda: ZERO_PERTURBATION)


def default_pole_b(fam: FamilyDescriptor, s0: float) -> PoleRecord:
    """Smallest pole whose 2*s0 neighbourhood avoids the singular values."""
    tab = pole_table(fam, 64.0)
    for i in range(len(tab)):
        if fam.singular_distance(tab.location[i]) > 2 * s0:
            return tab.record(i)
    raise ConfigInfeasible("no pole keeps the singular values outside B(b, 2*s0)")


def perturbation_bounds(s0: float, s1: float, b: complex, R1: float) -> tuple[float, float]:
    """Largest admissible (epsilon, delta), each shrunk by 1%."""
    absb = abs(b)
    root = (-1 + np.sqrt(1 + 4 * (s0 - s1) / (1 + s1 + absb))) / 2
    caps = [s0 / 8, 0.5, root] + ([s0 / (8 * absb)] if absb > 0 else [])
    delta = 0.99 * min(caps)
    eps = 0.99 * min(s1 / 2, delta, R1)
    return eps, delta


def check_perturbation(perturb: PerturbationSequence, eps: float, delta: float, n_steps: int):
    """Raise ConfigInfeasible unless every step obeys |c| < eps and lam, 1/lam in B(1, delta)."""
    if perturb.mode is PerturbationMode.ZERO:
        return
    if perturb.mode is PerturbationMode.RANDOM_IN_BALL:
        if perturb.epsilon > eps or perturb.delta > delta:
            raise ConfigInfeasible(
                f"perturbation budget (eps={perturb.epsilon}, delta={perturb.delta}) exceeds "
                f"the admissible (eps<{eps:.4g}, delta<{delta:.4g})")
        return
    for n in range(1, n_steps + 1):
        s = perturb.step(n)
        if abs(s.c) >= eps or abs(s.lam - 1) >= delta or abs(1 / s.lam - 1) >= delta:
            raise ConfigInfeasible(f"perturbation step {n} outside the admissible ball")


def _least_radius(fam, b: PoleRecord, target: Disk, R_start: float, samples: int = 64) -> float:
    """Least R >= R_start (geometric scan) with psi({|w| = R}) inside ``target``."""
    R = R_start
    for _ in range(400):
        w = R * np.exp(2j * np.pi * np.arange(samples) / samples)
        ok = True
        for j in range(1, b.multiplicity + 1):
            z, _ = pole_preimage(fam, w, b.location, b.multiplicity, b.laurent_coeff, j,
                                 ref=np.full(samples, w[0]))
            if not np.all(target.contains(z)):
                ok = False
                break
        if ok:
            return R
        R *= 1.05
    raise ConfigInfeasible("no radius pulls back into U1")


class MayerGeometry:
    """Audited radii, b-points and constants shared by all levels."""

    def __init__(self, cfg: MayerConfig):
        fam = cfg.fam
        fam._require_numeric()
        if not 0 < cfg.s1 < cfg.s0:
            raise ConfigInfeasible("need 0 < s1 < s0")
        if cfg.N_t < 1:
            raise ConfigInfeasible("N_t must be at least 1")
        b = cfg.pole_b or default_pole_b(fam, cfg.s0)
        self.fam, self.b, self.q = fam, b, b.multiplicity
        self.U0, self.U1 = Disk(b.location, cfg.s0), Disk(b.location, cfg.s1)
        if fam.singular_distance(b.location) <= 2 * cfg.s0:
            raise ConfigInfeasible("a singular value lies in B(b, 2*s0)")

        with np.errstate(all="ignore"):
            R0 = float(np.max(np.abs(fam.f0(boundary_points(self.U0, 256))))) * 1.01
        R1 = _least_radius(fam, b, self.U1, R0)
        R2 = 3 * R1
        self.R0, self.R1, self.R2 = R0, R1, R2

        # b-points until M1 + N_t are available
        radius = 4 * R2 + 16
        while True:
            zs = b_points(fam, b.location, radius)
            M1 = cfg.M1 if cfg.M1 is not None else self._first_far(zs)
            if M1 is not None and len(zs) >= M1 + cfg.N_t:
                break
            radius *= 2
            if radius > 1e9:
                raise ConfigInfeasible("could not enumerate enough b-points")
        self.M1 = M1
        self.z = zs[M1:M1 + cfg.N_t]
        self.all_b_points = zs
        self.df_z = fam.df0(self.z)

        eps, delta = perturbation_bounds(cfg.s0, cfg.s1, b.location, R1)
        self.eps_max, self.delta_max = eps, delta

    def _first_far(self, zs):
        # least index whose branch image of U0 lies in {|z| > R2}
        w = np.concatenate([[self.U0.center], boundary_points(self.U0, 64)])
        for m, zm in enumerate(zs):
            if abs(zm) <= self.R2:
                continue
            img, _ = point_preimage(self.fam, w, zm, self.b.location, self.fam.df0(zm))
            if np.min(np.abs(img)) > self.R2:
                return m
        return None

    def stages(self, step_phi, step_psi) -> list:
        N = len(self.z)
        b = self.b
        return [
            Stage("point", step_phi, anchor=self.z, anchor_value=np.asarray(b.location),
                  anchor_deriv=self.df_z),
            Stage("pole", step_psi, loc=np.full(N, b.location), mult=np.full(N, b.multiplicity),
                  coeff=np.full(N, b.laurent_coeff)),
        ]

    def level(self, n: int, perturb: PerturbationSequence) -> InverseLevel:
        s_phi, s_psi = perturb.step(2 * n), perturb.step(2 * n - 1)
        lv = InverseLevel(self.fam, self.stages(s_phi, s_psi), self.U1, self.U1, index_n=n,
                          labels=np.arange(self.M1, self.M1 + len(self.z)),
                          probe=s_phi.lam * self.b.location + s_phi.c, size=len(self.z))
        return lv

    def audit_Q(self) -> float:
        """Q with ``|f0'(z)| <= Q |z|^alpha`` on the branch images of U0."""
        w = boundary_points(self.U0, 64)
        img, d = point_preimage(self.fam, w[None, :], self.z[:, None], self.b.location,
                                self.df_z[:, None])
        return SAFETY * float(np.max(np.abs(d) / np.abs(img) ** self.fam.mayer_alpha))

    def audit_L(self) -> float:
        """L with ``|f0'(w)| ~ |f0(w)|^{1+1/q}`` on ``B(b, 2 s0) minus b``."""
        fam, q = self.fam, self.q
        ratios = []
        for r in 2 * self.U0.radius * np.array([0.01, 0.05, 0.25, 0.5, 0.75, 0.99]):
            w = boundary_points(Disk(self.b.location, r), 64)
            ratios.append(np.abs(fam.df0(w)) / np.abs(fam.f0(w)) ** (1 + 1 / q))
        ratios = np.concatenate(ratios)
        return SAFETY * float(max(ratios.max(), 1 / ratios.min()))


def mayer_threshold(K: float, Q: float, L: float, q: int) -> float:
    """Right-hand side of the branch-count condition: 2^{1+2(4+2/q)} K^2 Q^2 L."""
    return 2.0 ** (1 + 2 * (4 + 2 / q)) * K ** 2 * Q ** 2 * L


def mayer_series(z: np.ndarray, t: float, alpha: float, q: int) -> np.ndarray:
    """Running sums of ``|z_m|^{-t(alpha+1+1/q)}`` over the supplied b-points."""
    return np.cumsum(np.abs(z) ** (-t * (alpha + 1 + 1 / q)))


def mayer_branch_sum(system: NcifsSystem, t: float, N_t: int | None = None) -> float:
    """The threshold series over the first ``N_t`` b-points beyond ``M1``."""
    geo = system.geometry
    z = geo.all_b_points[geo.M1:]
    N = len(geo.z) if N_t is None else N_t
    while N > len(z):
        z = b_points(geo.fam, geo.b.location, 2 * abs(z[-1]) * N / len(z) + 1)[geo.M1:]
    return float(mayer_series(z[:N], t, geo.fam.mayer_alpha, geo.q)[-1])


def mayer_nt_predicate(system: NcifsSystem, t: float, N_t: int | None = None) -> bool:
    """Does the branch family reach the threshold sum at exponent t?"""
    geo = system.geometry
    s = mayer_branch_sum(system, t, N_t)
    c = system.constants
    return bool(s >= mayer_threshold(c.value("K_koebe"), c.value("Q"), c.value("L"), geo.q))


def mayer_N_t(system: NcifsSystem, t: float, budget: int = 100_000) -> int:
    """Least branch count meeting the threshold; ScheduleInfeasible beyond ``budget``."""
    geo = system.geometry
    c = system.constants
    thr = mayer_threshold(c.value("K_koebe"), c.value("Q"), c.value("L"), geo.q)
    z = geo.all_b_points[geo.M1:]
    while len(z) < budget and abs(z[-1]) < 1e12:
        z = b_points(geo.fam, geo.b.location, 2 * abs(z[-1]))[geo.M1:]
    z = z[:budget]
    s = mayer_series(z, t, geo.fam.mayer_alpha, geo.q)
    hit = np.searchsorted(s, thr)
    if hit >= len(s):
        raise ScheduleInfeasible(f"threshold {thr:.4g} not reached by {len(s)} b-points",
                                 achieved=float(s[-1]), required=thr)
    return int(hit + 1)


def build_mayer(cfg: MayerConfig, audit_levels: int = 3) -> NcifsSystem:
    """Build the return-map system on ``X_n = closed B(b, s1)``."""
    geo = MayerGeometry(cfg)
    check_perturbation(cfg.perturb, geo.eps_max, geo.delta_max, 2 * audit_levels)
    b = geo.b.location
    for n in range(1, 2 * audit_levels + 1):
        s = cfg.perturb.step(n)
        w = (boundary_points(geo.U1, 64) - s.c) / s.lam
        if not np.all(geo.U0.contains(w)):
            raise ConfigInfeasible(f"(U1 - c_{n})/lam_{n} not inside U0")

    zero = cfg.perturb.is_zero()
    built = {1: geo.level(1, cfg.perturb)}
    if not zero:
        built.update({n: geo.level(n, cfg.perturb) for n in range(2, audit_levels + 1)})
    base = built[1]
    for lv in built.values():
        if not audit_containment(lv):
            raise ConfigInfeasible(f"level {lv.index_n}: branch images leave U1")
        if not audit_open_set_condition(lv):
            raise ConfigInfeasible(f"level {lv.index_n}: branch images overlap")

    K_ncifs = DISTORTION_SLACK * base.distortion()
    K_koebe = K_ncifs
    if not cfg.s1 < cfg.s0 / (16 * K_koebe ** 2):
        raise ConfigInfeasible(f"s1={cfg.s1} violates s1 < s0/(16 K^2) with K={K_koebe:.4g}")

    ledger = ConstantLedger()
    ledger.put("b", complex(b), "analytic", "distinguished pole")
    ledger.put("q", geo.q, "analytic")
    ledger.put("alpha", cfg.fam.mayer_alpha, "analytic")
    ledger.put("s0", cfg.s0, "user")
    ledger.put("s1", cfg.s1, "user")
    ledger.put("R0", geo.R0, "audited", "max |f0| on the boundary of U0, +1%")
    ledger.put("R1", geo.R1, "audited", "least radius pulled back into U1")
    ledger.put("R2", geo.R2, "analytic", "3*R1")
    ledger.put("M1", int(geo.M1), "audited" if cfg.M1 is None else "user")
    ledger.put("N_t", int(cfg.N_t), "user")
    ledger.put("K", K_ncifs, "audited", "branch distortion sup/inf on U1, +1%")
    ledger.put("K_koebe", K_koebe, "audited", "same audit used in s1 < s0/(16K^2)")
    ledger.put("Q", geo.audit_Q(), "audited", "x1.5")
    ledger.put("L", geo.audit_L(), "audited", "x1.5")
    ledger.put("epsilon_max", geo.eps_max, "analytic")
    ledger.put("delta_max", geo.delta_max, "analytic")
    ledger.put("epsilon", cfg.perturb.epsilon, "user")
    ledger.put("delta", cfg.perturb.delta, "user")

    if zero:
        factory = lambda n: base  # noqa: E731
    else:
        def factory(n):
            return built[n] if n in built else geo.level(n, cfg.perturb)

    sysm = NcifsSystem(factory, koebe_K=K_ncifs, stationary=zero,
                       provenance={"construction": "mayer", "family": cfg.fam.family_id.value,
                                   "t_target": cfg.t_target,
                                   "perturbation": cfg.perturb.to_dict(),
                                   "constants": ledger.to_dict()})
    sysm.constants = ledger
    sysm.geometry = geo
    sysm.config = cfg
    return sysm
