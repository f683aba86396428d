"""Limit points of the escape construction really do escape, hopping between poles."""
from bowenlab import z_sin_z
from bowenlab.constructions import KuEscapeConfig, build_ku_escape
from bowenlab.verify import escape_witness, sample_addresses

fam = z_sin_z()
sysm = build_ku_escape(KuEscapeConfig(fam, t_target=0.1))
c = sysm.constants
print("schedule xi =", c.value("xi"), " R2 =", c.value("R2"))
for addr in sample_addresses(sysm, 6, 5, seed=1):
    w = escape_witness(sysm, addr, fam, sysm.config.perturb, c.value("R2"), c.value("S"))
    print(addr.word, f"min |F^j| {w.min_modulus:7.3f}  max pole gap {w.max_pole_distance:.3g}",
          "ok" if w.escaped and w.near_poles else "FAILED")
