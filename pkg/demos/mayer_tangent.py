"""Return-map systems for tan z near the pole pi/2.

Adding branches pushes the Bowen bracket up towards the radial-set value 1/2,
but only logarithmically, so the brackets stay well below it.
"""
from bowenlab import bowen_dimension, mayer_dimension, tan_power
from bowenlab.constructions import MayerConfig, build_mayer

fam = tan_power(1)
print("target", mayer_dimension(fam.order_rho, fam.mayer_alpha, fam.mayer_q))
for n in (4, 8, 16, 32):
    sysm = build_mayer(MayerConfig(fam, N_t=n))
    lo, hi = bowen_dimension(sysm, 0.0, 1.0, tol=1e-3, max_depth=5).bowen_bracket
    print(f"N_t={n:3d}  bracket [{lo:.4f}, {hi:.4f}]")
