"""Where does the cover sum for the escaping set of 1/(z sin z) stop blowing up?

Below the threshold no cut-off radius makes the per-level factor at most one.
"""
import numpy as np

from bowenlab import theoretical_dimension, z_sin_z
from bowenlab.constructions import cover_alphabet, escape_cover_sum, pstar_poles, select_R3
from bowenlab.errors import NotSupercritical

fam = z_sin_z()
print("threshold", theoretical_dimension(fam.order_rho, fam.beta, fam.mult_bound_M))
for t in np.round(np.arange(0.28, 0.46, 0.02), 2):
    try:
        R3 = select_R3(fam, t)
        tab = cover_alphabet(fam, R3, 10_000)
        note = f"R3 = {R3:9.2f}"
    except NotSupercritical:
        tab = pstar_poles(fam, 10_000)
        note = "no R3        "
    f = escape_cover_sum(fam, t, alphabet=tab, direct=False).per_level_factor
    print(f"t={t:.2f}  {note}  factor over 1e4 poles {f:8.3f}")
