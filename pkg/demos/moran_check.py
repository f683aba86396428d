"""Compare the pressure engine with the Moran equation on a few self-similar sets."""
from bowenlab import bowen_dimension, moran_oracle, similarity_system

for ratios in ([1 / 3, 1 / 3], [0.25] * 3, [0.5, 0.25, 0.125], [0.4, 0.1, 0.3]):
    rep = bowen_dimension(similarity_system(ratios), 0.0, 2.0, tol=1e-9, max_depth=4)
    exact = moran_oracle(ratios)
    print(f"{str([round(r, 4) for r in ratios]):28s} engine {rep.estimate:.9f}  "
          f"moran {exact:.9f}  diff {abs(rep.estimate - exact):.1e}")
