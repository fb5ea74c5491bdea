"""Lobes of the difference of two monotone circle maps.

Between consecutive coincidences the curve e^{i alpha} - e^{i beta} is a
loop through 0 whose argument only increases. The arguments of all loops
add up to 2 pi minus the length of the coincidence set.
"""

import numpy as np

from extremal.lobes import BoundaryPair, decompose_lobes, random_monotone_pair, total_varg, winding_number

d = decompose_lobes(BoundaryPair.from_maps("sin:a=0.4", "id"))
print("alpha = theta + 0.4 sin(theta), beta = theta")
for k, lb in enumerate(d.lobes):
    c = lb.centroid()
    print(f"  lobe {k}: theta in [{lb.param_interval[0]:.4f}, {lb.param_interval[1]:.4f}], sign {lb.sign:+d}, "
          f"varg = {lb.varg:.6f}, winds {winding_number(lb.polygon(), c)} about its centroid")
print(f"  total varg = {total_varg(d):.6f} (2 pi = {2 * np.pi:.6f})")
c = d.lobes[0].centroid()
print(f"  the two mirror lobes overlap: the full curve winds {winding_number(d.pair.curve(), c)} times there\n")

rng = np.random.default_rng(2024)
print("random pairs, some agreeing on an arc of length 1:")
for k in range(6):
    pair = random_monotone_pair(rng, 4096, arc=1.0 if k % 2 else 0.0)
    d = decompose_lobes(pair)
    print(f"  {len(d.lobes):2d} lobes, |X| = {d.X_measure:.4f}, total varg = {total_varg(d):.6f}, "
          f"2 pi - |X| = {2 * np.pi - d.X_measure:.6f}")
