"""Hairs of monotone maps, then energy on a genus-two surface.

A synthetic monotone map squashes radial segments onto boundary points;
the detector recovers each collapsed fiber and the tip measure vanishes
with the clustering tolerance. The second half builds the Poincare-series
weight of the regular octagon group and checks its area identities.
"""

import numpy as np

from extremal import TriMeshMap, build_disk_mesh
from extremal.fuchsian import octagon_group, transfer_identity_check
from extremal.hairs import CollapseSpec, collapse_map, detect_hairs, tip_measure

mesh = build_disk_mesh(16, 3)
specs = [CollapseSpec(1.0, np.pi, 0.4, support=0.6), CollapseSpec(-1.0, 0.0, 0.4, support=0.6),
         CollapseSpec(1j, -np.pi / 2, 0.2, support=0.35)]
h = collapse_map(mesh, specs)
rep = detect_hairs(h)
print(f"constructed 3 collapses, detected {len(rep)} hairs:")
for hair in rep.hairs:
    print(f"  tip {hair.tip:.3f}: {len(hair.fiber_vertices)} vertices, length {hair.diameter:.3f}")
for tol in (0.3, 0.1, 1e-2, 1e-6):
    r = detect_hairs(h, tol)
    print(f"  collapse_tol={tol:g}: tip measure {tip_measure(r, h):.3e}")

g = octagon_group()
dom = g.fundamental_domain(2)
print(f"\noctagon group: {len(g.elements(4))} elements of word length <= 4")
print(f"  fundamental domain area {dom.hyperbolic_area():.6f} vs 4 pi = {4 * np.pi:.6f}")
ident = TriMeshMap(dom.mesh, dom.mesh.vertices.copy())
for n in (2, 3, 4):
    t = transfer_identity_check(ident, 1.0, g, n)
    print(f"  cutoff {n}: lhs={t.lhs:.5f} rhs={t.rhs:.5f} tail={t.tail:.3f}  (tiles fill the disk: pi={np.pi:.5f})")
