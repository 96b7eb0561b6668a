"""Where do the pi-level leaves of a graph over S^3 have null mean curvature?

For the graph t = h(u) in -I x_t S^3 each leaf u = const is a round 2-sphere
of areal radius t sin u, so <H,H> = cos(2u) / (h sin u)^2. It changes sign at
u = pi/4 and 3 pi/4; the scan should find the same two leaves from the shape
operator and T alone.
"""

import numpy as np

from warpframe import horizons, scenarios

sc = scenarios.build("graph-sphere3", {}, scenarios.graph_sphere3_grid(40))
data = sc.data
scan = horizons.trapped_scan(data)

u = data.grid.coords()[0]
oracle = np.cos(2 * u) / (data.pi * np.sin(u)) ** 2
print(f"max |<H,H> - areal-radius formula| = {np.nanmax(np.abs(scan.Hsq - oracle)):.1e}")

print(f"{'t':>8s} {'min <H,H>':>12s} {'max <H,H>':>12s}  verdict")
for lf in scan.leaves:
    print(f"{lf.t:8.4f} {lf.Hsq_min:12.4e} {lf.Hsq_max:12.4e}  {lf.verdict}")

h = lambda x: 2 + 0.3 * np.cos(x)  # noqa: E731
print("sign changes found at t =", ", ".join(f"{t:.4f}" for t in horizons.null_crossings(scan)))
print(f"expected from cos(2u) = 0:  {h(3 * np.pi / 4):.4f}, {h(np.pi / 4):.4f}")
