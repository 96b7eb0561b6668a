"""Flatness of the closed-form Maurer-Cartan forms under grid refinement.

The exterior derivative is second order, so the residual of an exactly flat
form should fall by about four each time the spacing halves. A small constant
error injected into one entry is not flat, and its residual stays put.
"""

from warpframe import scenarios
from warpframe.convergence import box_max, common_box
from warpframe.frames import flatness_residual

RESOLUTIONS = (50, 100, 200)
GRIDS = {"example1": scenarios.example1_grid, "example2": scenarios.example2_grid}


def residuals(kind, perturb=0.0):
    grids = [GRIDS[kind](n) for n in RESOLUTIONS]
    box = common_box(grids)
    out = []
    for g in grids:
        sc = scenarios.build(kind, {}, g)
        U = sc.forms["Upsilon"].copy()
        if perturb:
            Gd = sc.data.signs.G_diag
            U[..., 0, 1, 2] += perturb
            U[..., 0, 2, 1] -= Gd[1] * Gd[2] * perturb
        out.append(box_max(flatness_residual(U, g).field, g, box))
    return out


print(f"{'scenario':10s} {'perturb':>8s} " + " ".join(f"{'N=' + str(n):>10s}" for n in RESOLUTIONS) + "  ratios")
for kind in GRIDS:
    for eps in (0.0, 1e-2):
        r = residuals(kind, eps)
        ratios = " ".join(f"{a / b:5.2f}" for a, b in zip(r, r[1:]))
        print(f"{kind:10s} {eps:8.0e} " + " ".join(f"{x:10.2e}" for x in r) + f"  {ratios}")
