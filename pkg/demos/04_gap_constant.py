"""
Growth of the gap constant with the number of actuators
=======================================================

For nodal functions vanishing at every actuator, the ratio of the
D(A) norm to the V norm is bounded below by xi.  It grows roughly like M^2
and decreases slowly under refinement.
"""

import warnings

from deltastab.actuators import empty_actuators, place_actuators
from deltastab.assembly import a_matrix, mass_matrix
from deltastab.mesh import Rect, build_structured_mesh, refine_times
from deltastab.spectral import ConstraintRankDeficient, MeshResolutionWarning, gap_constant

warnings.simplefilter("ignore", MeshResolutionWarning)
base = build_structured_mesh(Rect(), 4, 4)

print("rho     N     xi(M=0)   xi(M=1)   xi(M=2)   xi(M=3)   xi(2)/xi(1)")
for rho in range(4):
    mesh = refine_times(base, rho)
    A, M = a_matrix(mesh, 0.1), mass_matrix(mesh)
    xi = [gap_constant(mesh, A, M, empty_actuators())]
    for m in (1, 2, 3):
        try:
            xi.append(gap_constant(mesh, A, M, place_actuators(Rect(), 2, m)))
        except ConstraintRankDeficient:
            # several actuators in one triangle: their delta vectors are dependent
            xi.append(float("nan"))
    print(f"{rho:3d} {mesh.num_vertices:5d}  " + "  ".join(f"{x:8.4f}" for x in xi) + f"   {xi[2] / xi[1]:8.3f}")
