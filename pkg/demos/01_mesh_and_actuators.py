"""
Meshes, point actuators and the delta vectors
=============================================

Build the 13 x 13 base mesh, refine it, place the actuators and check that
pairing a delta vector with a nodal vector evaluates the P1 function.
"""

import numpy as np

from deltastab.actuators import b_matrix, place_actuators
from deltastab.assembly import mass_matrix, stiffness_matrix
from deltastab.mesh import Rect, build_structured_mesh, coarse_node_injection, refine

rect = Rect(1.0, 1.0)
base = build_structured_mesh(rect, 13, 13)
fine = refine(base)
print(f"base: {base.num_vertices} vertices, {base.num_triangles} triangles")
print(f"refined: {fine.num_vertices} vertices, {fine.num_triangles} triangles")

# parent vertices keep their coordinates in the refined mesh
inj = coarse_node_injection(base, fine)
print("coarse vertices preserved:", np.array_equal(fine.vertices[inj], base.vertices))

# partition of unity and constants in the kernel of the stiffness matrix
M, S = mass_matrix(fine), stiffness_matrix(fine)
print(f"1^T M 1 = {M.sum():.15f}, max |S 1| = {np.abs(S @ np.ones(fine.num_vertices)).max():.1e}")

# M = 1 gives the 3 base points, M = 2 gives 12 rescaled copies
for m in (1, 2):
    act = place_actuators(rect, 2, m)
    print(f"M = {m}: {act.count} actuators")
    print(np.round(act.locations, 4))

act = place_actuators(rect, 2, 2)
B = b_matrix(fine, act)
y = np.sin(3 * fine.vertices[:, 0]) * fine.vertices[:, 1]
print("B^T y  (point values of the P1 interpolant):", np.round(B.T @ y, 5))
print("column sums of B:", np.round(np.asarray(B.sum(axis=0)).ravel(), 14))
