import warnings

import numpy as np
import pytest
import scipy.linalg as la

from deltastab.actuators import b_matrix, empty_actuators, place_actuators
from deltastab.assembly import a_matrix, mass_matrix
from deltastab.mesh import Rect, build_structured_mesh, refine, refine_times
from deltastab.spectral import (ConstraintRankDeficient, MeshResolutionWarning, constrained_rayleigh_min,
                                gap_constant, leading_eigenpairs, projection_factor)


def pencil(mesh, nu=0.1):
    return a_matrix(mesh, nu), mass_matrix(mesh)


def brute_force_gap(A, M, B):
    """Oracle: null space from a full QR of B, explicit M inverse, general eigensolver."""
    A, M, B = A.toarray(), M.toarray(), B.toarray()
    Q, _ = np.linalg.qr(B, mode="complete")
    Z = Q[:, B.shape[1]:]
    num = Z.T @ A @ np.linalg.inv(M) @ A @ Z
    den = Z.T @ A @ Z
    vals = la.eig(num, den, right=False)
    return float(np.min(vals.real))


def test_first_eigenpair_is_constant(mesh8):
    A, M = pencil(mesh8)
    basis = leading_eigenpairs(A, M, 4)
    assert basis.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    v = basis.vectors[:, 0]
    assert np.allclose(v, v[0], atol=1e-10)
    assert np.all(np.diff(basis.eigenvalues) >= -1e-12)
    res = A @ basis.vectors - (M @ basis.vectors) * basis.eigenvalues
    assert np.max(np.abs(res)) <= 1e-8 * np.max(np.abs(A @ basis.vectors))


def test_second_eigenvalue_converges(hierarchy13):
    mesh = hierarchy13[2]
    A, M = pencil(mesh)
    basis = leading_eigenpairs(A, M, 3)  # sparse shift-invert path
    exact = 1 + 0.1 * np.pi ** 2
    assert basis.eigenvalues[1] == pytest.approx(exact, rel=0.02)
    assert basis.eigenvalues[2] == pytest.approx(exact, rel=0.02)  # (1,0) and (0,1) modes


def test_sparse_and_dense_paths_agree(hierarchy13):
    mesh = hierarchy13[1]
    A, M = pencil(mesh)
    import deltastab.spectral as sp_mod

    dense = leading_eigenpairs(A, M, 6)
    old = sp_mod.DENSE_LIMIT
    try:
        sp_mod.DENSE_LIMIT = 10
        sparse = leading_eigenpairs(A, M, 6)
    finally:
        sp_mod.DENSE_LIMIT = old
    assert np.allclose(dense.eigenvalues, sparse.eigenvalues, rtol=1e-10)


def test_complete_basis_trace(mesh4):
    A, M = pencil(mesh4)
    n = mesh4.num_vertices
    basis = leading_eigenpairs(A, M, n)
    assert basis.eigenvalues.sum() == pytest.approx(np.trace(np.linalg.solve(M.toarray(), A.toarray())), rel=1e-10)
    gram = basis.vectors.T @ (M @ basis.vectors)
    th = basis.theta_factor
    assert np.allclose(th.T @ th, np.linalg.inv(gram), atol=1e-10)
    C = projection_factor(basis, M)
    assert np.allclose(C.T @ C, M.toarray(), atol=1e-8)


def test_projection_factor(mesh8, rng):
    A, M = pencil(mesh8)
    basis = leading_eigenpairs(A, M, 10)
    C = projection_factor(basis, M)
    assert C.shape == (10, mesh8.num_vertices)
    y = basis.vectors @ rng.standard_normal(10)
    assert float((C @ y) @ (C @ y)) == pytest.approx(float(y @ (M @ y)), rel=1e-10)
    z = rng.standard_normal(mesh8.num_vertices)
    V = basis.vectors
    z -= V @ np.linalg.solve(V.T @ (M @ V), V.T @ (M @ z))
    assert np.max(np.abs(C @ z)) < 1e-10


def test_gap_constant_empty(mesh8):
    A, M = pencil(mesh8)
    assert gap_constant(mesh8, A, M, empty_actuators()) == pytest.approx(1.0, abs=1e-10)


def test_gap_constant_matches_brute_force():
    mesh = refine(build_structured_mesh(Rect(), 4, 4))
    A, M = pencil(mesh)
    for m in (1, 2):
        act = place_actuators(Rect(), 2, m)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MeshResolutionWarning)
            xi = gap_constant(mesh, A, M, act)
        ref = brute_force_gap(A, M, b_matrix(mesh, act))
        assert xi == pytest.approx(ref, rel=1e-6)
        assert xi > 1.0


def test_gap_constant_grows_with_M():
    mesh = refine(build_structured_mesh(Rect(), 6, 6))
    A, M = pencil(mesh)
    xs = []
    for m in (1, 2, 3):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MeshResolutionWarning)
            xs.append(gap_constant(mesh, A, M, place_actuators(Rect(), 2, m)))
    assert xs[0] < xs[1] < xs[2]


def test_gap_constant_nonincreasing_under_refinement():
    base = build_structured_mesh(Rect(), 4, 4)
    act = place_actuators(Rect(), 2, 1)
    xs = []
    for rho in range(3):
        mesh = refine_times(base, rho)
        A, M = pencil(mesh)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MeshResolutionWarning)
            xs.append(gap_constant(mesh, A, M, act))
    assert xs[0] >= xs[1] >= xs[2]


def test_rank_deficient_and_warning(unit_square):
    tiny = build_structured_mesh(unit_square, 1, 1)
    A, M = pencil(tiny)
    with pytest.raises(ConstraintRankDeficient):
        gap_constant(tiny, A, M, place_actuators(unit_square, 2, 2))
    mesh = build_structured_mesh(unit_square, 6, 6)
    A, M = pencil(mesh)
    with pytest.warns(MeshResolutionWarning):
        gap_constant(mesh, A, M, place_actuators(unit_square, 2, 2))


def test_rayleigh_without_constraints_is_alpha1(mesh4):
    A, M = pencil(mesh4, nu=0.3)
    B = np.zeros((mesh4.num_vertices, 0))
    assert constrained_rayleigh_min(A, M, B) == pytest.approx(leading_eigenpairs(A, M, 1).eigenvalues[0])
