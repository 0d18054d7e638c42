"""Schur-reduction solver tests, including the from-scratch dense kernel."""

import dataclasses
import math

import numpy as np
import pytest

from sloshlab.assembly import ProblemKind, assemble, rayleigh
from sloshlab.eigensolver import (
    cholesky_lower,
    dtn_reduce,
    full_pencil_reference,
    interior_factor,
    solve,
    symmetric_definite_eigh,
    tridiag_eigh,
    tridiagonalize,
)
from sloshlab.errors import IllConditioningError, InvalidParameterError
from sloshlab.geometry import make_cylinder, make_troesch
from sloshlab.mesh import GradingSpec, generate
from sloshlab.oracles import bessel_zeros


@pytest.fixture(scope="module")
def cyl_small():
    return generate(make_cylinder(1.0), GradingSpec(6, 6, 1.0))


@pytest.fixture(scope="module")
def cyl_mid():
    return generate(make_cylinder(1.0), GradingSpec(48, 48, 0.85))


# ---------------------------------------------------------------------------
# dense kernel
# ---------------------------------------------------------------------------

def _random_spd(n, rng, shift=1.0):
    B = rng.standard_normal((n, n))
    return B @ B.T + shift * np.eye(n)


def test_cholesky_against_numpy():
    rng = np.random.default_rng(0)
    M = _random_spd(25, rng)
    L = cholesky_lower(M)
    assert np.allclose(L, np.linalg.cholesky(M), atol=1e-10)
    with pytest.raises(IllConditioningError):
        cholesky_lower(np.array([[1.0, 2.0], [2.0, 1.0]]))  # indefinite


def test_tridiagonalization_is_a_similarity():
    rng = np.random.default_rng(1)
    B = _random_spd(30, rng, shift=0.0)
    B = 0.5 * (B + B.T)
    d, e, Q = tridiagonalize(B)
    T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.allclose(Q @ T @ Q.T, B, atol=1e-12 * np.abs(B).max() * 30)
    assert np.allclose(Q @ Q.T, np.eye(30), atol=1e-13 * 30)


def test_tridiag_eigh_against_numpy():
    rng = np.random.default_rng(2)
    n = 40
    d = rng.standard_normal(n)
    e = rng.standard_normal(n - 1)
    T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    w, Z = tridiag_eigh(d.copy(), e.copy(), np.eye(n))
    w_ref = np.linalg.eigvalsh(T)
    assert np.allclose(w, w_ref, atol=1e-12 * max(1.0, np.abs(w_ref).max()))
    assert np.allclose(T @ Z, Z @ np.diag(w), atol=1e-11)


def test_symmetric_definite_eigh_against_scipy():
    from scipy.linalg import eigh as scipy_eigh

    rng = np.random.default_rng(3)
    n = 35
    S = _random_spd(n, rng, shift=0.0)
    S = 0.5 * (S + S.T)
    Ms = _random_spd(n, rng, shift=2.0)
    w, V = symmetric_definite_eigh(S, Ms)
    w_ref = scipy_eigh(S, Ms, eigvals_only=True)
    assert np.allclose(w, w_ref, atol=1e-10 * max(1.0, np.abs(w_ref).max()))
    # Ms-orthonormal eigenvectors solving the pencil
    assert np.allclose(V.T @ Ms @ V, np.eye(n), atol=1e-9)
    assert np.allclose(S @ V, Ms @ V @ np.diag(w), atol=1e-9 * np.abs(S).max())


# ---------------------------------------------------------------------------
# interior solver and reduction
# ---------------------------------------------------------------------------

def test_interior_factor_contract(cyl_mid):
    prob = assemble(cyl_mid, 1, ProblemKind.SLOSHING)
    handle = interior_factor(prob)
    n = handle.matrix.shape[0]
    assert np.all(handle.solve(np.zeros(n)) == 0.0)
    rng = np.random.default_rng(4)
    w = rng.standard_normal(n)
    x = handle.solve(handle.matrix @ w)
    assert np.linalg.norm(x - w) <= 1e-10 * np.linalg.norm(w)


def test_harmonic_extension_of_constants(cyl_small):
    prob = assemble(cyl_small, 0, ProblemKind.SLOSHING)
    red = dtn_reduce(prob)
    ones_s = np.ones(len(red.surface))
    interior = -red.interior_solver.solve(red.a_is @ ones_s)
    assert np.allclose(interior, 1.0, atol=1e-10)
    scale = np.abs(red.S).max()
    assert np.max(np.abs(red.S @ ones_s)) <= 1e-10 * max(scale, 1.0)


def test_reduction_sizes(cyl_small):
    nr = cyl_small.grading.nr
    red0 = dtn_reduce(assemble(cyl_small, 0, ProblemKind.SLOSHING))
    assert red0.S.shape == (nr + 1, nr + 1)
    red1 = dtn_reduce(assemble(cyl_small, 1, ProblemKind.SLOSHING))
    assert red1.S.shape == (nr, nr)  # axis-surface node constrained


@pytest.mark.parametrize("m,kind", [
    (0, ProblemKind.SLOSHING),
    (1, ProblemKind.SLOSHING),
    (2, ProblemKind.SLOSHING),
    (0, ProblemKind.DIRICHLET_STEKLOV),
])
def test_schur_matches_full_pencil_small_meshes(m, kind):
    for D in (make_cylinder(1.0), make_troesch(1.0)):
        mesh = generate(D, GradingSpec(6, 6, 0.9))
        prob = assemble(mesh, m, kind)
        assert len(prob.free_nodes) <= 200
        sol = solve(prob, 4)
        ref = full_pencil_reference(prob, 4)
        kk = min(sol.k, len(ref))
        assert np.max(np.abs(sol.eigenvalues[:kk] - ref[:kk]) / np.abs(ref[:kk])) <= 1e-9


# ---------------------------------------------------------------------------
# solve: oracles and invariants
# ---------------------------------------------------------------------------

def test_cylinder_fundamental_against_closed_form(cyl_mid):
    tab = bessel_zeros()
    exact = tab.j11p * math.tanh(tab.j11p)
    sol = solve(assemble(cyl_mid, 1, ProblemKind.SLOSHING), 2)
    assert sol.eigenvalues[0] == pytest.approx(exact, rel=1e-3)
    assert sol.gap == pytest.approx(float(sol.eigenvalues[1] - sol.eigenvalues[0]))


def test_zero_mode_removed_for_m0(cyl_mid):
    sol = solve(assemble(cyl_mid, 0, ProblemKind.SLOSHING), 3)
    assert np.all(sol.eigenvalues > 0.1)  # the near-zero Neumann mode is gone
    prob = sol.problem
    ones = np.ones(prob.n)
    for j in range(sol.k):
        assert abs(ones @ (prob.Mf @ sol.fields[j])) <= 1e-8


def test_troesch_spectrum_contains_lambda():
    mesh = generate(make_troesch(1.0), GradingSpec(64, 64, 0.85))
    sol = solve(assemble(mesh, 0, ProblemKind.SLOSHING), 4)
    assert np.min(np.abs(sol.eigenvalues - 1.0)) <= 0.01


def test_solution_invariants(cyl_mid):
    for m, kind in ((0, ProblemKind.SLOSHING), (1, ProblemKind.SLOSHING),
                    (0, ProblemKind.DIRICHLET_STEKLOV)):
        prob = assemble(cyl_mid, m, kind)
        sol = solve(prob, 4)
        nus = sol.eigenvalues
        assert np.all(np.diff(nus) >= 0)
        assert np.all(nus >= -1e-10)
        # Mf-orthonormality
        G = np.array([[sol.fields[i] @ (prob.Mf @ sol.fields[j])
                       for j in range(sol.k)] for i in range(sol.k)])
        assert np.max(np.abs(G - np.eye(sol.k))) <= 1e-8
        for j in range(sol.k):
            assert rayleigh(prob, sol.fields[j]) == pytest.approx(float(nus[j]), rel=1e-9)
        assert np.all(sol.residuals <= 1e-9 * max(sol.a_scale, 1.0))
        # corner sign convention
        corner = sol.problem.mesh.corner_node
        surface_scale = np.abs(sol.fields[0][sol.problem.mesh.surface_nodes]).max()
        if abs(sol.fields[0][corner]) > 1e-12 * surface_scale:
            assert sol.fields[0][corner] >= 0.0


def test_scaling_law(cyl_mid):
    s = 1.7
    scaled = dataclasses.replace(cyl_mid, nodes=s * cyl_mid.nodes)
    for m in (0, 1):
        a = solve(assemble(cyl_mid, m, ProblemKind.SLOSHING), 2)
        b = solve(assemble(scaled, m, ProblemKind.SLOSHING), 2)
        assert np.allclose(b.eigenvalues * s, a.eigenvalues, rtol=1e-6)


def test_variational_upper_bound(cyl_mid):
    prob = assemble(cyl_mid, 1, ProblemKind.SLOSHING)
    sol = solve(prob, 1)
    rng = np.random.default_rng(6)
    for _ in range(10):
        v = rng.standard_normal(prob.n)
        v[list(prob.constrained)] = 0.0
        assert rayleigh(prob, v) >= float(sol.eigenvalues[0]) - 1e-9


def test_truncation_warning(cyl_small):
    prob = assemble(cyl_small, 1, ProblemKind.SLOSHING)
    n_surf = len(prob.surface_unknowns)
    with pytest.warns(UserWarning, match="surface unknowns"):
        sol = solve(prob, n_surf + 5)
    assert sol.k == n_surf


def test_singular_interior_block_raises(cyl_small):
    import scipy.sparse as sp

    from sloshlab.errors import FactorizationError

    prob = assemble(cyl_small, 1, ProblemKind.SLOSHING)
    surf = set(int(i) for i in prob.surface_unknowns)
    interior = [i for i in prob.free_nodes if int(i) not in surf]
    a = prob.A.tolil()
    a[interior[0], :] = 0.0
    a[:, interior[0]] = 0.0
    broken = dataclasses.replace(prob, A=sp.csr_matrix(a))
    with pytest.raises(FactorizationError):
        interior_factor(broken)


def test_solve_parameter_guard(cyl_small):
    prob = assemble(cyl_small, 1, ProblemKind.SLOSHING)
    with pytest.raises(InvalidParameterError):
        solve(prob, 0)


def test_cluster_reporting(cyl_small):
    sol = solve(assemble(cyl_small, 1, ProblemKind.SLOSHING), 3)
    fake = dataclasses.replace(
        sol, eigenvalues=np.array([1.0, 1.0 + 5e-7, 2.0]))
    groups = fake.clusters(rtol=1e-6)
    assert groups == [[0, 1], [2]]
    assert sol.clusters() == [[0], [1], [2]]
