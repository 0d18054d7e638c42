"""Steklov pencil solver via Dirichlet-to-Neumann (Schur) reduction.

The assembled pencil A v = nu Mf v has surface mass only on free-surface
nodes, so eliminating interior unknowns yields a small dense pencil
(S, Ms) on the surface trace: S = A_SS - A_SI A_II^-1 A_IS is the discrete
Steklov (Dirichlet-to-Neumann) operator.  The dense stage is self
contained: Cholesky congruence, Householder tridiagonalization and
implicit-shift QL iteration, validated in the tests against a brute-force
full-pencil QZ reference.

For the axisymmetric sloshing mode (m = 0) the constant vector spans the
exact Neumann kernel; it is deflated spectrally (projected out of S before
the dense solve, then the near-zero eigenvalue is detected and dropped),
which realizes the zero-mean surface orthogonality without touching A.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import ModeProblem, ProblemKind
from .errors import FactorizationError, IllConditioningError, InvalidParameterError

__all__ = [
    "InteriorSolver",
    "DtnReduction",
    "EigenSolution",
    "interior_factor",
    "dtn_reduce",
    "solve",
    "full_pencil_reference",
    "cholesky_lower",
    "symmetric_definite_eigh",
    "tridiagonalize",
    "tridiag_eigh",
]

#: relative residual contract of the interior solver
INTERIOR_RTOL = 1e-11
#: zero-mode detection threshold relative to the next eigenvalue
DEFLATION_RTOL = 1e-8
#: eigenvalues within this relative width are reported as one cluster
CLUSTER_RTOL = 1e-6


# ---------------------------------------------------------------------------
# interior (harmonic extension) solver
# ---------------------------------------------------------------------------

@dataclass
class InteriorSolver:
    """Factorization handle for the interior stiffness block A_II."""

    matrix: sp.csc_matrix
    interior_nodes: np.ndarray
    _lu: object

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve A_II x = b to relative residual <= 1e-11.

        One step of iterative refinement follows the direct solve; if the
        contract is still not met a Jacobi-preconditioned conjugate-gradient
        correction is attempted before giving up.
        """
        b = np.asarray(b, dtype=float)
        if b.size == 0 or self.matrix.shape[0] == 0:
            return np.zeros_like(b)
        x = self._lu.solve(b)
        r = b - self.matrix @ x
        x = x + self._lu.solve(r)
        r = b - self.matrix @ x
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        if np.linalg.norm(r) <= INTERIOR_RTOL * bnorm:
            return x
        # fallback: preconditioned CG on the residual equation
        diag = self.matrix.diagonal()
        if np.any(diag <= 0.0):
            raise FactorizationError("interior block is not positive definite")
        precond = spla.LinearOperator(self.matrix.shape, matvec=lambda z: z / diag)
        cols = r.reshape(r.shape[0], -1)
        xc = x.reshape(x.shape[0], -1).copy()
        for j in range(cols.shape[1]):
            dx, info = spla.cg(self.matrix, cols[:, j], rtol=INTERIOR_RTOL / 10,
                               maxiter=10 * self.matrix.shape[0], M=precond)
            if info != 0:
                raise FactorizationError(
                    f"interior solve failed residual contract (cg info={info})"
                )
            xc[:, j] += dx
        x = xc.reshape(b.shape)
        r = b - self.matrix @ x
        if np.linalg.norm(r) > INTERIOR_RTOL * bnorm:
            raise FactorizationError("interior solve failed residual contract")
        return x


def interior_factor(problem: ModeProblem) -> InteriorSolver:
    """Factorize the interior block (non-surface, unconstrained nodes)."""
    free = problem.free_nodes
    surf = set(int(i) for i in problem.surface_unknowns)
    interior = np.array([i for i in free if int(i) not in surf], dtype=int)
    aii = problem.A[np.ix_(interior, interior)].tocsc()
    if aii.shape[0] == 0:
        return InteriorSolver(matrix=aii, interior_nodes=interior, _lu=None)
    try:
        lu = spla.splu(aii)
    except RuntimeError as exc:  # singular factorization
        raise FactorizationError(f"interior block factorization failed: {exc}") from exc
    return InteriorSolver(matrix=aii, interior_nodes=interior, _lu=lu)


# ---------------------------------------------------------------------------
# dense symmetric kernel (first principles)
# ---------------------------------------------------------------------------

def cholesky_lower(M: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = M[j, j] - L[j, :j] @ L[j, :j]
        if not (s > 0.0) or not math.isfinite(s):
            raise IllConditioningError(
                f"surface mass is not numerically positive definite at pivot {j}"
            )
        L[j, j] = math.sqrt(s)
        if j + 1 < n:
            L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def _solve_lower(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    X = np.array(B, dtype=float, copy=True)
    for i in range(L.shape[0]):
        if i:
            X[i] -= L[i, :i] @ X[:i]
        X[i] /= L[i, i]
    return X


def _solve_upper(U: np.ndarray, B: np.ndarray) -> np.ndarray:
    X = np.array(B, dtype=float, copy=True)
    n = U.shape[0]
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            X[i] -= U[i, i + 1:] @ X[i + 1:]
        X[i] /= U[i, i]
    return X


def tridiagonalize(B: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Householder reduction B = Q T Q' to symmetric tridiagonal T."""
    A = np.array(B, dtype=float, copy=True)
    n = A.shape[0]
    Q = np.eye(n)
    for k in range(n - 2):
        x = A[k + 1:, k].copy()
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        alpha = -math.copysign(norm, x[0] if x[0] != 0.0 else 1.0)
        v = x
        v[0] -= alpha
        vn2 = v @ v
        if vn2 == 0.0:
            continue
        beta = 2.0 / vn2
        p = beta * (A[k + 1:, k + 1:] @ v)
        kap = 0.5 * beta * (v @ p)
        w = p - kap * v
        A[k + 1:, k + 1:] -= np.outer(v, w) + np.outer(w, v)
        A[k + 1:, k] = 0.0
        A[k, k + 1:] = 0.0
        A[k + 1, k] = alpha
        A[k, k + 1] = alpha
        Q[:, k + 1:] -= np.outer(beta * (Q[:, k + 1:] @ v), v)
    d = np.diag(A).copy()
    e = np.diag(A, 1).copy() if n > 1 else np.zeros(0)
    return d, e, Q


def tridiag_eigh(d: np.ndarray, e: np.ndarray, Z: np.ndarray,
                 max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix.

    Rotations are accumulated into the columns of Z.  Eigenvalues return
    sorted ascending with matching columns.
    """
    n = len(d)
    d = d.astype(float).copy()
    ee = np.zeros(n)
    ee[: n - 1] = e
    eps = np.finfo(float).eps
    for l in range(n):
        iters = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(ee[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            iters += 1
            if iters > max_sweeps:
                raise FactorizationError("tridiagonal QL iteration failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * ee[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + ee[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * ee[i]
                b = c * ee[i]
                r = math.hypot(f, g)
                ee[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    ee[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi1 = Z[:, i + 1].copy()
                Z[:, i + 1] = s * Z[:, i] + c * zi1
                Z[:, i] = c * Z[:, i] - s * zi1
            if underflow:
                continue
            d[l] -= p
            ee[l] = g
            ee[m] = 0.0
    order = np.argsort(d, kind="stable")
    return d[order], Z[:, order]


def symmetric_definite_eigh(S: np.ndarray, Ms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of S v = w Ms v with Ms positive definite.

    Congruence with the Cholesky factor of Ms reduces to an ordinary
    symmetric problem, solved by Householder tridiagonalization plus
    implicit-shift QL.  Returned vectors are Ms-orthonormal.
    """
    L = cholesky_lower(Ms)
    Y = _solve_lower(L, S)
    B = _solve_lower(L, Y.T).T
    B = 0.5 * (B + B.T)
    d, e, Q = tridiagonalize(B)
    w, Z = tridiag_eigh(d, e, Q)
    V = _solve_upper(L.T, Z)
    return w, V


# ---------------------------------------------------------------------------
# reduction and solve
# ---------------------------------------------------------------------------

@dataclass
class DtnReduction:
    """Dense surface pencil (S, Ms) plus the data to rebuild interiors."""

    S: np.ndarray
    Ms: np.ndarray
    surface: np.ndarray
    interior: np.ndarray
    interior_solver: InteriorSolver
    a_is: np.ndarray  # interior-to-surface coupling block (dense)


def dtn_reduce(problem: ModeProblem) -> DtnReduction:
    """Schur-complement reduction onto the free-surface unknowns."""
    surf = problem.surface_unknowns
    solver = interior_factor(problem)
    interior = solver.interior_nodes
    a_ss = problem.A[np.ix_(surf, surf)].toarray()
    ms = problem.Mf[np.ix_(surf, surf)].toarray()
    if interior.size:
        a_is = problem.A[np.ix_(interior, surf)].toarray()
        x = solver.solve(a_is)
        s = a_ss - a_is.T @ x
    else:
        a_is = np.zeros((0, len(surf)))
        s = a_ss
    s = 0.5 * (s + s.T)
    ms = 0.5 * (ms + ms.T)
    return DtnReduction(S=s, Ms=ms, surface=surf, interior=interior,
                        interior_solver=solver, a_is=a_is)


@dataclass(frozen=True)
class EigenSolution:
    """Sorted eigenpairs with normalized, sign-fixed nodal fields."""

    problem: ModeProblem
    eigenvalues: np.ndarray          # ascending, zero mode removed for m = 0
    fields: np.ndarray               # (k, n_nodes) nodal eigenfunctions
    residuals: np.ndarray            # ||A v - nu Mf v||_2 on free unknowns
    gap: float                       # nu_2 - nu_1 of the reported sequence
    a_scale: float                   # max |A| entry, residual reference scale

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.fields.setflags(write=False)
        self.residuals.setflags(write=False)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def surface_trace(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        """Radii and field values along the free surface, ascending r."""
        surf = self.problem.mesh.surface_nodes
        return self.problem.mesh.nodes[surf, 0], self.fields[index][surf]

    def clusters(self, rtol: float = CLUSTER_RTOL) -> list:
        """Group indices of eigenvalues equal within relative tolerance."""
        groups = []
        for i, nu in enumerate(self.eigenvalues):
            if groups and abs(nu - self.eigenvalues[groups[-1][-1]]) <= rtol * max(
                abs(nu), 1e-300
            ):
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups


def _apply_sign_convention(field: np.ndarray, problem: ModeProblem) -> np.ndarray:
    mesh = problem.mesh
    surf = mesh.surface_nodes
    corner_val = field[mesh.corner_node]
    surface_vals = field[surf]
    scale = np.max(np.abs(surface_vals))
    if scale == 0.0:
        return field
    if abs(corner_val) > 1e-12 * scale:
        sign = math.copysign(1.0, corner_val)
    else:
        sign = math.copysign(1.0, surface_vals[int(np.argmax(np.abs(surface_vals)))])
    return field * sign


def solve(problem: ModeProblem, k: int) -> EigenSolution:
    """Solve for the k lowest eigenpairs of the reduced Steklov pencil."""
    if k < 1:
        raise InvalidParameterError("need at least one eigenpair")
    red = dtn_reduce(problem)
    s, ms = red.S, red.Ms

    deflate = problem.kind is ProblemKind.SLOSHING and problem.m == 0
    if deflate:
        ones = np.ones(s.shape[0])
        m1 = ms @ ones
        proj = np.eye(s.shape[0]) - np.outer(ones, m1) / (ones @ m1)
        s = proj.T @ s @ proj
        s = 0.5 * (s + s.T)

    w, vecs = symmetric_definite_eigh(s, ms)

    if deflate:
        if len(w) > 1 and abs(w[0]) <= DEFLATION_RTOL * abs(w[1]):
            w = w[1:]
            vecs = vecs[:, 1:]
        else:
            warnings.warn("zero mode not detected for m = 0 sloshing", stacklevel=2)

    if k > len(w):
        warnings.warn(
            f"requested {k} eigenpairs but only {len(w)} surface unknowns remain",
            stacklevel=2,
        )
        k = len(w)

    n = problem.n
    free = problem.free_nodes
    a_ff = problem.A[np.ix_(free, free)]
    mf_ff = problem.Mf[np.ix_(free, free)]

    fields = np.zeros((k, n))
    residuals = np.zeros(k)
    eigenvalues = np.array(w[:k])
    for j in range(k):
        v = np.zeros(n)
        v[red.surface] = vecs[:, j]
        if red.interior.size:
            v[red.interior] = -red.interior_solver.solve(red.a_is @ vecs[:, j])
        nrm = math.sqrt(max(v @ (problem.Mf @ v), 0.0))
        v /= nrm
        v = _apply_sign_convention(v, problem)
        fields[j] = v
        vf = v[free]
        residuals[j] = np.linalg.norm(a_ff @ vf - eigenvalues[j] * (mf_ff @ vf))

    gap = float(eigenvalues[1] - eigenvalues[0]) if k >= 2 else math.nan
    return EigenSolution(
        problem=problem,
        eigenvalues=eigenvalues,
        fields=fields,
        residuals=residuals,
        gap=gap,
        a_scale=float(np.max(np.abs(problem.A.data)) if problem.A.nnz else 0.0),
    )


def full_pencil_reference(problem: ModeProblem, k: int) -> np.ndarray:
    """Brute-force eigenvalues of the full pencil (A, Mf) on free unknowns.

    Dense QZ on the unreduced pencil; infinite eigenvalues (interior rows
    with no surface mass) are discarded, and for the m = 0 sloshing kind
    the near-zero Neumann mode is dropped exactly as in the Schur path.
    This is the independent anti-bug oracle for dtn_reduce/solve.
    """
    from scipy.linalg import eig as dense_eig

    free = problem.free_nodes
    a = problem.A[np.ix_(free, free)].toarray()
    mf = problem.Mf[np.ix_(free, free)].toarray()
    w = dense_eig(a, mf, right=False)
    w = np.real(w[np.isfinite(w)])
    w = np.sort(w[np.abs(w) < 1e12])
    if problem.kind is ProblemKind.SLOSHING and problem.m == 0:
        if len(w) > 1 and abs(w[0]) <= 1e-6 * abs(w[1]):
            w = w[1:]
    return w[:k]
