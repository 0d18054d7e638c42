"""Weighted P1 operators of the reduced azimuthal eigenproblems.

For azimuthal mode m the meridian weak form reads

    int_D (dpsi/dr dphi/dr + dpsi/dy dphi/dy) r dA
        + m^2 int_D psi phi / r dA  =  nu int_F psi phi r dr ,

with natural (Neumann) conditions on the bottom.  Two problem kinds share
this form: the sloshing problem (free trace on the bottom) and the
auxiliary Dirichlet-Steklov problem (zero trace on the bottom).  Essential
constraints are realized by keeping the full symmetric matrices and
recording the constrained node set; solvers restrict to the complement.

Quadrature: area terms use the 3-point mid-edge rule (exact for
quadratics), so the gradient term integrates the linear weight r exactly;
mid-edge points can only hit r = 0 on axis edges, where the surviving
basis products vanish once axis nodes are constrained, so those points are
skipped.  Free-surface mass entries are exact integrals of r times two
linear hat functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    AssemblyError,
    DivisionGuardError,
    InvalidParameterError,
    InvalidProblemError,
)
from .mesh import Mesh

__all__ = ["ProblemKind", "ModeProblem", "assemble", "rayleigh", "dump_operator"]


class ProblemKind(enum.Enum):
    SLOSHING = "Sloshing"
    DIRICHLET_STEKLOV = "DirichletSteklov"


@dataclass(frozen=True)
class ModeProblem:
    """One assembled reduced eigenproblem A v = nu Mf v."""

    m: int
    kind: ProblemKind
    mesh: Mesh
    A: sp.csr_matrix
    Mf: sp.csr_matrix
    constrained: frozenset

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.constrained)] = False
        return np.nonzero(mask)[0]

    @property
    def surface_unknowns(self) -> np.ndarray:
        """Free-surface nodes that carry unknowns, ascending radius."""
        return np.array([i for i in self.mesh.surface_nodes if i not in self.constrained],
                        dtype=int)


def _surface_edge_mass(a: float, b: float) -> np.ndarray:
    # exact integral of r * hat_i * hat_j over the segment [a, b] of y = 0
    h = b - a
    return (h / 12.0) * np.array([[3.0 * a + b, a + b], [a + b, a + 3.0 * b]])


def assemble(mesh: Mesh, m: int, kind: ProblemKind = ProblemKind.SLOSHING) -> ModeProblem:
    """Assemble the mode-m stiffness and free-surface mass operators."""
    if m < 0 or int(m) != m:
        raise InvalidParameterError(f"azimuthal mode must be a nonnegative integer, got {m}")
    m = int(m)

    surface = mesh.surface_nodes
    if len(surface) == 0:
        raise InvalidProblemError("mesh has no free-surface nodes")

    nodes = mesh.nodes
    tris = mesh.triangles
    n = len(nodes)

    p = nodes[tris]                      # (nt, 3, 2)
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    det = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    area = 0.5 * det
    # gradients of the three hats: rows are (d/dr, d/dy) per vertex
    g0 = np.stack([(u[:, 1] - v[:, 1]) / det, (v[:, 0] - u[:, 0]) / det], axis=1)
    g1 = np.stack([v[:, 1] / det, -v[:, 0] / det], axis=1)
    g2 = np.stack([-u[:, 1] / det, u[:, 0] / det], axis=1)
    grads = np.stack([g0, g1, g2], axis=1)  # (nt, 3, 2)

    mids = 0.5 * (p + np.roll(p, -1, axis=1))  # mid-edge points, (nt, 3, 2)
    rbar = mids[:, :, 0].mean(axis=1)

    Ke = np.einsum("tak,tbk->tab", grads, grads) * (area * rbar)[:, None, None]

    if m > 0:
        # hat values at the mid-edge points: vertex x quadrature point
        phi = np.array([[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
        rq = mids[:, :, 0]
        with np.errstate(divide="ignore"):
            wq = np.where(rq > 0.0, (m * m) * (area[:, None] / 3.0) / rq, 0.0)
        Ke = Ke + np.einsum("tq,aq,bq->tab", wq, phi, phi)

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    sr = nodes[surface, 0]
    si, sj, sv = [], [], []
    for k in range(len(surface) - 1):
        Me = _surface_edge_mass(sr[k], sr[k + 1])
        for a, na in enumerate((surface[k], surface[k + 1])):
            for b, nb in enumerate((surface[k], surface[k + 1])):
                si.append(na)
                sj.append(nb)
                sv.append(Me[a, b])
    Mf = sp.coo_matrix((sv, (si, sj)), shape=(n, n)).tocsr()

    constrained = set()
    if m >= 1:
        axis_nodes = set(int(i) for i in mesh.nodes_with_tag("Axis"))
        on_axis = set(int(i) for i in np.nonzero(nodes[:, 0] == 0.0)[0])
        if not on_axis <= axis_nodes:
            raise AssemblyError(
                "nodes on r = 0 are not covered by axis tags; cannot constrain mode m >= 1"
            )
        constrained |= on_axis
    if kind is ProblemKind.DIRICHLET_STEKLOV:
        constrained |= set(int(i) for i in mesh.bottom_nodes)

    return ModeProblem(m=m, kind=kind, mesh=mesh, A=A, Mf=Mf,
                       constrained=frozenset(constrained))


def rayleigh(problem: ModeProblem, v: np.ndarray) -> float:
    """Rayleigh quotient (v' A v) / (v' Mf v) for an admissible vector."""
    v = np.asarray(v, dtype=float)
    if v.shape != (problem.n,):
        raise InvalidParameterError(f"vector length {v.shape} != node count {problem.n}")
    if problem.constrained:
        idx = np.fromiter(problem.constrained, dtype=int)
        if np.any(v[idx] != 0.0):
            raise InvalidParameterError("vector does not vanish on constrained nodes")
    denom = float(v @ (problem.Mf @ v))
    if denom <= 0.0:
        raise DivisionGuardError("vector has zero surface norm")
    return float(v @ (problem.A @ v)) / denom


def dump_operator(matrix: sp.spmatrix, path) -> None:
    """Write a sparse operator as "row col value" text for external checks."""
    coo = matrix.tocoo()
    with open(path, "w") as fh:
        for i, j, val in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {val:.17g}\n")
