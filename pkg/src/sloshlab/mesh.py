"""Tagged, corner-graded triangulations of meridian domains.

Meshes are transfinite mapped grids: logical coordinates (xi, y) on the
unit-square-times-depth rectangle are mapped to (xi * g(y), y), so every
grid row lies on a constant depth and the wall column follows the profile
exactly.  When the profile pinches to g(y0) = 0 the lowest row collapses to
a single apex node and the bottom strip becomes a triangle fan.  Quads are
split along the diagonal oriented toward the contact corner (r0, 0).

Grading ratios are total end-to-end ratios: the cell widths form a
geometric progression whose last/first quotient equals ``corner_ratio``
(toward xi = 1 and y = 0) divided by ``axis_ratio`` (toward the lowest
point y = y0).  A total ratio keeps the node distribution self-similar
under refinement, which the convergence studies rely on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, MeshingError, ResourceLimitError
from .geometry import MeridianDomain

__all__ = [
    "GradingSpec",
    "Mesh",
    "MeshReport",
    "generate",
    "refine",
    "validate",
    "graded_points",
    "p1_gradients",
    "triangle_areas",
    "dump_csv",
]

FREE_SURFACE = "FreeSurface"
BOTTOM = "Bottom"
AXIS = "Axis"

#: refine() refuses to push cell counts past this bound
MAX_CELLS = 4096
#: triangles flatter than this (degrees) trigger a quality warning
MIN_ANGLE_DEG = 5.0


@dataclass(frozen=True)
class GradingSpec:
    """Cell counts and geometric grading of the mapped grid."""

    nr: int
    ny: int
    corner_ratio: float = 0.85
    axis_ratio: float | None = None

    def __post_init__(self):
        if self.nr < 2 or self.ny < 2:
            raise InvalidParameterError("nr and ny must be at least 2")
        if not (0.0 < self.corner_ratio <= 1.0):
            raise InvalidParameterError("corner_ratio must lie in (0, 1]")
        if self.axis_ratio is not None and not (0.0 < self.axis_ratio <= 1.0):
            raise InvalidParameterError("axis_ratio must lie in (0, 1]")

    def doubled(self) -> "GradingSpec":
        return GradingSpec(2 * self.nr, 2 * self.ny, self.corner_ratio, self.axis_ratio)


def graded_points(n_cells: int, end_ratio: float = 1.0, start_ratio: float = 1.0) -> np.ndarray:
    """Points of [0, 1] whose cell widths grade geometrically to both ends.

    ``end_ratio`` (resp. ``start_ratio``) is the total quotient between the
    last (resp. first) cell and the opposite end; values below 1 shrink the
    cells at that end.
    """
    if n_cells < 1:
        raise InvalidParameterError("need at least one cell")
    i = np.arange(n_cells, dtype=float)
    e = i / max(n_cells - 1, 1)
    w = end_ratio**e * start_ratio ** (1.0 - e)
    x = np.concatenate([[0.0], np.cumsum(w)])
    x /= x[-1]
    x[-1] = 1.0
    return x


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation of a meridian domain.

    ``boundary_edges`` walk the boundary counterclockwise (interior on the
    left): bottom from the lowest point to the corner, surface from the
    corner back to the axis, axis down to the lowest point.  The structured
    fields (``xi``, ``y_levels``, ``node_rows``) expose the mapped-grid
    layout used by the stream-function integrator.
    """

    nodes: np.ndarray          # (n, 2) float (r, y)
    triangles: np.ndarray      # (nt, 3) int, counterclockwise
    boundary_edges: np.ndarray  # (ne, 2) int
    boundary_tags: tuple       # (ne,) tag strings
    grading: GradingSpec
    domain: MeridianDomain
    xi: np.ndarray             # (nr+1,) logical radial grid
    y_levels: np.ndarray       # (ny+1,) depth rows, ascending to 0
    g_levels: np.ndarray       # (ny+1,) profile radius at each row
    node_rows: tuple           # per-row node index arrays, bottom to surface
    collapsed: bool = field(default=False)

    def __post_init__(self):
        for arr in (self.nodes, self.triangles, self.boundary_edges,
                    self.xi, self.y_levels, self.g_levels):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def surface_nodes(self) -> np.ndarray:
        """Free-surface node indices in ascending radius order."""
        return self.node_rows[-1]

    @property
    def corner_node(self) -> int:
        return int(self.node_rows[-1][-1])

    @property
    def axis_nodes(self) -> np.ndarray:
        first = [row[0] for row in self.node_rows if self.nodes[row[0], 0] == 0.0]
        return np.unique(np.array(first, dtype=int))

    @property
    def bottom_nodes(self) -> np.ndarray:
        sel = np.array(
            [t == BOTTOM for t in self.boundary_tags], dtype=bool
        )
        return np.unique(self.boundary_edges[sel].ravel())

    def nodes_with_tag(self, tag: str) -> np.ndarray:
        sel = np.array([t == tag for t in self.boundary_tags], dtype=bool)
        return np.unique(self.boundary_edges[sel].ravel())


def generate(D: MeridianDomain, spec: GradingSpec) -> Mesh:
    """Generate the mapped-grid triangulation of D."""
    nr, ny = spec.nr, spec.ny
    axis_ratio = 1.0 if spec.axis_ratio is None else spec.axis_ratio
    xi = graded_points(nr, end_ratio=spec.corner_ratio)
    t = graded_points(ny, end_ratio=spec.corner_ratio, start_ratio=axis_ratio)
    yv = D.y0 * (1.0 - t)
    yv[-1] = 0.0
    gv = np.asarray(D.g(yv), dtype=float).copy()
    gv[-1] = D.r0
    if np.any(gv[1:] <= 0.0):
        j = int(np.argmax(gv[1:] <= 0.0)) + 1
        raise MeshingError(
            f"profile radius vanishes on an interior grid row (y={yv[j]:.6g}); "
            "domain degenerates to zero thickness"
        )
    collapsed = gv[0] == 0.0

    # node layout: optional apex node, then full rows bottom to surface
    if collapsed:
        n_nodes = 1 + (nr + 1) * ny
        nodes = np.empty((n_nodes, 2))
        nodes[0] = (0.0, yv[0])
        rows = [np.array([0], dtype=int)]
        base = 1
        j_start = 1
    else:
        n_nodes = (nr + 1) * (ny + 1)
        nodes = np.empty((n_nodes, 2))
        rows = []
        base = 0
        j_start = 0
    for j in range(j_start, ny + 1):
        idx = base + (j - j_start) * (nr + 1) + np.arange(nr + 1)
        nodes[idx, 0] = xi * gv[j]
        nodes[idx[0], 0] = 0.0
        nodes[idx, 1] = yv[j]
        rows.append(idx)

    def nid(i: int, j: int) -> int:
        if collapsed and j == 0:
            return 0
        return base + (j - j_start) * (nr + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nr):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            if a == b:
                tris.append((a, c, d))
            else:
                tris.append((a, b, c))
                tris.append((a, c, d))
    triangles = np.array(tris, dtype=int)

    # boundary loop, counterclockwise: bottom -> surface -> axis
    edges = []
    tags = []
    if not collapsed:
        for i in range(nr):  # floor, axis outward
            edges.append((nid(i, 0), nid(i + 1, 0)))
            tags.append(BOTTOM)
    for j in range(ny):  # wall, upward to the corner
        edges.append((nid(nr, j), nid(nr, j + 1)))
        tags.append(BOTTOM)
    for i in range(nr, 0, -1):  # free surface, corner back to the axis
        edges.append((nid(i, ny), nid(i - 1, ny)))
        tags.append(FREE_SURFACE)
    for j in range(ny, 0, -1):  # axis, downward
        edges.append((nid(0, j), nid(0, j - 1)))
        tags.append(AXIS)

    return Mesh(
        nodes=nodes,
        triangles=triangles,
        boundary_edges=np.array(edges, dtype=int),
        boundary_tags=tuple(tags),
        grading=spec,
        domain=D,
        xi=xi,
        y_levels=yv,
        g_levels=gv,
        node_rows=tuple(rows),
        collapsed=collapsed,
    )


def refine(mesh: Mesh) -> Mesh:
    """Regenerate with both cell counts doubled and the same grading."""
    spec = mesh.grading
    if 2 * spec.nr > MAX_CELLS or 2 * spec.ny > MAX_CELLS:
        raise ResourceLimitError(
            f"refinement past {MAX_CELLS} cells per direction is not supported"
        )
    return generate(mesh.domain, spec.doubled())


def triangle_areas(mesh: Mesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def p1_gradients(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Per-triangle gradient (d/dr, d/dy) of a P1 nodal field."""
    p = mesh.nodes[mesh.triangles]
    f = np.asarray(values)[mesh.triangles]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    det = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    df1 = f[:, 1] - f[:, 0]
    df2 = f[:, 2] - f[:, 0]
    gr = (df1 * v[:, 1] - df2 * u[:, 1]) / det
    gy = (-df1 * v[:, 0] + df2 * u[:, 0]) / det
    return np.column_stack([gr, gy])


def _min_angles_deg(mesh: Mesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    angs = np.empty((len(p), 3))
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        cosang = np.clip((a * b).sum(axis=1) / (na * nb), -1.0, 1.0)
        angs[:, k] = np.degrees(np.arccos(cosang))
    return angs.min(axis=1)


@dataclass
class MeshReport:
    ok: bool
    issues: list
    warnings: list
    min_angle_deg: float
    area_sum: float

    @property
    def first_violation(self):
        return self.issues[0] if self.issues else None


def validate(mesh: Mesh) -> MeshReport:
    """Check every structural mesh invariant; violations become report entries."""
    issues = []
    warn = []

    areas = triangle_areas(mesh)
    bad = np.where(areas <= 0.0)[0]
    if bad.size:
        issues.append(f"nonpositive area in triangle {int(bad[0])}")

    if np.any(mesh.nodes[:, 0] < 0.0):
        issues.append("node with negative radius")

    tags = np.array(mesh.boundary_tags)
    edges = mesh.boundary_edges
    for tag, sel in ((FREE_SURFACE, tags == FREE_SURFACE), (AXIS, tags == AXIS)):
        nn = np.unique(edges[sel].ravel())
        coords = mesh.nodes[nn]
        if tag == FREE_SURFACE:
            if np.any(coords[:, 1] != 0.0):
                issues.append("free-surface edge off the y = 0 line")
            if np.any(coords[:, 0] < 0.0) or np.any(coords[:, 0] > mesh.domain.r0 * (1 + 1e-12)):
                issues.append("free-surface edge outside [0, r0]")
        else:
            if np.any(coords[:, 0] != 0.0):
                issues.append("axis edge off the r = 0 line")

    # bottom nodes must sit on the profile curve (or its flat floor)
    bn = mesh.nodes_with_tag(BOTTOM)
    rr, yy = mesh.nodes[bn, 0], mesh.nodes[bn, 1]
    gvals = np.asarray(mesh.domain.g(yy), dtype=float)
    on_wall = np.abs(rr - gvals) <= 1e-9 * max(1.0, mesh.domain.r0)
    on_floor = (yy == mesh.y_levels[0]) & (rr <= gvals + 1e-12)
    if not np.all(on_wall | on_floor):
        k = int(np.argmin(on_wall | on_floor))
        issues.append(
            f"bottom node {int(bn[k])} at (r={rr[k]:.6g}, y={yy[k]:.6g}) off the profile"
        )

    # tagged edges must form one closed loop equal to the triangulation boundary
    pair_count = {}
    for tri in mesh.triangles:
        for k in range(3):
            key = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
            pair_count[key] = pair_count.get(key, 0) + 1
    tri_boundary = {k for k, c in pair_count.items() if c == 1}
    tagged = [tuple(sorted((int(a), int(b)))) for a, b in edges]
    if len(set(tagged)) != len(tagged):
        issues.append("duplicate tagged boundary edge")
    if set(tagged) != tri_boundary:
        missing = tri_boundary - set(tagged)
        extra = set(tagged) - tri_boundary
        if missing:
            issues.append(f"untagged boundary edge {sorted(missing)[0]}")
        if extra:
            issues.append(f"tagged edge {sorted(extra)[0]} is not a boundary edge")
    else:
        nxt = {int(a): int(b) for a, b in edges}
        start = int(edges[0, 0])
        seen = 1
        node = nxt.get(start)
        while node is not None and node != start and seen <= len(edges):
            node = nxt.get(node)
            seen += 1
        if node != start or seen != len(edges):
            issues.append("tagged edges do not close into a single loop")

    min_angle = float(_min_angles_deg(mesh).min())
    if min_angle < MIN_ANGLE_DEG:
        msg = f"minimum triangle angle {min_angle:.3g} deg below {MIN_ANGLE_DEG} deg"
        warn.append(msg)
        warnings.warn(msg, stacklevel=2)

    return MeshReport(
        ok=not issues,
        issues=issues,
        warnings=warn,
        min_angle_deg=min_angle,
        area_sum=float(triangle_areas(mesh).sum()),
    )


def dump_csv(mesh: Mesh, outdir) -> None:
    """Write nodes.csv / tris.csv / bnd.csv with 17-significant-digit decimals."""
    import os

    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "nodes.csv"), "w") as fh:
        fh.write("index,r,y\n")
        for k, (r, y) in enumerate(mesh.nodes):
            fh.write(f"{k},{r:.17g},{y:.17g}\n")
    with open(os.path.join(outdir, "tris.csv"), "w") as fh:
        fh.write("n0,n1,n2\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a},{b},{c}\n")
    with open(os.path.join(outdir, "bnd.csv"), "w") as fh:
        fh.write("n0,n1,tag\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{a},{b},{tag}\n")
