"""Theorem-level verification on solved eigenproblems.

Each routine turns one claim into a measurable record: monotonicity of the
fundamental odd mode (both meridian derivatives nonnegative), high-spot
location on the free surface together with the contact-corner expansion
slope, ordering and multiplicity of the low spectrum, sign structure of
the Dirichlet-Steklov ground state, Stokes stream functions by per-row
integration, domain-monotonicity chains, and eigenvalue continuity under
the affine bottom deformation measured in the star-shaped sup distance.

Strict inequalities cannot be certified by a discrete solve, so every
ordering assertion carries a margin requirement: the inequality must hold
by more than five times the discretization error estimated from one
refinement step.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import eigensolver as es
from .assembly import ProblemKind, assemble
from .errors import (
    InvalidFamilyError,
    InvalidFieldError,
    InvalidParameterError,
    UnsupportedMeshError,
)
from .eigensolver import EigenSolution
from .geometry import ClassParams, MeridianDomain, deform, distance, star_rep
from .mesh import GradingSpec, Mesh, generate, p1_gradients

__all__ = [
    "MonotonicityReport",
    "HighSpotReport",
    "StreamField",
    "SpectrumReport",
    "ConjectureRecord",
    "ChainRecord",
    "ContinuityTable",
    "solve_domain",
    "solve_with_error",
    "stream_function",
    "monotonicity_report",
    "highspot",
    "spectrum_report",
    "dirichlet_steklov_first",
    "conjecture_probe",
    "domain_monotonicity_experiment",
    "continuity_experiment",
    "parallel_map",
]

#: ordering margins must exceed this multiple of the refinement error
MARGIN_FACTOR = 5.0
#: default relative tolerance for gradient-sign checks
MONOTONICITY_TOL = 1e-3
#: surface cells between the corner and an argmax still counted as "at the corner"
INTERIOR_MARGIN_CELLS = 2


def parallel_map(fn, items):
    """Map with optional thread fan-out capped by SLOSH_THREADS."""
    workers = int(os.environ.get("SLOSH_THREADS", "1") or "1")
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def solve_domain(D: MeridianDomain, spec: GradingSpec, m: int,
                 kind: ProblemKind = ProblemKind.SLOSHING, k: int = 1) -> EigenSolution:
    """Mesh, assemble and solve one reduced mode problem."""
    mesh = generate(D, spec)
    return es.solve(assemble(mesh, m, kind), k)


def solve_with_error(D: MeridianDomain, spec: GradingSpec, m: int,
                     kind: ProblemKind = ProblemKind.SLOSHING,
                     k: int = 1) -> tuple[EigenSolution, np.ndarray]:
    """Solve at the given grading and once refined; return fine solution
    plus per-eigenvalue discretization-error estimates |nu_fine - nu_coarse|."""
    coarse = solve_domain(D, spec, m, kind, k)
    fine = solve_domain(D, spec.doubled(), m, kind, k)
    kk = min(coarse.k, fine.k)
    err = np.abs(fine.eigenvalues[:kk] - coarse.eigenvalues[:kk])
    return fine, err


# ---------------------------------------------------------------------------
# stream function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StreamField:
    """Stokes stream function on the mesh nodes.

    Zero on the axis by construction (integration starts there);
    ``boundary_residual`` is the largest magnitude on bottom nodes, which
    the exact stream function would keep at zero; it is the natural noise
    floor of the row integration.  ``sign_constant`` applies the strict
    1e-6 relative tolerance; ``wrong_sign_magnitude`` reports the worst
    opposite-sign interior value relative to the field maximum so callers
    can compare against the noise floor.
    """

    values: np.ndarray
    boundary_residual: float
    sign_constant: bool
    wrong_sign_magnitude: float

    def __post_init__(self):
        self.values.setflags(write=False)


def _logical_derivative(vals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Three-point (second order) derivative along the last axis, one-sided
    at the ends, on a nonuniform grid."""
    n = len(x)
    out = np.empty_like(vals, dtype=float)
    for j in range(n):
        j0, j1, j2 = (0, 1, 2) if j == 0 else ((n - 3, n - 2, n - 1) if j == n - 1 else (j - 1, j, j + 1))
        x0, x1, x2 = x[j0], x[j1], x[j2]
        xx = x[j]
        w0 = (2 * xx - x1 - x2) / ((x0 - x1) * (x0 - x2))
        w1 = (2 * xx - x0 - x2) / ((x1 - x0) * (x1 - x2))
        w2 = (2 * xx - x0 - x1) / ((x2 - x0) * (x2 - x1))
        out[..., j] = w0 * vals[..., j0] + w1 * vals[..., j1] + w2 * vals[..., j2]
    return out


def _logical_field(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Nodal field as a (nr+1, ny+1) logical-grid array (apex row replicated)."""
    nr = len(mesh.xi) - 1
    ny = len(mesh.y_levels) - 1
    P = np.empty((nr + 1, ny + 1))
    for j, row in enumerate(mesh.node_rows):
        P[:, j] = values[row] if len(row) > 1 else values[row[0]]
    return P


def stream_function(sol: EigenSolution, index: int = 0) -> StreamField:
    """Stokes stream function of an axisymmetric field by row integration.

    The radial stream derivative is r d(psi)/dy; the nodal d(psi)/dy is
    recovered on the logical (xi, y) grid by the mapped-grid chain rule
    (exact profile slope where the domain provides one) and integrated
    with the trapezoid rule along each constant-depth row from the axis.
    """
    problem = sol.problem
    mesh = problem.mesh
    if mesh.node_rows is None or mesh.xi is None:
        raise UnsupportedMeshError("stream integration needs a mapped-grid mesh")
    if problem.m != 0:
        raise InvalidParameterError("stream function applies to axisymmetric (m = 0) fields")
    values = sol.fields[index]

    xi = mesh.xi
    yv = mesh.y_levels
    gv = mesh.g_levels
    P = _logical_field(mesh, values)
    dP_dxi = _logical_derivative(P.T, xi).T
    dP_dy = _logical_derivative(P, yv)
    gp = np.asarray(mesh.domain.gprime(yv), dtype=float)

    psi_y = np.zeros_like(P)
    for j in range(len(yv)):
        if gv[j] == 0.0:
            continue  # collapsed apex row: single point, stream is zero there
        slope = gp[j] if math.isfinite(gp[j]) else 0.0
        psi_y[:, j] = dP_dy[:, j] - (xi * slope / gv[j]) * dP_dxi[:, j]

    stream_logical = np.zeros_like(P)
    for j in range(len(yv)):
        r = xi * gv[j]
        f = r * psi_y[:, j]
        stream_logical[1:, j] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(r))

    out = np.zeros(mesh.n_nodes)
    for j, row in enumerate(mesh.node_rows):
        if len(row) > 1:
            out[row] = stream_logical[:, j]
        else:
            out[row[0]] = 0.0

    bottom = mesh.bottom_nodes
    boundary_residual = float(np.max(np.abs(out[bottom]))) if bottom.size else 0.0
    boundary = np.unique(mesh.boundary_edges.ravel())
    interior_mask = np.ones(mesh.n_nodes, dtype=bool)
    interior_mask[boundary] = False
    inner = out[interior_mask]
    scale = float(np.max(np.abs(out))) or 1.0
    hi, lo = float(inner.max()), float(inner.min())
    wrong = -lo / scale if hi >= -lo else hi / scale
    sign_constant = bool(wrong <= 1e-6)
    return StreamField(values=out, boundary_residual=boundary_residual,
                       sign_constant=sign_constant,
                       wrong_sign_magnitude=max(wrong, 0.0))


# ---------------------------------------------------------------------------
# monotonicity and high spot
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    """Sign record of the per-triangle derivatives of the fundamental mode."""

    min_dpsi_dr: float        # relative to max gradient magnitude
    min_dpsi_dy: float
    violation_fraction: float
    tol: float


def monotonicity_report(sol: EigenSolution, tol: float = MONOTONICITY_TOL) -> MonotonicityReport:
    if sol.problem.m != 1:
        raise InvalidParameterError("monotonicity report applies to the m = 1 fundamental mode")
    grads = p1_gradients(sol.problem.mesh, sol.fields[0])
    scale = float(np.max(np.linalg.norm(grads, axis=1)))
    if scale == 0.0:
        raise InvalidFieldError("gradient field is identically zero")
    rel = grads / scale
    viol = np.mean((rel[:, 0] < -tol) | (rel[:, 1] < -tol))
    return MonotonicityReport(
        min_dpsi_dr=float(rel[:, 0].min()),
        min_dpsi_dy=float(rel[:, 1].min()),
        violation_fraction=float(viol),
        tol=tol,
    )


@dataclass(frozen=True)
class HighSpotReport:
    """Location of the free-surface maximum of the fundamental mode."""

    argmax_r: float
    interior: bool
    sign_change: bool
    contact_slope_fit: float
    slope_target: float       # -nu cot(theta0) from the corner expansion
    nu: float


def highspot(sol: EigenSolution, fit_cells: int = 5) -> HighSpotReport:
    if sol.problem.m != 1:
        raise InvalidParameterError("high-spot analysis applies to the m = 1 fundamental mode")
    r, vals = sol.surface_trace(0)
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0:
        raise InvalidFieldError("surface trace is identically zero")

    idx = int(np.argmax(vals))
    interior = idx <= len(vals) - 1 - INTERIOR_MARGIN_CELLS

    slopes = np.diff(vals) / np.diff(r)
    sscale = float(np.max(np.abs(slopes)))
    sign_change = bool(np.any(slopes > 1e-6 * sscale) and np.any(slopes < -1e-6 * sscale))

    corner_val = vals[-1]
    nu = float(sol.eigenvalues[0])
    theta0 = sol.problem.mesh.domain.contact_angle
    target = -nu / math.tan(theta0)
    if abs(corner_val) < 1e-12 * scale:
        fit = math.nan
    else:
        x = r[-1] - r[-(fit_cells + 1):]
        yv = vals[-(fit_cells + 1):] / corner_val
        A = np.column_stack([x, np.ones_like(x)])
        fit = float(np.linalg.lstsq(A, yv, rcond=None)[0][0])
    return HighSpotReport(
        argmax_r=float(r[idx]),
        interior=bool(interior),
        sign_change=sign_change,
        contact_slope_fit=fit,
        slope_target=float(target),
        nu=nu,
    )


# ---------------------------------------------------------------------------
# spectrum ordering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumReport:
    """Low sloshing spectrum with ordering assertions and margins."""

    domain_tag: str
    eigenvalues: dict          # (m, k) -> nu, from the fine level
    error_estimates: dict      # (m, k) -> |nu_fine - nu_coarse|
    assertions: tuple          # (name, margin, required, passed)
    ordering_ok: bool
    multiplicity: dict         # (m, k) -> multiplicity in the 3D spectrum

    def as_rows(self):
        return [
            {"m": m, "k": k, "nu": self.eigenvalues[(m, k)],
             "err_est": self.error_estimates[(m, k)],
             "multiplicity_3d": self.multiplicity[(m, k)]}
            for (m, k) in sorted(self.eigenvalues)
        ]


def spectrum_report(D: MeridianDomain, spec: GradingSpec, m_max: int = 2,
                    k_max: int = 2) -> SpectrumReport:
    """Solve modes m = 0..m_max and assert the fundamental-ordering claims.

    The fundamental eigenvalue must be nu_{1,1}: it is compared against
    nu_{0,1}, nu_{2,1} and nu_{1,2}, each inequality required to hold with
    margin exceeding five times the refinement-estimated error.  The m >= 1
    values enter the 3D spectrum twice (cos / sin pairing), recorded as
    bookkeeping in ``multiplicity``.
    """
    if m_max < 2 or k_max < 2:
        raise InvalidParameterError("ordering needs m_max >= 2 and k_max >= 2")

    def run(m):
        return solve_with_error(D, spec, m, ProblemKind.SLOSHING, k_max)

    results = parallel_map(run, range(m_max + 1))
    eigenvalues = {}
    errors = {}
    multiplicity = {}
    for m, (sol, err) in enumerate(results):
        for j in range(sol.k):
            eigenvalues[(m, j + 1)] = float(sol.eigenvalues[j])
            errors[(m, j + 1)] = float(err[j]) if j < len(err) else math.nan
            multiplicity[(m, j + 1)] = 2 if m >= 1 else 1

    nu11 = eigenvalues[(1, 1)]
    checks = []
    for name, other in (("nu11<nu01", (0, 1)), ("nu11<nu21", (2, 1)), ("nu11<nu12", (1, 2))):
        margin = eigenvalues[other] - nu11
        required = MARGIN_FACTOR * (errors[other] + errors[(1, 1)])
        checks.append((name, float(margin), float(required), bool(margin > required)))

    return SpectrumReport(
        domain_tag=D.tag,
        eigenvalues=eigenvalues,
        error_estimates=errors,
        assertions=tuple(checks),
        ordering_ok=all(c[3] for c in checks),
        multiplicity=multiplicity,
    )


# ---------------------------------------------------------------------------
# Dirichlet-Steklov ground state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirichletSteklovRecord:
    nu: float
    sign_constant: bool
    min_over_max: float
    solution: EigenSolution


def dirichlet_steklov_first(D: MeridianDomain, spec: GradingSpec) -> DirichletSteklovRecord:
    """First axisymmetric Dirichlet-Steklov eigenpair with its sign check."""
    sol = solve_domain(D, spec, 0, ProblemKind.DIRICHLET_STEKLOV, 1)
    values = sol.fields[0]
    free = sol.problem.free_nodes
    vmax = float(np.max(values[free]))
    vmin = float(np.min(values[free]))
    sign_constant = vmin >= -1e-8 * max(vmax, 1e-300)
    return DirichletSteklovRecord(
        nu=float(sol.eigenvalues[0]),
        sign_constant=bool(sign_constant),
        min_over_max=vmin / vmax if vmax else math.nan,
        solution=sol,
    )


# ---------------------------------------------------------------------------
# Troesch conjecture probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConjectureRecord:
    lam: float
    located_index: int         # 1-based k with nu_{0,k} closest to lam
    located_nu: float
    rel_mismatch: float
    nu01: float
    nu_ds01: float
    ds_dominates: bool         # nu01 >= nu_ds01 branch of the dichotomy
    dichotomy_ok: bool         # located-at-lam or ds_dominates
    spectrum: tuple


def conjecture_probe(lam: float, spec: GradingSpec | None = None,
                     k_max: int = 8, rel_tol: float = 0.01) -> ConjectureRecord:
    """Locate the closed-form eigenvalue lam inside the computed m = 0
    spectrum of the Troesch body and report which alternative of the
    first-eigenvalue dichotomy holds."""
    from .geometry import make_troesch

    if spec is None:
        spec = GradingSpec(128, 128, 0.85)
    D = make_troesch(lam)
    sol = solve_domain(D, spec, 0, ProblemKind.SLOSHING, k_max)
    nus = sol.eigenvalues
    j = int(np.argmin(np.abs(nus - lam)))
    ds = dirichlet_steklov_first(D, spec)
    rel = abs(nus[j] - lam) / lam
    ds_dominates = float(nus[0]) >= ds.nu
    return ConjectureRecord(
        lam=lam,
        located_index=j + 1,
        located_nu=float(nus[j]),
        rel_mismatch=float(rel),
        nu01=float(nus[0]),
        nu_ds01=ds.nu,
        ds_dominates=bool(ds_dominates),
        dichotomy_ok=bool(ds_dominates or rel <= rel_tol),
        spectrum=tuple(float(v) for v in nus),
    )


# ---------------------------------------------------------------------------
# domain monotonicity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainRecord:
    tags: tuple
    nu01: tuple
    nu11: tuple
    nu_ds01: tuple
    tolerances: tuple          # per-link slack allowed (5x refinement errors)
    nu01_nondecreasing: bool
    nu11_nondecreasing: bool
    nu_ds01_nonincreasing: bool

    @property
    def ok(self) -> bool:
        return self.nu01_nondecreasing and self.nu11_nondecreasing and self.nu_ds01_nonincreasing


def _check_nested(family) -> None:
    for small, big in zip(family, family[1:]):
        if abs(small.r0 - big.r0) > 1e-12 * max(small.r0, big.r0):
            raise InvalidFamilyError("family members must share the free surface")
        if small.y0 < big.y0 - 1e-12:
            raise InvalidFamilyError(
                f"{small.tag} is deeper than {big.tag}; family is not nested"
            )
        ys = np.linspace(small.y0, 0.0, 1001)
        gs = np.asarray(small.g(ys), dtype=float)
        gb = np.asarray(big.g(ys), dtype=float)
        if np.any(gs > gb + 1e-9 * max(1.0, big.r0)):
            raise InvalidFamilyError(
                f"profile of {small.tag} exceeds {big.tag}; family is not nested"
            )


def domain_monotonicity_experiment(family, spec: GradingSpec) -> ChainRecord:
    """Check eigenvalue monotonicity along a nested family (small to large).

    With a shared free surface, growing the domain must not decrease
    nu_{0,1} or nu_{1,1} and must not increase the Dirichlet-Steklov
    ground eigenvalue; each link may fail only within five times the
    refinement-error estimate of its endpoints.
    """
    family = list(family)
    if len(family) < 2:
        raise InvalidFamilyError("need at least two nested domains")
    _check_nested(family)

    def run(D):
        s01, e01 = solve_with_error(D, spec, 0, ProblemKind.SLOSHING, 1)
        s11, e11 = solve_with_error(D, spec, 1, ProblemKind.SLOSHING, 1)
        sds, eds = solve_with_error(D, spec, 0, ProblemKind.DIRICHLET_STEKLOV, 1)
        return (
            (float(s01.eigenvalues[0]), float(e01[0])),
            (float(s11.eigenvalues[0]), float(e11[0])),
            (float(sds.eigenvalues[0]), float(eds[0])),
        )

    rows = parallel_map(run, family)
    nu01 = tuple(r[0][0] for r in rows)
    nu11 = tuple(r[1][0] for r in rows)
    nuds = tuple(r[2][0] for r in rows)

    def link_tol(vals_errs):
        return tuple(
            MARGIN_FACTOR * (vals_errs[i][1] + vals_errs[i + 1][1])
            for i in range(len(vals_errs) - 1)
        )

    tol01 = link_tol([r[0] for r in rows])
    tol11 = link_tol([r[1] for r in rows])
    tolds = link_tol([r[2] for r in rows])

    up01 = all(nu01[i + 1] - nu01[i] >= -tol01[i] for i in range(len(family) - 1))
    up11 = all(nu11[i + 1] - nu11[i] >= -tol11[i] for i in range(len(family) - 1))
    down = all(nuds[i] - nuds[i + 1] >= -tolds[i] for i in range(len(family) - 1))

    return ChainRecord(
        tags=tuple(D.tag for D in family),
        nu01=nu01,
        nu11=nu11,
        nu_ds01=nuds,
        tolerances=(tol01, tol11, tolds),
        nu01_nondecreasing=bool(up01),
        nu11_nondecreasing=bool(up11),
        nu_ds01_nonincreasing=bool(down),
    )


# ---------------------------------------------------------------------------
# continuity under deformation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuityTable:
    s_values: tuple
    distances: tuple
    dnu: tuple
    fitted_exponent: float
    fitted_constant: float     # smallest C with |dnu| <= C d^(1/3) on the sample
    d_monotone: bool
    dnu_monotone: bool


def continuity_experiment(D: MeridianDomain, s_list, params: ClassParams,
                          spec: GradingSpec, n_angles: int = 4096) -> ContinuityTable:
    """Distances d(W_s, W_1) and eigenvalue shifts for the deformation family."""
    base_rep = star_rep(D, params, n_angles)
    base_nu = float(solve_domain(D, spec, 1, ProblemKind.SLOSHING, 1).eigenvalues[0])

    def run(s):
        Ds = deform(D, s)
        d = distance(star_rep(Ds, params, n_angles), base_rep)
        nu = float(solve_domain(Ds, spec, 1, ProblemKind.SLOSHING, 1).eigenvalues[0])
        return d, abs(nu - base_nu)

    rows = parallel_map(run, list(s_list))
    dvals = tuple(r[0] for r in rows)
    dnus = tuple(r[1] for r in rows)

    pos = [(d, dn) for d, dn in zip(dvals, dnus) if d > 0 and dn > 0]
    if len(pos) >= 2:
        ld = np.log([p[0] for p in pos])
        ln = np.log([p[1] for p in pos])
        slope = float(np.polyfit(ld, ln, 1)[0])
        cfit = float(max(dn / d ** (1.0 / 3.0) for d, dn in pos))
    else:
        slope = math.nan
        cfit = 0.0

    s_arr = list(s_list)
    order = np.argsort(s_arr)
    d_sorted = np.array(dvals)[order]
    n_sorted = np.array(dnus)[order]
    return ContinuityTable(
        s_values=tuple(float(s) for s in s_arr),
        distances=dvals,
        dnu=dnus,
        fitted_exponent=slope,
        fitted_constant=cfit,
        d_monotone=bool(np.all(np.diff(d_sorted) <= 1e-15)),
        dnu_monotone=bool(np.all(np.diff(n_sorted) <= 1e-12)),
    )
