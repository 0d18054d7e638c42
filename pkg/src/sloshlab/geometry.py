"""Meridian domains for the axisymmetric sloshing problem.

A liquid body of revolution is described here by its meridian cross-section
in the (r, y) half-plane: a free surface on y = 0, the symmetry axis r = 0,
and a rigid bottom given as a radius profile r = g(y) with g nondecreasing
in y (the monotone-bottom class).  The module constructs the closed-form
families used throughout the verification suite (cylinders, cones, the
Troesch family, spherical bulges), validates user profiles, applies the
affine deformation g_s = 1 - s + s*g, and builds the star-shaped radial
representation from which the sup-norm distance between domains is
measured.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ClassViolationError,
    IncompatibleRepresentationError,
    InvalidParameterError,
    UnsupportedDomainError,
)

__all__ = [
    "Profile",
    "MeridianDomain",
    "ClassParams",
    "StarRep",
    "make_cylinder",
    "make_cone",
    "make_troesch",
    "make_spherical_bulge",
    "make_hemisphere",
    "make_profile",
    "deform",
    "star_rep",
    "distance",
    "validate_class_membership",
    "from_spec",
    "load_profile_csv",
    "troesch_bottom_depth",
]

#: relative tolerance for the "bottom never overhangs the rim" flag
JOHN_RTOL = 1e-12
#: absolute tolerance on slope second differences for the concavity flag
CONVEXITY_TOL = 1e-10
#: default number of profile samples emitted by the closed-form generators
DEFAULT_SAMPLES = 257
#: default number of angles for the star representation
DEFAULT_ANGLES = 4096


def troesch_bottom_depth(lam: float) -> float:
    """Depth of the Troesch body: larger root of 4 y^2 + 8 y/lam + 1 = 0."""
    return (-4.0 / lam + math.sqrt(16.0 / lam**2 - 4.0)) / 4.0


@dataclass(frozen=True)
class Profile:
    """Sampled radius profile g(y) of a meridian bottom.

    ``y_samples`` increase strictly to 0 and ``g_samples`` holds g(y) >= 0 at
    each depth.  ``closed_form_tag`` records the analytic origin using the
    same mini-language as the CLI ("cylinder:h=1", "troesch:lambda=0.5",
    "hemisphere", "custom", ...).  Generators additionally attach exact
    callables for g and g' so that meshing and stream recovery do not pay
    interpolation error; sampled (custom) profiles fall back to
    piecewise-linear evaluation.
    """

    y_samples: np.ndarray
    g_samples: np.ndarray
    closed_form_tag: str = "custom"
    g_exact: Callable[[float], float] | None = field(default=None, compare=False, repr=False)
    gprime_exact: Callable[[float], float] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        ys = np.asarray(self.y_samples, dtype=float)
        gs = np.asarray(self.g_samples, dtype=float)
        ys.setflags(write=False)
        gs.setflags(write=False)
        object.__setattr__(self, "y_samples", ys)
        object.__setattr__(self, "g_samples", gs)
        if ys.size < 2:
            raise InvalidParameterError("profile needs at least two samples")
        if not np.all(np.diff(ys) > 0):
            raise InvalidParameterError("profile depths must be strictly increasing")
        if ys[-1] != 0.0:
            raise InvalidParameterError("profile must end at the free surface y = 0")
        if ys[0] >= 0.0:
            raise InvalidParameterError("profile must start at a depth y0 < 0")
        if np.any(gs < 0.0):
            raise InvalidParameterError("profile radii must be nonnegative")
        if gs[-1] <= 0.0:
            raise InvalidParameterError("free-surface radius g(0) must be positive")

    @property
    def monotone(self) -> bool:
        """Discrete class-membership test: g nondecreasing along y."""
        return bool(np.all(np.diff(self.g_samples) >= -1e-14 * max(1.0, self.g_samples.max())))

    def g(self, y):
        """Evaluate the radius profile (exact when available)."""
        if self.g_exact is not None:
            if np.isscalar(y):
                return self.g_exact(float(y))
            return np.array([self.g_exact(float(v)) for v in np.asarray(y).ravel()]).reshape(np.shape(y))
        return np.interp(y, self.y_samples, self.g_samples)

    def gprime(self, y):
        """One-sided-safe derivative of the profile (exact when available)."""
        if self.gprime_exact is not None:
            if np.isscalar(y):
                return self.gprime_exact(float(y))
            return np.array([self.gprime_exact(float(v)) for v in np.asarray(y).ravel()]).reshape(np.shape(y))
        ys, gs = self.y_samples, self.g_samples
        slopes = np.diff(gs) / np.diff(ys)
        idx = np.clip(np.searchsorted(ys, np.atleast_1d(y), side="right") - 1, 0, len(slopes) - 1)
        out = slopes[idx]
        return float(out[0]) if np.isscalar(y) else out.reshape(np.shape(y))


@dataclass(frozen=True)
class MeridianDomain:
    """A validated meridian cross-section with geometry metadata.

    ``john`` is true when the bottom never widens past the free-surface rim
    (the solid of revolution fits inside the vertical cylinder over the free
    surface).  ``convex`` records discrete concavity of g, which for bodies
    of revolution is convexity of the solid.  ``class_d`` is true when g is
    nondecreasing, i.e. the domain belongs to the monotone-bottom class all
    theorem-level checks are formulated for; the spherical bulge generator
    deliberately produces ``class_d = False`` domains.
    """

    profile: Profile
    r0: float
    y0: float
    contact_angle: float
    john: bool
    convex: bool
    class_d: bool

    def g(self, y):
        return self.profile.g(y)

    def gprime(self, y):
        return self.profile.gprime(y)

    @property
    def tag(self) -> str:
        return self.profile.closed_form_tag

    @property
    def depth(self) -> float:
        return -self.y0

    def describe(self) -> dict:
        return {
            "tag": self.tag,
            "r0": self.r0,
            "y0": self.y0,
            "contact_angle": self.contact_angle,
            "john": self.john,
            "convex": self.convex,
            "class_d": self.class_d,
        }


@dataclass(frozen=True)
class ClassParams:
    """Regularity parameters (eps, M, H, r0) of the monotone-bottom class."""

    eps: float
    M: float
    H: float
    r0: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.eps < min(self.r0, self.H)):
            raise InvalidParameterError("eps must lie in (0, min(r0, H))")
        if self.M < 1.0:
            raise InvalidParameterError("Lipschitz constant M must be >= 1")

    @property
    def h0(self) -> float:
        """Anchor depth of the star representation, eps / (2 M)."""
        return self.eps / (2.0 * self.M)


@dataclass(frozen=True)
class StarRep:
    """Radial function of a domain viewed from the anchor p0 = (0, -h0).

    Angles are measured from the downward axis direction at the anchor:
    alpha = 0 points at the lowest axis point and alpha = pi points up at
    the free surface, which the ray meets at distance h0.  Beyond the corner
    angle the boundary seen from p0 is the free surface line, so there
    f(alpha) = -h0 / cos(alpha) exactly.
    """

    p0: tuple[float, float]
    alpha_grid: np.ndarray
    f_values: np.ndarray
    lipschitz_bound: float
    params: ClassParams

    def __post_init__(self):
        self.alpha_grid.setflags(write=False)
        self.f_values.setflags(write=False)

    def boundary_points(self) -> np.ndarray:
        """Reconstruct boundary points (r, y) from the radial function."""
        a, f = self.alpha_grid, self.f_values
        return np.column_stack([f * np.sin(a), self.p0[1] - f * np.cos(a)])


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def _contact_slope(ys: np.ndarray, gs: np.ndarray) -> float:
    """One-sided slope of g at y -> 0-, from the last three samples.

    Fits the interpolating parabola through the final three points and takes
    its derivative at y = 0; equivalent to one-sided differencing plus one
    Richardson extrapolation step on a nonuniform grid.  Two-sample
    profiles fall back to the single first-order slope.
    """
    if len(ys) == 2:
        return float((gs[1] - gs[0]) / (ys[1] - ys[0]))
    y2, y1, y0_ = ys[-3], ys[-2], ys[-1]
    g2, g1, g0_ = gs[-3], gs[-2], gs[-1]
    w2 = (2 * y0_ - y1 - y0_) / ((y2 - y1) * (y2 - y0_))
    w1 = (2 * y0_ - y2 - y0_) / ((y1 - y2) * (y1 - y0_))
    w0 = (2 * y0_ - y2 - y1) / ((y0_ - y2) * (y0_ - y1))
    return float(w2 * g2 + w1 * g1 + w0 * g0_)


def _contact_angle_from_slope(slope: float) -> float:
    # interior angle at (r0, 0) between the free surface and the wall tangent
    return math.pi / 2.0 - math.atan(slope)


def _finish_domain(profile: Profile) -> MeridianDomain:
    ys, gs = profile.y_samples, profile.g_samples
    r0 = float(gs[-1])
    y0 = float(ys[0])
    slope = _contact_slope(ys, gs)
    theta0 = _contact_angle_from_slope(slope)
    if not (0.0 < theta0 < math.pi):
        raise ClassViolationError(f"contact angle {theta0} outside (0, pi)")
    john = bool(gs.max() <= r0 * (1.0 + JOHN_RTOL))
    slopes = np.diff(gs) / np.diff(ys)
    convex = bool(np.all(np.diff(slopes) <= CONVEXITY_TOL))
    return MeridianDomain(
        profile=profile,
        r0=r0,
        y0=y0,
        contact_angle=theta0,
        john=john,
        convex=convex,
        class_d=profile.monotone,
    )


def _sampled(g: Callable[[float], float], y0: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    ys = np.linspace(y0, 0.0, n)
    ys[-1] = 0.0
    gs = np.array([g(float(y)) for y in ys])
    return ys, gs


def make_cylinder(h: float, n: int = DEFAULT_SAMPLES) -> MeridianDomain:
    """Unit-radius vertical cylinder of depth h."""
    if not (h > 0.0 and math.isfinite(h)):
        raise InvalidParameterError(f"cylinder depth must be positive, got {h}")
    ys, gs = _sampled(lambda y: 1.0, -h, n)
    prof = Profile(ys, gs, f"cylinder:h={h:g}", g_exact=lambda y: 1.0, gprime_exact=lambda y: 0.0)
    return _finish_domain(prof)


def make_cone(lam: float, n: int = DEFAULT_SAMPLES) -> MeridianDomain:
    """Circular cone with unit rim: g(y) = 1 + 4 y / lam, depth lam / 4."""
    if not (0.0 < lam <= 2.0):
        raise InvalidParameterError(f"cone parameter must lie in (0, 2], got {lam}")
    g = lambda y: 1.0 + 4.0 * y / lam
    ys, gs = _sampled(g, -lam / 4.0, n)
    gs[0] = 0.0  # exact apex
    prof = Profile(ys, gs, f"cone:lambda={lam:g}", g_exact=lambda y: max(g(y), 0.0),
                   gprime_exact=lambda y: 4.0 / lam)
    return _finish_domain(prof)


def make_troesch(lam: float, n: int = DEFAULT_SAMPLES) -> MeridianDomain:
    """Troesch body with unit rim: g(y) = sqrt(4 y^2 + 8 y / lam + 1)."""
    if not (0.0 < lam <= 2.0):
        raise InvalidParameterError(f"troesch parameter must lie in (0, 2], got {lam}")
    y0 = troesch_bottom_depth(lam)
    # near the apex the expanded quadratic cancels catastrophically (it
    # underflows to zero at lam = 2, where the root is double), so there the
    # factored radicand 2 (y - y0) (2 y + 2/lam + b) is used instead
    b = math.sqrt(max(4.0 / lam**2 - 1.0, 0.0))

    def g(y: float) -> float:
        if y <= y0:
            return 0.0
        if y <= 0.5 * y0:
            return math.sqrt(max(2.0 * (y - y0) * (2.0 * y + 2.0 / lam + b), 0.0))
        return math.sqrt(max(4.0 * y * y + 8.0 * y / lam + 1.0, 0.0))

    def gp(y: float) -> float:
        q = g(y)
        return (4.0 * y + 4.0 / lam) / q if q > 0.0 else math.inf

    ys, gs = _sampled(g, y0, n)
    gs[0] = 0.0
    prof = Profile(ys, gs, f"troesch:lambda={lam:g}", g_exact=g, gprime_exact=gp)
    return _finish_domain(prof)


def make_spherical_bulge(d: float, n: int = DEFAULT_SAMPLES) -> MeridianDomain:
    """Ball cap bulging past the unit rim; obtuse contact angle, not John.

    The bottom is the sphere of radius sqrt(1 + d^2) centered at (0, -d), so
    g(y) = sqrt(1 + d^2 - (y + d)^2).  The widest section sits below the rim
    (max g = sqrt(1 + d^2) > 1) and the contact angle is
    arccos(-d / sqrt(1 + d^2)) in (pi/2, pi).
    """
    if not (d > 0.0 and math.isfinite(d)):
        raise InvalidParameterError(f"bulge offset must be positive, got {d}")
    rad = math.sqrt(1.0 + d * d)
    y0 = -d - rad

    def g(y: float) -> float:
        if y <= y0:
            return 0.0
        if y <= 0.5 * y0:
            # factored radicand (y - y0)(rad - y - d): exact zero at the apex
            return math.sqrt(max((y - y0) * (rad - y - d), 0.0))
        return math.sqrt(max(1.0 + d * d - (y + d) ** 2, 0.0))

    def gp(y: float) -> float:
        q = g(y)
        return -(y + d) / q if q > 0.0 else math.inf

    ys, gs = _sampled(g, y0, n)
    gs[0] = 0.0
    prof = Profile(ys, gs, f"bulge:d={d:g}", g_exact=g, gprime_exact=gp)
    return _finish_domain(prof)


def make_hemisphere(n: int = DEFAULT_SAMPLES) -> MeridianDomain:
    """Unit hemisphere: g(y) = sqrt(1 - y^2) on (-1, 0)."""

    def g(y: float) -> float:
        if y <= -1.0:
            return 0.0
        return math.sqrt(max((1.0 + y) * (1.0 - y), 0.0))

    def gp(y: float) -> float:
        q = g(y)
        return -y / q if q > 0.0 else math.inf

    ys, gs = _sampled(g, -1.0, n)
    gs[0] = 0.0
    prof = Profile(ys, gs, "hemisphere", g_exact=g, gprime_exact=gp)
    return _finish_domain(prof)


def make_profile(samples: Sequence[tuple[float, float]]) -> MeridianDomain:
    """Validate a sampled monotone-bottom profile.

    Interior jumps of g (two samples at the same depth) model horizontal
    bottom segments; they are replaced by a linear ramp across one local
    y-grid cell, which keeps the profile a graph and the mesher structured.
    """
    if samples is None or len(samples) == 0:
        raise InvalidParameterError("empty profile input")
    pts = [(float(y), float(g)) for y, g in samples]
    if len(pts) < 2:
        raise InvalidParameterError("profile needs at least two samples")

    ys = np.array([p[0] for p in pts])
    gs = np.array([p[1] for p in pts])
    if np.any(np.diff(ys) < 0):
        raise InvalidParameterError("profile depths must be nondecreasing")

    # ramp interior jumps (duplicate depths) across one local y-grid cell
    dup = np.where(np.diff(ys) == 0.0)[0]
    if dup.size:
        if np.any(dup + 1 == len(ys) - 1) or np.any(dup == 0):
            raise InvalidParameterError("jump at the surface or bottom sample is not rampable")
        if np.any(np.diff(dup) == 1):
            raise InvalidParameterError("triple sample at one depth is not rampable")
        ys = ys.copy()
        for i in dup:
            ys[i + 1] = ys[i] + 0.5 * (ys[i + 2] - ys[i])
        if np.any(np.diff(ys) <= 0):
            raise InvalidParameterError("jump samples too close to ramp")

    drops = np.where(np.diff(gs) < -1e-14 * max(1.0, float(np.max(gs))))[0]
    if drops.size:
        i = int(drops[0])
        raise ClassViolationError(
            f"profile radius decreases between samples {i} and {i + 1} "
            f"(g={gs[i]:.17g} -> {gs[i + 1]:.17g})"
        )
    return _finish_domain(Profile(ys, gs, "custom"))


def deform(D: MeridianDomain, s: float) -> MeridianDomain:
    """Affine bottom deformation g_s(y) = 1 - s + s g(y) at unit rim.

    s = 1 reproduces the input domain, s = 0 the cylinder of equal depth.
    """
    if not (0.0 <= s <= 1.0):
        raise InvalidParameterError(f"deformation parameter must lie in [0, 1], got {s}")
    if abs(D.r0 - 1.0) > 1e-12:
        raise UnsupportedDomainError("deform requires a unit free-surface radius")
    prof = D.profile
    gs = 1.0 - s + s * prof.g_samples
    g_exact = gprime_exact = None
    if prof.g_exact is not None:
        base_g, base_gp = prof.g_exact, prof.gprime_exact
        g_exact = lambda y, s=s: 1.0 - s + s * base_g(y)
        if base_gp is not None:
            gprime_exact = lambda y, s=s: s * base_gp(y)
    new = Profile(prof.y_samples, gs, f"{prof.closed_form_tag}|deform:s={s:g}",
                  g_exact=g_exact, gprime_exact=gprime_exact)
    return _finish_domain(new)


# ---------------------------------------------------------------------------
# class membership and the star representation
# ---------------------------------------------------------------------------

def validate_class_membership(D: MeridianDomain, params: ClassParams) -> None:
    """Check D against the monotone-bottom class with the given parameters.

    Raises ClassViolationError naming the first failed requirement.  The
    Lipschitz requirements are checked discretely on the profile samples:
    near the free surface the wall must be a graph r(y) with slope at most
    M, and near the axis the bottom must be a graph y(r) with slope at most
    M (a flat floor satisfies this trivially).
    """
    slack = 1.0 + 1e-9
    if abs(D.r0 - params.r0) > 1e-12 * max(1.0, params.r0):
        raise ClassViolationError(f"free-surface radius {D.r0} != class radius {params.r0}")
    if not D.class_d:
        raise ClassViolationError("profile is not nondecreasing (outside the monotone class)")
    if not (-params.H < D.y0 < -params.eps):
        raise ClassViolationError(
            f"depth {-D.y0} outside ({params.eps}, {params.H}) required by the class"
        )
    ys, gs = D.profile.y_samples, D.profile.g_samples
    near_surface = ys >= -params.eps
    if np.count_nonzero(near_surface) >= 2:
        yy, gg = ys[near_surface], gs[near_surface]
        bad = np.abs(np.diff(gg)) > params.M * np.diff(yy) * slack
        if bad.any():
            i = int(np.argmax(bad))
            raise ClassViolationError(
                f"wall slope near the surface exceeds M={params.M} at y={yy[i]:.6g}"
            )
    near_axis = gs <= params.eps
    if np.count_nonzero(near_axis) >= 2:
        yy, gg = ys[near_axis], gs[near_axis]
        dr = np.diff(gg)
        dy = np.diff(yy)
        bad = dy > params.M * np.abs(dr) * slack + 1e-15
        if bad.any():
            i = int(np.argmax(bad))
            raise ClassViolationError(
                f"bottom slope near the axis exceeds M={params.M} at y={yy[i]:.6g}"
            )


def _boundary_polyline(D: MeridianDomain, n_wall: int = 20000) -> np.ndarray:
    """Bottom boundary of D as a dense polyline from (0, y0) to (r0, 0)."""
    y0 = D.y0
    # extra resolution in the lowest tenth resolves sqrt-type apex curves
    lo = np.linspace(y0, 0.9 * y0, n_wall // 2 + 1)
    hi = np.linspace(0.9 * y0, 0.0, n_wall - n_wall // 2 + 1)[1:]
    ys = np.concatenate([lo, hi])
    gv = np.asarray(D.g(ys), dtype=float)
    pts = np.column_stack([gv, ys])
    if gv[0] > 0.0:  # flat floor from the axis to the wall base
        pts = np.vstack([[0.0, y0], pts])
    return pts


def star_rep(D: MeridianDomain, params: ClassParams, n_angles: int = DEFAULT_ANGLES) -> StarRep:
    """Radial function of D viewed from the anchor (0, -eps/(2M)).

    Rays are cast against a dense polyline of the bottom; past the corner
    angle the exact free-surface formula -h0/cos(alpha) is used.
    """
    validate_class_membership(D, params)
    h0 = params.h0
    p0 = np.array([0.0, -h0])
    alphas = np.linspace(0.0, math.pi, n_angles)
    alpha_corner = math.pi / 2.0 + math.atan2(h0, D.r0)

    pts = _boundary_polyline(D)
    A = pts[:-1]
    E = np.diff(pts, axis=0)
    Q = A - p0

    f = np.empty(n_angles)
    cross_qe = Q[:, 0] * E[:, 1] - Q[:, 1] * E[:, 0]
    for k, a in enumerate(alphas):
        if a >= alpha_corner:
            f[k] = -h0 / math.cos(a)
            continue
        dx, dy = math.sin(a), -math.cos(a)
        det = dx * E[:, 1] - dy * E[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = cross_qe / det
            s = -(dx * Q[:, 1] - dy * Q[:, 0]) / det
        ok = (s >= -1e-12) & (s <= 1.0 + 1e-12) & (t > 0.0) & np.isfinite(t)
        if not ok.any():
            raise ClassViolationError(
                f"ray at angle {a:.6g} does not meet the bottom; domain is not "
                "star-shaped about the class anchor"
            )
        f[k] = float(np.max(t[ok]))

    lip = float(np.max(np.abs(np.diff(f)) / np.diff(alphas)))
    return StarRep(p0=(0.0, -h0), alpha_grid=alphas, f_values=f,
                   lipschitz_bound=lip, params=params)


def distance(W1: StarRep, W2: StarRep) -> float:
    """Sup-norm distance between two star representations on a shared grid."""
    if W1.p0 != W2.p0:
        raise IncompatibleRepresentationError(
            f"anchors differ: {W1.p0} vs {W2.p0}"
        )
    if W1.alpha_grid.shape != W2.alpha_grid.shape or not np.array_equal(
        W1.alpha_grid, W2.alpha_grid
    ):
        raise IncompatibleRepresentationError("angle grids differ")
    return float(np.max(np.abs(W1.f_values - W2.f_values)))


# ---------------------------------------------------------------------------
# domain mini-language
# ---------------------------------------------------------------------------

def load_profile_csv(path: str) -> MeridianDomain:
    """Load a two-column "y,g" CSV profile (header row, y ascending to 0)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InvalidParameterError(f"profile file {path} is empty")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise InvalidParameterError(f"profile row {row!r} needs two columns")
            rows.append((float(row[0]), float(row[1])))
    return make_profile(rows)


def from_spec(spec: str) -> MeridianDomain:
    """Parse a domain mini-language string.

    Accepted forms: "cylinder:h=<v>", "cone:lambda=<v>", "troesch:lambda=<v>",
    "bulge:d=<v>", "hemisphere", "profile:file=<path>".
    """
    spec = spec.strip()
    if spec == "hemisphere":
        return make_hemisphere()
    name, _, rest = spec.partition(":")
    kv = {}
    if rest:
        for part in rest.split(","):
            key, _, val = part.partition("=")
            if not _:
                raise InvalidParameterError(f"malformed domain parameter {part!r}")
            kv[key.strip()] = val.strip()
    try:
        if name == "cylinder":
            return make_cylinder(float(kv["h"]))
        if name == "cone":
            return make_cone(float(kv["lambda"]))
        if name == "troesch":
            return make_troesch(float(kv["lambda"]))
        if name == "bulge":
            return make_spherical_bulge(float(kv["d"]))
        if name == "profile":
            return load_profile_csv(kv["file"])
    except KeyError as exc:
        raise InvalidParameterError(f"domain spec {spec!r} misses parameter {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(f"domain spec {spec!r}: {exc}") from exc
    raise InvalidParameterError(f"unknown domain family {name!r}")
