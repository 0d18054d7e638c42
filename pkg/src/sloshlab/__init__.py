"""sloshlab: a numerical laboratory for axisymmetric sloshing eigenproblems.

The package computes the mixed Steklov (sloshing) eigenvalues and
eigenfunctions of bodies of revolution reduced to weighted problems on the
meridian cross-section, reproduces the closed-form cylinder and Troesch
spectra, and mechanically verifies the qualitative theory (fundamental
eigenvalue ordering, eigenfunction monotonicity, high-spot location,
domain monotonicity, continuity under bottom deformation) at desk scale.
"""

from .assembly import ModeProblem, ProblemKind, assemble, rayleigh
from .eigensolver import (
    EigenSolution,
    dtn_reduce,
    full_pencil_reference,
    interior_factor,
    solve,
)
from .geometry import (
    ClassParams,
    MeridianDomain,
    Profile,
    StarRep,
    deform,
    distance,
    from_spec,
    make_cone,
    make_cylinder,
    make_hemisphere,
    make_profile,
    make_spherical_bulge,
    make_troesch,
    star_rep,
)
from .mesh import GradingSpec, Mesh, generate, refine, validate
from .oracles import (
    BesselTable,
    bessel_j,
    bessel_zeros,
    cylinder_psi11,
    cylinder_spectrum,
    troesch_eigenfunction,
    troesch_stream,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ClassParams",
    "MeridianDomain",
    "Profile",
    "StarRep",
    "deform",
    "distance",
    "from_spec",
    "make_cone",
    "make_cylinder",
    "make_hemisphere",
    "make_profile",
    "make_spherical_bulge",
    "make_troesch",
    "star_rep",
    "GradingSpec",
    "Mesh",
    "generate",
    "refine",
    "validate",
    "ModeProblem",
    "ProblemKind",
    "assemble",
    "rayleigh",
    "EigenSolution",
    "dtn_reduce",
    "full_pencil_reference",
    "interior_factor",
    "solve",
    "BesselTable",
    "bessel_j",
    "bessel_zeros",
    "cylinder_psi11",
    "cylinder_spectrum",
    "troesch_eigenfunction",
    "troesch_stream",
]
