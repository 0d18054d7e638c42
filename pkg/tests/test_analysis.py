"""Theorem-level verification routine tests."""

import dataclasses
import math

import numpy as np
import pytest

from sloshlab import analysis as an
from sloshlab.assembly import ProblemKind
from sloshlab.errors import InvalidFamilyError, InvalidParameterError
from sloshlab.geometry import (
    ClassParams,
    make_cone,
    make_cylinder,
    make_hemisphere,
    make_spherical_bulge,
    make_troesch,
)
from sloshlab.mesh import GradingSpec
from sloshlab.oracles import (
    bessel_zeros,
    troesch_eigenfunction,
    troesch_stream,
)


def _with_field(sol, values, nu=1.0):
    return dataclasses.replace(
        sol,
        fields=np.array([values]),
        eigenvalues=np.array([nu]),
        residuals=np.array([0.0]),
    )


@pytest.fixture(scope="module")
def troesch_m0():
    D = make_troesch(1.0)
    return an.solve_domain(D, GradingSpec(64, 64, 0.85), 0, ProblemKind.SLOSHING, 1)


def test_stream_rowwise_exact_for_manufactured_field(troesch_m0):
    # psi = c * y gives stream derivative r * c, integrated exactly by the
    # trapezoid rule to c r^2 / 2 on every row
    mesh = troesch_m0.problem.mesh
    c = 0.7
    fake = _with_field(troesch_m0, c * mesh.nodes[:, 1])
    sf = an.stream_function(fake, 0)
    expected = 0.5 * c * mesh.nodes[:, 0] ** 2
    assert np.max(np.abs(sf.values - expected)) <= 1e-12


def test_stream_matches_troesch_closed_form(troesch_m0):
    mesh = troesch_m0.problem.mesh
    phi = np.array([troesch_eigenfunction(r, y, 1.0) for r, y in mesh.nodes])
    fake = _with_field(troesch_m0, phi)
    sf = an.stream_function(fake, 0)
    exact = np.array([troesch_stream(r, y, 1.0) for r, y in mesh.nodes])
    rel = np.max(np.abs(sf.values - exact)) / np.max(np.abs(exact))
    assert rel <= 1e-3
    axis = mesh.axis_nodes
    assert np.all(sf.values[axis] == 0.0)
    assert sf.boundary_residual <= 2e-3 * np.max(np.abs(exact))
    assert sf.sign_constant


def test_stream_solver_field_sign_structure():
    # the row integration cannot beat its own boundary defect on a P1 field,
    # so the sign structure is asserted at that noise floor
    D = make_troesch(1.0)
    spec = GradingSpec(96, 96, 0.85, 1e-9)
    sol = an.solve_domain(D, spec, 0, ProblemKind.SLOSHING, 1)
    ds = an.dirichlet_steklov_first(D, spec)
    assert float(sol.eigenvalues[0]) < ds.nu  # hypothesis of the sign lemma
    sf = an.stream_function(sol, 0)
    scale = np.max(np.abs(sf.values))
    assert sf.wrong_sign_magnitude <= max(1e-6, sf.boundary_residual / scale)


def test_stream_requires_axisymmetric_field():
    D = make_cylinder(1.0)
    sol = an.solve_domain(D, GradingSpec(8, 8, 1.0), 1, ProblemKind.SLOSHING, 1)
    with pytest.raises(InvalidParameterError):
        an.stream_function(sol, 0)


def test_monotonicity_reports():
    spec = GradingSpec(48, 48, 0.85)
    cyl = an.solve_domain(make_cylinder(1.0), spec, 1, ProblemKind.SLOSHING, 1)
    rep = an.monotonicity_report(cyl)
    assert rep.violation_fraction == 0.0
    assert rep.min_dpsi_dr >= -1e-3 and rep.min_dpsi_dy >= -1e-3

    hemi = an.solve_domain(make_hemisphere(), spec, 1, ProblemKind.SLOSHING, 1)
    assert an.monotonicity_report(hemi).violation_fraction == 0.0

    bulge = an.solve_domain(make_spherical_bulge(1.0), spec, 1, ProblemKind.SLOSHING, 1)
    rb = an.monotonicity_report(bulge)
    assert rb.violation_fraction > 0.0  # radial derivative changes sign
    assert rb.min_dpsi_dr < -1e-3

    m0 = an.solve_domain(make_cylinder(1.0), spec, 0, ProblemKind.SLOSHING, 1)
    with pytest.raises(InvalidParameterError):
        an.monotonicity_report(m0)


def test_highspot_cylinder_at_corner_and_agreement():
    spec = GradingSpec(48, 48, 0.85)
    for D in (make_cylinder(1.0), make_hemisphere(), make_cone(2.0)):
        sol = an.solve_domain(D, spec, 1, ProblemKind.SLOSHING, 1)
        hs = an.highspot(sol)
        mono = an.monotonicity_report(sol, tol=5e-2)
        if mono.violation_fraction == 0.0:
            assert not hs.interior  # monotone modes peak at the rim
    sol = an.solve_domain(make_cylinder(1.0), spec, 1, ProblemKind.SLOSHING, 1)
    hs = an.highspot(sol)
    assert hs.argmax_r == pytest.approx(1.0, abs=1e-12)
    assert not hs.sign_change


def test_highspot_bulge_interior():
    sol = an.solve_domain(make_spherical_bulge(1.0), GradingSpec(96, 96, 0.85),
                          1, ProblemKind.SLOSHING, 1)
    hs = an.highspot(sol)
    assert hs.interior
    assert hs.sign_change
    assert 0.5 < hs.argmax_r < 0.95
    assert hs.slope_target > 0  # obtuse angle flips the corner slope sign


def test_spectrum_report_ordering():
    spec = GradingSpec(32, 32, 0.85)
    rep = an.spectrum_report(make_hemisphere(), spec)
    assert rep.ordering_ok
    assert all(passed for (_, _, _, passed) in rep.assertions)
    assert rep.multiplicity[(1, 1)] == 2 and rep.multiplicity[(0, 1)] == 1

    cyl = an.spectrum_report(make_cylinder(1.0), spec)
    tab = bessel_zeros()
    exact = tab.j11p * math.tanh(tab.j11p)
    assert cyl.eigenvalues[(1, 1)] == pytest.approx(exact, rel=5e-3)
    smallest = min(cyl.eigenvalues.values())
    assert cyl.eigenvalues[(1, 1)] == smallest

    cone = an.spectrum_report(make_cone(2.0), spec)
    assert cone.ordering_ok

    with pytest.raises(InvalidParameterError):
        an.spectrum_report(make_cylinder(1.0), spec, m_max=1)


def test_dirichlet_steklov_first():
    spec = GradingSpec(48, 48, 0.85)
    tab = bessel_zeros()
    rec = an.dirichlet_steklov_first(make_cylinder(1.0), spec)
    exact = tab.j01 / math.tanh(tab.j01)
    assert rec.nu == pytest.approx(exact, rel=1e-3)
    assert rec.sign_constant
    # shrinking the domain raises the Dirichlet-Steklov ground eigenvalue
    shallow = an.dirichlet_steklov_first(make_cylinder(0.5), spec)
    assert shallow.nu > rec.nu
    assert an.dirichlet_steklov_first(make_hemisphere(), spec).sign_constant
    # the acute troesch contact corner needs strong corner grading before
    # the P1 undershoot there drops below the 1e-8 sign tolerance
    tro = an.dirichlet_steklov_first(make_troesch(1.0), GradingSpec(128, 128, 0.02))
    assert tro.sign_constant


def test_conjecture_probe():
    rec = an.conjecture_probe(1.0, GradingSpec(64, 64, 0.85))
    assert rec.rel_mismatch <= 0.01
    assert rec.located_index >= 1
    assert rec.dichotomy_ok
    assert rec.nu_ds01 > rec.nu01  # the observed branch: nu = nu_{0,1}
    rec2 = an.conjecture_probe(2.0, GradingSpec(64, 64, 0.85))
    assert rec2.rel_mismatch <= 0.01


def test_domain_monotonicity_chain():
    spec = GradingSpec(32, 32, 0.85)
    lam = 1.0
    family = [make_troesch(lam), make_cone(lam), make_cylinder(lam / 4.0)]
    rec = an.domain_monotonicity_experiment(family, spec)
    assert rec.ok
    assert rec.nu11[0] <= rec.nu11[1] <= rec.nu11[2]
    assert rec.nu01[0] <= rec.nu01[1] <= rec.nu01[2]
    assert rec.nu_ds01[0] >= rec.nu_ds01[1] >= rec.nu_ds01[2]


def test_domain_monotonicity_cylinders_and_identity():
    spec = GradingSpec(32, 32, 0.85)
    cyls = [make_cylinder(h) for h in (0.5, 1.0, 2.0)]
    rec = an.domain_monotonicity_experiment(cyls, spec)
    assert rec.ok
    assert np.all(np.diff(rec.nu11) > 0)  # strict for tanh growth
    same = an.domain_monotonicity_experiment(
        [make_cylinder(1.0), make_cylinder(1.0)], spec
    )
    assert same.ok
    assert same.nu11[0] == pytest.approx(same.nu11[1], rel=1e-12)


def test_domain_monotonicity_rejects_non_nested():
    spec = GradingSpec(16, 16, 0.85)
    with pytest.raises(InvalidFamilyError):
        an.domain_monotonicity_experiment(
            [make_cylinder(1.0), make_cylinder(0.5)], spec
        )
    wide = make_spherical_bulge(1.0)
    with pytest.raises(InvalidFamilyError):
        an.domain_monotonicity_experiment([wide, make_cylinder(1.0)], spec)


def test_continuity_experiment():
    D = make_troesch(1.0)
    params = ClassParams(eps=0.02, M=4.5, H=1.5)
    spec = GradingSpec(48, 48, 0.85)
    table = an.continuity_experiment(D, (0.5, 0.9, 0.99), params, spec, n_angles=1024)
    assert table.d_monotone and table.dnu_monotone
    assert table.distances[-1] < table.distances[0]
    assert table.dnu[-1] < table.dnu[0]
    assert table.fitted_exponent >= 1.0 / 3.0
    for d, dn in zip(table.distances, table.dnu):
        assert dn <= table.fitted_constant * d ** (1.0 / 3.0) + 1e-15


def test_continuity_identity_point():
    D = make_troesch(1.0)
    params = ClassParams(eps=0.02, M=4.5, H=1.5)
    table = an.continuity_experiment(D, (0.9, 1.0), params,
                                     GradingSpec(24, 24, 0.85), n_angles=512)
    assert table.distances[-1] == 0.0
    assert table.dnu[-1] == 0.0
