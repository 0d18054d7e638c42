"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Closed-form oracle reproduction plus property-based theorem checks at desk
scale.  Every tolerance is pinned here; nothing is deferred to later
calibration.
"""

import math
import time

import numpy as np

from sloshlab import analysis as an
from sloshlab.assembly import ProblemKind, assemble
from sloshlab.eigensolver import full_pencil_reference, solve
from sloshlab.geometry import (
    make_cone,
    make_cylinder,
    make_hemisphere,
    make_profile,
    make_spherical_bulge,
    make_troesch,
)
from sloshlab.cli import default_class_params
from sloshlab.mesh import GradingSpec, generate
from sloshlab.oracles import (
    bessel_zeros,
    cylinder_psi11,
    troesch_eigenfunction,
    troesch_stream,
)

ORACLE_MESH = GradingSpec(96, 96, 0.85)
TROESCH_MESH = GradingSpec(128, 128, 0.85)


def _report(num: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {num}: {status}: {detail}")


def _surface_l2_error(sol, oracle_at):
    """Relative surface-L2 distance between a solved field and an oracle,
    both normalized in the r-weighted surface norm and sign-aligned."""
    prob = sol.problem
    surf = prob.mesh.surface_nodes
    mf = prob.Mf
    v = sol.fields[0]
    w = np.zeros_like(v)
    w[surf] = [oracle_at(r) for r in prob.mesh.nodes[surf, 0]]
    w = w / math.sqrt(w @ (mf @ w))
    if v @ (mf @ w) < 0:
        w = -w
    diff = v - w
    return math.sqrt(max(diff @ (mf @ diff), 0.0))


def test_criterion_1_cylinder_oracle():
    tab = bessel_zeros()
    details = []
    ok = True
    for h in (0.5, 1.0, 2.0):
        t0 = time.time()
        mesh = generate(make_cylinder(h), ORACLE_MESH)
        sol = solve(assemble(mesh, 1, ProblemKind.SLOSHING), 1)
        elapsed = time.time() - t0
        exact = tab.j11p * math.tanh(tab.j11p * h)
        rel = abs(float(sol.eigenvalues[0]) - exact) / exact
        ferr = _surface_l2_error(sol, lambda r, h=h: cylinder_psi11(r, 0.0, h))
        details.append(f"h={h}: nu rel {rel:.2e}, field L2(F) {ferr:.2e}, {elapsed:.1f}s")
        ok = ok and rel <= 5e-3 and ferr <= 1e-2 and elapsed <= 30.0
        assert rel <= 5e-3
        assert ferr <= 1e-2
        assert elapsed <= 30.0
    _report(1, ok, "; ".join(details))


def test_criterion_2_dirichlet_steklov_oracle():
    tab = bessel_zeros()
    details = []
    ok = True
    for h in (0.5, 1.0, 2.0):
        mesh = generate(make_cylinder(h), ORACLE_MESH)
        sol = solve(assemble(mesh, 0, ProblemKind.DIRICHLET_STEKLOV), 1)
        exact = tab.j01 / math.tanh(tab.j01 * h)
        rel = abs(float(sol.eigenvalues[0]) - exact) / exact
        details.append(f"h={h}: rel {rel:.2e}")
        ok = ok and rel <= 5e-3
        assert rel <= 5e-3
    _report(2, ok, "; ".join(details))


def test_criterion_3_troesch_oracle():
    details = []
    ok = True
    for lam in (0.5, 1.0, 2.0):
        D = make_troesch(lam)
        mesh = generate(D, TROESCH_MESH)
        sol = solve(assemble(mesh, 0, ProblemKind.SLOSHING), 6)
        j = int(np.argmin(np.abs(sol.eigenvalues - lam)))
        rel = abs(float(sol.eigenvalues[j]) - lam) / lam
        matched = type(sol)(
            problem=sol.problem,
            eigenvalues=sol.eigenvalues[j: j + 1],
            fields=sol.fields[j: j + 1],
            residuals=sol.residuals[j: j + 1],
            gap=sol.gap,
            a_scale=sol.a_scale,
        )
        ferr = _surface_l2_error(matched, lambda r: 1.0 - 2.0 * r * r)
        # stream integration against the closed form, oracle field injected
        phi = np.array([troesch_eigenfunction(r, y, lam) for r, y in mesh.nodes])
        fake = type(sol)(
            problem=sol.problem,
            eigenvalues=np.array([lam]),
            fields=np.array([phi]),
            residuals=np.array([0.0]),
            gap=sol.gap,
            a_scale=sol.a_scale,
        )
        stream = an.stream_function(fake, 0)
        exact = np.array([troesch_stream(r, y, lam) for r, y in mesh.nodes])
        serr = np.max(np.abs(stream.values - exact)) / np.max(np.abs(exact))
        details.append(
            f"lam={lam}: nu rel {rel:.2e}, field L2(F) {ferr:.2e}, stream Linf {serr:.2e}"
        )
        ok = ok and rel <= 1e-2 and ferr <= 2e-2 and serr <= 5e-3
        assert rel <= 1e-2
        assert ferr <= 2e-2
        assert serr <= 5e-3
    _report(3, ok, "; ".join(details))


def test_criterion_4_fundamental_ordering():
    spec = GradingSpec(48, 48, 0.85)
    details = []
    ok = True
    for D in (make_hemisphere(), make_cone(2.0), make_troesch(1.0)):
        rep = an.spectrum_report(D, spec, m_max=2, k_max=2)
        worst = min(margin / max(req, 1e-300) for (_, margin, req, _) in rep.assertions)
        details.append(f"{D.tag}: min margin/required {worst:.1f}")
        ok = ok and rep.ordering_ok
        assert rep.ordering_ok, rep.assertions
    _report(4, ok, "; ".join(details))


def _monotonicity_suite_spec(D):
    from sloshlab.cli import _apex_is_conical

    axis = 1e-9 if _apex_is_conical(D) else None
    return GradingSpec(96, 96, 0.85, axis)


def test_criterion_5_monotonicity_suite():
    # concave custom profile: floored bowl with strictly decreasing wall slopes
    concave = make_profile([(-0.8, 0.4), (-0.35, 0.85), (0.0, 1.0)])
    assert concave.convex and concave.tag == "custom"
    suite = [
        make_cylinder(1.0),
        make_hemisphere(),
        make_cone(2.0),
        make_troesch(0.5),
        make_troesch(1.0),
        make_troesch(2.0),
        concave,
    ]
    details = []
    ok = True
    for D in suite:
        sol = an.solve_domain(D, _monotonicity_suite_spec(D), 1, ProblemKind.SLOSHING, 1)
        rep = an.monotonicity_report(sol, tol=1e-3)
        details.append(f"{D.tag}: viol {rep.violation_fraction:.1e} "
                       f"(min dr {rep.min_dpsi_dr:.1e}, dy {rep.min_dpsi_dy:.1e})")
        ok = ok and rep.violation_fraction == 0.0
        assert rep.violation_fraction == 0.0, (D.tag, rep)
    _report(5, ok, "; ".join(details))


def test_criterion_6_bulge_high_spot():
    D = make_spherical_bulge(1.0)
    assert abs(D.contact_angle - 3 * math.pi / 4) <= 1e-3
    sol = an.solve_domain(D, GradingSpec(192, 192, 0.002), 1, ProblemKind.SLOSHING, 1)
    hs = an.highspot(sol)
    slope_rel = abs(hs.contact_slope_fit - hs.slope_target) / abs(hs.slope_target)
    ok = hs.interior and hs.sign_change and slope_rel <= 0.10
    _report(6, ok, f"argmax r={hs.argmax_r:.3f} interior={hs.interior} "
                   f"sign_change={hs.sign_change} slope fit {hs.contact_slope_fit:.3f} "
                   f"vs {hs.slope_target:.3f} ({slope_rel:.1%})")
    assert hs.interior
    assert hs.sign_change
    assert slope_rel <= 0.10


def test_criterion_7_domain_monotonicity_chain():
    lam = 1.0
    family = [make_troesch(lam), make_cone(lam), make_cylinder(lam / 4.0)]
    rec = an.domain_monotonicity_experiment(family, GradingSpec(64, 64, 0.85))
    ok = rec.ok
    _report(7, ok, f"nu11 {rec.nu11} nondecreasing={rec.nu11_nondecreasing}; "
                   f"nu01 {rec.nu01} nondecreasing={rec.nu01_nondecreasing}; "
                   f"nu_ds01 {rec.nu_ds01} nonincreasing={rec.nu_ds01_nonincreasing}")
    assert rec.ok


def test_criterion_8_continuity_under_deformation():
    D = make_troesch(1.0)
    params = default_class_params(D)
    table = an.continuity_experiment(
        D, (0.5, 0.9, 0.99, 0.999), params, GradingSpec(64, 64, 0.85)
    )
    bound_ok = all(
        dn <= table.fitted_constant * d ** (1.0 / 3.0) + 1e-15
        for d, dn in zip(table.distances, table.dnu)
    )
    ok = (table.d_monotone and table.dnu_monotone
          and table.distances[-1] < 1e-3 and table.dnu[-1] < 1e-3 and bound_ok)
    _report(8, ok, f"d={[f'{v:.2e}' for v in table.distances]} "
                   f"dnu={[f'{v:.2e}' for v in table.dnu]} "
                   f"exponent {table.fitted_exponent:.2f}, C {table.fitted_constant:.3f}")
    assert table.d_monotone and table.dnu_monotone
    assert table.distances[-1] < 1e-3
    assert table.dnu[-1] < 1e-3
    assert bound_ok


def test_criterion_9_structural_properties():
    # (a) Schur path equals the dense full-pencil reference on small meshes
    worst_schur = 0.0
    for D in (make_cylinder(1.0), make_troesch(1.0)):
        mesh = generate(D, GradingSpec(6, 6, 0.9))
        for m, kind in ((0, ProblemKind.SLOSHING), (1, ProblemKind.SLOSHING),
                        (2, ProblemKind.SLOSHING), (0, ProblemKind.DIRICHLET_STEKLOV)):
            prob = assemble(mesh, m, kind)
            assert len(prob.free_nodes) <= 200
            sol = solve(prob, 3)
            ref = full_pencil_reference(prob, 3)
            kk = min(sol.k, len(ref))
            worst_schur = max(worst_schur, float(np.max(
                np.abs(sol.eigenvalues[:kk] - ref[:kk]) / np.abs(ref[:kk]))))
    assert worst_schur <= 1e-9

    # (b) dilation scaling: nu(s D) * s = nu(D)
    import dataclasses

    mesh = generate(make_cylinder(1.0), GradingSpec(32, 32, 0.85))
    worst_scale = 0.0
    for s in (0.5, 3.0):
        scaled = dataclasses.replace(mesh, nodes=s * mesh.nodes)
        for m in (0, 1):
            a = solve(assemble(mesh, m, ProblemKind.SLOSHING), 2)
            b = solve(assemble(scaled, m, ProblemKind.SLOSHING), 2)
            worst_scale = max(worst_scale, float(np.max(
                np.abs(b.eigenvalues * s - a.eigenvalues) / a.eigenvalues)))
    assert worst_scale <= 1e-6

    # (c) zero-mean surface orthogonality of reported m = 0 fields
    worst_orth = 0.0
    for D in (make_cylinder(1.0), make_troesch(1.0)):
        mesh = generate(D, GradingSpec(48, 48, 0.85))
        prob = assemble(mesh, 0, ProblemKind.SLOSHING)
        sol = solve(prob, 4)
        ones = np.ones(prob.n)
        for j in range(sol.k):
            worst_orth = max(worst_orth, abs(float(ones @ (prob.Mf @ sol.fields[j]))))
    assert worst_orth <= 1e-8

    # (d) convergence order of the cylinder eigenvalue under refinement
    tab = bessel_zeros()
    exact = tab.j11p * math.tanh(tab.j11p)
    errs = []
    for n in (12, 24, 48):
        mesh = generate(make_cylinder(1.0), GradingSpec(n, n, 0.85))
        sol = solve(assemble(mesh, 1, ProblemKind.SLOSHING), 1)
        errs.append(abs(float(sol.eigenvalues[0]) - exact))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert min(orders) >= 1.8

    _report(9, True, f"schur vs dense {worst_schur:.1e}; scaling {worst_scale:.1e}; "
                     f"m0 orthogonality {worst_orth:.1e}; orders {[f'{o:.2f}' for o in orders]}")
