import numpy as np
import pytest

from osclab import corpus
from osclab.config import QuadConfig
from osclab.manifold import OutOfDomain, Submanifold
from osclab.sweep import (
    Cutoff,
    DegenerateReparam,
    FlowRankError,
    SweepFamily,
    _chart_mesh,
    _composite_gauss,
    coefficients_csv,
    extract_t_polynomials,
    extract_t_polynomials_sampled,
    growth_exponent,
    random_reparam,
    reparam_invariance_test,
    swept_volume,
    sweep_eval,
    tangency_flow_check,
    vanishing_verdict,
    volume_csv,
    volume_series,
)
from oracles import annulus_area


@pytest.fixture(scope="module")
def segment():
    return corpus.load("segment")


@pytest.fixture(scope="module")
def circle():
    return corpus.load("circle")


@pytest.fixture(scope="module")
def hp():
    return corpus.load("hyperbolic_paraboloid")


def test_sweep_eval_examples(segment, hp):
    x = np.array([0.25])
    assert np.allclose(sweep_eval(segment.family, x, 0.0),
                       segment.manifold.embed(x))
    assert np.allclose(sweep_eval(segment.family, np.array([0.5]), 0.3),
                       [0.5, 0.3])
    x0, y0, t = 0.3, -0.4, 0.2
    assert np.allclose(sweep_eval(hp.family, np.array([x0, y0]), t),
                       [x0 + t, y0, x0 * y0 + t * y0], atol=1e-15)
    with pytest.raises(OutOfDomain):
        sweep_eval(segment.family, np.array([2.0]), 0.1)


def test_cutoff_freezes_outside_outer_radius(segment):
    scene = corpus.with_cutoff(segment, 0.15, 0.4)
    x_out = np.array([0.98])  # radial chart distance 0.48 from the center
    for t in (0.0, 0.1, 0.3):
        assert np.allclose(scene.family.point(x_out, t),
                           scene.manifold.embed(x_out))
    x_in = np.array([0.5])
    assert np.allclose(scene.family.point(x_in, 0.3), [0.5, 0.3])


def test_segment_volume_exact(segment):
    vs = swept_volume(segment.family, 0.5)
    assert vs.value == pytest.approx(1.0, abs=1e-10)


def test_circle_radial_volume_matches_annulus(circle):
    for t in (0.05, 0.1, 0.2):
        vs = swept_volume(circle.family, t)
        assert vs.value == pytest.approx(4 * np.pi * t, rel=1e-6)
        assert vs.value == pytest.approx(annulus_area(t), rel=1e-6)


def test_tangent_field_sweeps_no_volume():
    M = Submanifold.graph(["x"], [[0, 1]], ["0"])
    fam = SweepFamily(M, 1, fields=[["1", "0"]])
    assert swept_volume(fam, 0.3).value <= 1e-13


def test_volume_monotone_in_t(segment, hp):
    for scene in (segment, hp):
        series = volume_series(scene.family)
        vols = [s.value for s in series][::-1]  # grid is descending in t
        assert all(b >= a - 1e-12 for a, b in zip(vols, vols[1:]))
        assert all(s.value >= 0 for s in series)


def test_swept_volume_requires_positive_t(segment):
    with pytest.raises(ValueError):
        swept_volume(segment.family, 0.0)


# -- reparametrization invariance --------------------------------------------


def test_reparam_identity_gap_zero(segment):
    res = reparam_invariance_test(segment.family, ["x", "t"], 0.3)
    assert res.gap <= 1e-13


def test_reparam_cubic_warp(segment):
    res = reparam_invariance_test(segment.family, ["(x^3 + x)/2", "t"], 0.3)
    assert res.gap <= 1e-6


def test_reparam_orientation_flip(segment):
    res = reparam_invariance_test(segment.family, ["1 - x", "-t"], 0.3)
    assert res.gap <= 1e-6


def test_reparam_random_diffeos(segment, circle):
    rng = np.random.default_rng(42)
    for scene in (segment, circle):
        psi = random_reparam(scene.manifold, 0.25, rng)
        res = reparam_invariance_test(scene.family, psi, 0.25)
        assert res.gap <= 1e-6


def test_degenerate_reparam_rejected(segment):
    with pytest.raises(DegenerateReparam):
        reparam_invariance_test(segment.family, ["x*0 + 0.5", "t"], 0.3)


# -- coefficient extraction ---------------------------------------------------


def test_circle_coefficients(circle):
    for u in (0.3, 1.1, 4.0):
        table = extract_t_polynomials(circle.family, np.array([u]))
        assert table.degree == 1
        assert np.allclose(table.coeffs, [[1.0, 1.0]], atol=1e-12)
        assert table.guard_max <= 1e-9


def test_ruling_coefficients_vanish(hp):
    for x in hp.manifold.grid(3, margin=0.2):
        table = extract_t_polynomials(hp.family, x)
        assert np.max(np.abs(table.coeffs)) <= 1e-12


def test_transverse_segment_coefficients(segment):
    table = extract_t_polynomials(segment.family, np.array([0.5]))
    assert np.allclose(table.coeffs, [[1.0, 0.0]], atol=1e-14)


def test_jet_and_vandermonde_paths_agree(hp, circle, segment):
    for scene in (hp, circle, segment):
        for x in scene.manifold.grid(2, margin=0.25):
            a = extract_t_polynomials(scene.family, x)
            b = extract_t_polynomials_sampled(scene.family, x)
            assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-9


def test_quadrature_consistent_with_coefficients(segment, circle, hp):
    quad = QuadConfig(order=6, cells=4, t_cells=4)
    for scene, t in ((segment, 0.3), (circle, 0.1), (hp, 0.2)):
        F = scene.family
        vs = swept_volume(F, t, quad)
        X, wx = _chart_mesh(scene.manifold, quad)
        tn, wt = _composite_gauss(-t, t, quad.t_cells, quad.order)
        total = 0.0
        for x, w in zip(X, wx):
            table = extract_t_polynomials(F, x)
            vals = np.stack([np.polyval(c[::-1], tn) for c in table.coeffs])
            total += w * float(np.dot(wt, np.sqrt(np.sum(vals**2, axis=0))))
        assert abs(total - vs.value) <= 2 * vs.error + 1e-12 * (1 + abs(vs.value))


# -- growth exponent ----------------------------------------------------------


def test_growth_transverse_slope_one(segment):
    fit = growth_exponent(volume_series(segment.family))
    assert fit.slope == pytest.approx(1.0, abs=0.05)


def test_growth_sphere_tangent_slope_two():
    sphere = corpus.load("sphere")
    fit = growth_exponent(volume_series(sphere.family))
    assert not fit.identically_zero
    assert fit.slope >= 1.9


def test_growth_ruling_identically_zero(hp):
    fit = growth_exponent(volume_series(hp.family))
    assert fit.identically_zero


def test_growth_needs_five_samples(segment):
    series = volume_series(segment.family)[:4]
    with pytest.raises(ValueError):
        growth_exponent(series)


# -- vanishing verdict --------------------------------------------------------


def test_vanishing_ruling(hp):
    vv = vanishing_verdict(hp.family)
    assert vv.vanishes and vv.label == "VANISHES"
    assert vv.witness is None


def test_nonzero_segment_witness(segment):
    vv = vanishing_verdict(segment.family)
    assert not vv.vanishes
    assert vv.min_index == 0
    assert vv.witness.index == 0
    assert vv.witness.value == pytest.approx(1.0)


def test_rigid_rotation_vanishes():
    rot = corpus.load("circle_rotation")
    vv = vanishing_verdict(rot.family)
    assert vv.vanishes
    assert vv.max_coeff <= 1e-12


# -- tangency flow ------------------------------------------------------------


def test_flow_ruling_matches_closed_form(hp):
    vv = vanishing_verdict(hp.family)
    fr = tangency_flow_check(hp.family, np.array([0.0, 0.0]), 0.2, verdict=vv)
    assert fr.passed and fr.max_drift <= 1e-6
    # the transported field is constant: Y = (1, 0), flow x(t) = x0 - t
    from osclab.sweep import _solve_field
    for t in (0.0, 0.1, -0.15):
        Y, resid = _solve_field(hp.family, np.array([0.05, -0.1]), t,
                                hp.params.tol)
        assert np.allclose(Y, [1.0, 0.0], atol=1e-12)
        assert resid <= 1e-12


def test_flow_rigid_rotation():
    rot = corpus.load("circle_rotation")
    vv = vanishing_verdict(rot.family)
    fr = tangency_flow_check(rot.family, np.array([np.pi]), 0.2, verdict=vv)
    assert fr.max_drift <= 1e-8


def test_flow_rejects_nonzero_verdict(segment):
    vv = vanishing_verdict(segment.family)
    with pytest.raises(FlowRankError):
        tangency_flow_check(segment.family, np.array([0.5]), 0.2, verdict=vv)


# -- map-mode validation -------------------------------------------------------


def test_map_family_must_fix_time_zero():
    M = Submanifold.parametric(["u"], [[0.0, 2 * np.pi]],
                               ["sin(u)", "cos(u)"], 2)
    with pytest.raises(ValueError):
        SweepFamily(M, 1, map_exprs=["sin(u) + 1", "cos(u + t)"])


def test_map_family_rejects_cutoff():
    M = Submanifold.parametric(["u"], [[0.0, 2 * np.pi]],
                               ["sin(u)", "cos(u)"], 2)
    with pytest.raises(ValueError):
        SweepFamily(M, 1, map_exprs=["sin(u + t)", "cos(u + t)"],
                    cutoff=Cutoff(0.1, 0.2, np.array([np.pi])))


# -- CSV ------------------------------------------------------------------------


def test_volume_csv_format(segment):
    series = volume_series(segment.family, t_grid=[0.2, 0.1])
    text = volume_csv(series)
    lines = text.split("\n")
    assert lines[0] == "t,vol,err"
    assert len(lines) == 4 and lines[-1] == ""
    assert lines[1].startswith("0.2000000000000000")
    assert "\r" not in text


def test_coefficients_csv_format(segment):
    table = extract_t_polynomials(segment.family, np.array([0.5]))
    text = coefficients_csv([table], m=1)
    lines = text.split("\n")
    assert lines[0] == "x1,component,i,a_i"
    assert lines[1] == "0.5,1,0,1"
    assert lines[2] == "0.5,1,1,0"


def test_cutoff_ruling_still_vanishes(hp):
    scene = corpus.with_cutoff(hp, 0.4, 0.9)
    vv = vanishing_verdict(scene.family)
    assert vv.vanishes
    fr = tangency_flow_check(scene.family, np.array([0.0, 0.0]), 0.2,
                             verdict=vv)
    assert fr.passed
