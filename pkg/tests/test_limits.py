import numpy as np
import pytest

from isomwalk.catalog import half_turns, line_lattice, rotation_rich, skew_turn, skew_turn_symmetric, square_lattice
from isomwalk.errors import DegenerateForm
from isomwalk.isomcore import Isometry, close_finite_group, group_model_for, rotation2d
from isomwalk.limits import (
    BumpSpec,
    QuadraticForm,
    VerificationReport,
    bump,
    bump_integral,
    clt_check,
    compare_error_exponents,
    compute_delta,
    drift,
    expect_bump_gaussian,
    fit_power_law,
    fourier_range_check,
    gaussian_density_oracle,
    gaussian_from_delta,
    improved_rate,
    limit_parameters,
    llt_check,
    multiscale_check,
    skew_direction,
    symmetrize_delta,
)
from isomwalk.measure import AtomicIsometryMeasure, center, check_condition_C, conjugate_by_translation
from isomwalk.walker import WalkConfig, simulate

PI2 = np.pi ** 2
ROT90 = rotation2d(np.pi / 2)
TRIVIAL = close_finite_group([np.eye(2)])


def half_turn_about(p):
    p = np.asarray(p, dtype=float)
    return Isometry(-np.eye(2), 2 * p)


# ----------------------------------------------------------------------
# drift and forms

def test_drift_examples():
    assert np.allclose(drift(rotation_rich()).v0, 0.0)
    dr = drift(AtomicIsometryMeasure.dirac(Isometry(np.eye(2), [1.0, 0.0])))
    np.testing.assert_allclose(dr.v0, [1.0, 0.0])
    eps = 0.1
    g1, g2 = half_turn_about([1.0, 0.0]), half_turn_about([1.0, eps])
    mu = AtomicIsometryMeasure(np.array([g1.theta, g2.theta]), np.array([g1.v, g2.v]), [0.5, 0.5])
    dr = drift(mu)
    np.testing.assert_allclose(dr.v0, 0.0, atol=1e-15)
    np.testing.assert_allclose(dr.fixed_point, [1.0, eps / 2], atol=1e-15)
    assert check_condition_C(dr.centered).verdict == "holds"


def test_drift_translation_only():
    mu = AtomicIsometryMeasure(np.array([np.eye(2)] * 2), np.array([[2.0, 1.0], [0.0, 1.0]]), [0.5, 0.5])
    dr = drift(mu)
    np.testing.assert_allclose(dr.v0, [1.0, 1.0])
    np.testing.assert_allclose(dr.centered.barycenter(), 0.0, atol=1e-15)


def test_compute_delta_square_lattice():
    m = compute_delta(square_lattice(), TRIVIAL).matrix
    np.testing.assert_allclose(m, PI2 * np.eye(2), atol=1e-12)


def test_compute_delta_degenerate_line():
    form = compute_delta(line_lattice(), TRIVIAL)
    np.testing.assert_allclose(form.matrix, 2 * PI2 * np.diag([1.0, 0.0]), atol=1e-12)
    assert not form.positive_definite
    with pytest.raises(DegenerateForm):
        form.require_positive_definite()


def test_compute_delta_commutes_with_finite_group():
    c3 = close_finite_group([rotation2d(2 * np.pi / 3)])
    m = compute_delta(skew_turn(), c3).matrix
    for s in c3.elements:
        np.testing.assert_allclose(s @ m, m @ s, atol=1e-10)


def test_compute_delta_requires_centering():
    with pytest.raises(ValueError):
        compute_delta(AtomicIsometryMeasure.dirac(Isometry(np.eye(2), [1.0, 0.0])))


def test_rotation_rich_delta0_frozen():
    # frozen from the SO(2) closed form pi^2 E|v|^2, evaluated independently
    m0 = limit_parameters(rotation_rich()).delta0.matrix
    np.testing.assert_allclose(m0, 5.823066596642722 * np.eye(2), rtol=1e-12, atol=1e-12)


def test_symmetrize_delta_examples():
    form = QuadraticForm(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(symmetrize_delta(form, np.eye(2)).matrix, form.matrix)
    sym = symmetrize_delta(form, ROT90)
    np.testing.assert_allclose(sym.matrix, 2.0 * np.eye(2), atol=1e-14)
    assert sym.residual <= 1e-10
    # irrational angle: projection and long Cesaro average agree
    th = rotation2d(2 * np.pi * (np.sqrt(5) - 1) / 2)
    proj = symmetrize_delta(form, th, max_orbit=64).matrix
    ces = symmetrize_delta(form, th, max_orbit=20000, method="cesaro").matrix
    np.testing.assert_allclose(proj, 2.0 * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(ces, proj, atol=1e-3)


def test_quadratic_form_rejects_indefinite():
    with pytest.raises(ValueError):
        QuadraticForm(np.diag([1.0, -1.0]))


# ----------------------------------------------------------------------
# Gaussian laws

def test_gaussian_density_against_oracle():
    law = gaussian_from_delta(QuadraticForm(PI2 * np.eye(2)), 50.0)
    for x in ([0.0, 0.0], [3.0, -2.0], [7.0, 1.0]):
        closed = law.density(np.array(x))
        assert closed == pytest.approx(np.exp(-np.dot(x, x) / 50.0) / (np.pi * 50.0), rel=1e-12)
        assert abs(closed - gaussian_density_oracle(PI2 * np.eye(2), 50.0, x)) <= 1e-6
    m = np.array([[12.0, 3.0], [3.0, 7.0]])
    law = gaussian_from_delta(QuadraticForm(m), 4.0)
    for x in ([0.5, -1.0], [2.0, 2.0]):
        assert abs(law.density(np.array(x)) - gaussian_density_oracle(m, 4.0, x)) <= 1e-6


def test_gaussian_normalization_and_covariance():
    m = np.array([[12.0, 3.0], [3.0, 7.0]])
    l = 9.0
    law = gaussian_from_delta(QuadraticForm(m), l)
    t = np.linspace(-40, 40, 1601)
    h = t[1] - t[0]
    a, b = np.meshgrid(t, t, indexing="ij")
    pts = np.stack([a, b], axis=-1)
    dens = law.density(pts)
    assert dens.sum() * h * h == pytest.approx(1.0, abs=1e-6)
    cov = np.einsum("abi,abj,ab->ij", pts, pts, dens) * h * h
    np.testing.assert_allclose(cov, l * m / (2 * PI2), atol=1e-6)
    np.testing.assert_allclose(law.covariance(), l * m / (2 * PI2), rtol=1e-12)
    # sampled cross-check
    rng = np.random.default_rng(0)
    x = rng.multivariate_normal(np.zeros(2), law.covariance(), size=200000)
    xi = np.array([0.05, -0.02])
    emp = np.mean(np.exp(-2j * np.pi * x @ xi))
    assert abs(emp - law.charfn(xi)) <= 4 / np.sqrt(200000)


def test_gaussian_degenerate_raises():
    with pytest.raises(DegenerateForm):
        gaussian_from_delta(QuadraticForm(np.diag([1.0, 0.0])), 10)


def test_bump_basics():
    assert bump(np.zeros(2)) == 1.0
    assert bump(np.array([1.0, 0.0])) == 0.0
    # one-dimensional integral by brute midpoint rule
    s = (np.arange(200000) + 0.5) / 100000 - 1.0
    assert bump_integral(1) == pytest.approx(np.sum(bump(s[:, None])) / 100000, rel=1e-8)
    spec = BumpSpec((0.0, 0.0), 2.0, 3.0)
    assert spec.integral() == pytest.approx(3.0 * 4.0 * bump_integral(2))


def test_expect_bump_zero_function():
    law = gaussian_from_delta(QuadraticForm(PI2 * np.eye(2)), 10)
    assert expect_bump_gaussian(law, BumpSpec((0.0, 0.0), 1.0, 0.0)) == 0.0


# ----------------------------------------------------------------------
# experiments

def test_clt_square_lattice():
    rep = clt_check(square_lattice(), [1, 4096], 1000000, seed=0)
    assert rep.verdict == "pass"
    one = rep.rows[0]["covariance_per_step"]
    np.testing.assert_allclose(one, 0.5 * np.eye(2), atol=4 * rep.rows[0]["mc_se"] * 0.5 + 1e-3)
    last = rep.rows[-1]["covariance_per_step"]
    np.testing.assert_allclose(last, 0.5 * np.eye(2), atol=0.05 * 0.5)


def test_clt_rotation_rich_isotropic():
    rep = clt_check(rotation_rich(), [256, 1024], 100000, seed=0)
    assert rep.rows[-1]["isotropy_deviation"] <= 0.05
    assert rep.rows[-1]["offdiag_rel"] <= 0.05


def test_llt_square_lattice_stabilizes():
    """On the even sublattice the bump only sees the origin, so the level is
    twice the Gaussian one; consecutive values still settle."""
    rep = llt_check(square_lattice(), [1024, 4096], 4000000, seed=0)
    a, b = rep.rows[0]["scaled_estimate"], rep.rows[1]["scaled_estimate"]
    assert 0.9 <= b / a <= 1.1


def test_llt_far_tail_and_linearity():
    mu = rotation_rich()
    far = BumpSpec((100 * np.sqrt(64.0), 0.0))
    rep = llt_check(mu, [16, 64], 20000, seed=1, spec=far)
    assert all(r["scaled_estimate"] == 0.0 for r in rep.rows)
    one = llt_check(mu, [16, 64], 20000, seed=1)
    two = llt_check(mu, [16, 64], 20000, seed=1, spec=BumpSpec((0.0, 0.0), 1.0, 2.0))
    for r1, r2 in zip(one.rows, two.rows):
        assert r2["scaled_estimate"] == 2 * r1["scaled_estimate"]


def test_multiscale_macroscopic_scale():
    rep = multiscale_check(rotation_rich(), [256, 1024], 100000, seed=0, scale_exponent=0.5, offset=0.0)
    for row in rep.rows:
        assert row["mc_estimate"] == pytest.approx(row["main_term"], rel=0.05)


def test_multiscale_reports_fit_and_period_finding():
    rep = multiscale_check(skew_turn(), [16, 64], 20000, seed=0, offset=1.5)
    assert rep.verdict in ("pass", "fail", "inconclusive")
    assert rep.fits["beta"] == 1
    assert any("order 3" in f for f in rep.findings)
    clean = multiscale_check(skew_turn(), [12, 48], 20000, seed=0, offset=1.5)
    assert not any("order 3" in f for f in clean.findings)


def test_improved_rate_flags():
    assert improved_rate(square_lattice())
    assert improved_rate(skew_turn_symmetric())
    assert not improved_rate(skew_turn())
    assert improved_rate(rotation_rich())


def test_skew_direction_is_unit_and_signed():
    mu = skew_turn()
    u = skew_direction(mu)
    assert np.linalg.norm(u) == pytest.approx(1.0)
    mc = drift(mu).centered
    # orbit-averaged cubic moment along u is positive; C3 makes it odd in u
    c3 = sum(np.sum(mc.weights * ((mc.translations @ np.linalg.matrix_power(rotation2d(2 * np.pi / 3), k).T)
                                  @ u) ** 3) for k in range(3))
    assert c3 > 0


def test_fit_power_law_recovers_exponent():
    ls = np.array([16, 32, 64, 128, 256, 512], dtype=float)
    rng = np.random.default_rng(0)
    truth = 3.0 * ls ** -1.5
    ses = 0.01 * truth
    fit = fit_power_law(ls, truth + ses * rng.standard_normal(ls.size), ses)
    assert fit["exponent"] == pytest.approx(1.5, abs=0.02)
    assert fit["exponent_low"] <= 1.5 <= fit["exponent_high"]
    assert fit["amplitude"] == pytest.approx(3.0, rel=0.05)
    assert fit["signal"] > 50
    # negative amplitude is fitted as such
    fit = fit_power_law(ls, -truth, ses)
    assert fit["amplitude"] < 0 and fit["exponent"] == pytest.approx(1.5, abs=1e-9)


def _report_with(exp, low, high):
    fits = {"beta": 1}
    if exp is not None:
        fits.update({"error_exponent": exp, "exponent_low": low, "exponent_high": high})
    return VerificationReport("verify-multiscale", {}, [], "pass", fits=fits)


def test_compare_error_exponents_logic():
    assert compare_error_exponents(_report_with(2.0, 1.8, 2.2), _report_with(1.5, 1.3, 1.7)).verdict == "pass"
    assert compare_error_exponents(_report_with(1.7, 1.5, 1.9), _report_with(1.5, 1.3, 1.7)).verdict == \
        "inconclusive"
    # reversed but overlapping intervals: not a contradiction
    assert compare_error_exponents(_report_with(1.2, 0.8, 1.6), _report_with(1.6, 1.4, 1.8)).verdict == \
        "inconclusive"
    assert compare_error_exponents(_report_with(1.0, 0.9, 1.1), _report_with(1.6, 1.4, 1.8)).verdict == "fail"
    assert compare_error_exponents(_report_with(None, None, None), _report_with(1.5, 1.3, 1.7)).verdict == \
        "inconclusive"


def test_fourier_zero_frequency_is_one():
    ens = simulate(rotation_rich(), WalkConfig(100, 5000, frequencies=[[0.0, 0.0]]))
    assert ens.charfn[0].value == 1.0


def test_fourier_square_lattice_point():
    xi = np.array([0.005, 0.0])
    l = 10000
    pred = np.exp(-l * PI2 * xi @ xi)
    assert pred == pytest.approx(np.exp(-2.4674), rel=1e-4)
    ens = simulate(square_lattice(), WalkConfig(l, 1000000, seed=3, frequencies=[xi]))
    est = ens.charfn[0]
    assert abs(est.value - pred) <= 4 * est.standard_error


def test_fourier_range_square_lattice():
    rep = fourier_range_check(square_lattice(), 10000, 200000, seed=0)
    assert rep.verdict == "pass"
    assert len(rep.panels["low"]) == 10 and len(rep.panels["high"]) == 16


def test_fourier_range_flags_degenerate_lattice():
    rep = fourier_range_check(line_lattice(), 400, 20000, seed=0)
    assert rep.verdict == "fail"
    assert any("DegenerateForm" in f for f in rep.findings)
    ens = simulate(line_lattice(), WalkConfig(400, 1000, frequencies=[[1.0, 0.0]]))
    assert abs(ens.charfn[0].value) == pytest.approx(1.0, abs=1e-12)


def test_fourier_range_needs_large_l():
    with pytest.raises(ValueError):
        fourier_range_check(square_lattice(), 10, 100)


def test_report_serialization(tmp_path):
    rep = clt_check(square_lattice(), [10, 20], 2000, seed=5)
    d = rep.to_dict()
    assert d["seed"] == 5 and d["experiment"] == "verify-clt"
    rep.to_json(tmp_path / "r.json")
    rep.write_csv(tmp_path / "r.csv")
    head = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert head.startswith("l,")


def test_clt_is_translation_equivariant():
    mu = half_turns(0.5)
    centered, x = center(mu)
    assert conjugate_by_translation(mu, x).same_as(centered, tol=1e-12)
    x0 = np.array([0.25, -1.0])
    a = clt_check(mu, [16, 64], 20000, seed=5, x0=x0)
    b = clt_check(centered, [16, 64], 20000, seed=5, x0=x0 - x)
    for ra, rb in zip(a.rows, b.rows):
        np.testing.assert_allclose(ra["covariance_per_step"], rb["covariance_per_step"], rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(ra["mean"] - x, rb["mean"], atol=1e-9)
    np.testing.assert_allclose(a.params["predicted_rate"], b.params["predicted_rate"], atol=1e-12)
