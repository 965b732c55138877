import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from oedcalib.criteria import CriterionSpec, phi_c, phi_vi, sensitivity_d
from oedcalib.design import Design, Scale, efficiency, fim, merge_support
from oedcalib.errors import CertificationFailed, MaxIterations, SingularDesign, SingularSequence
from oedcalib.model import RegressorMode, linear
from oedcalib.numerics import Interval
from oedcalib.solvers import (Family, SequenceSpec, WynnConfig, evaluate_fixed_design, generate,
                              optimize_sequence, solve_c_optimal, solve_d_optimal, solve_gi_optimal,
                              solve_vi_optimal)
from oedcalib.solvers import copt, dopt
from oedcalib.solvers.sequences import sequence_points


def assert_design(design, points, weights, pt=0.01, wt=0.02):
    assert design.k == len(points)
    np.testing.assert_allclose(design.points, points, atol=pt)
    np.testing.assert_allclose(design.weights, weights, atol=wt)


# ---------------------------------------------------------------- D


def test_d_optimal(d_report):
    assert_design(d_report.design_response, [0.09, 0.27, 0.45], [1 / 3] * 3, pt=0.005, wt=1e-12)
    np.testing.assert_allclose(d_report.design_dose.points, [0.80, 3.90, 10.00], atol=0.05)
    assert d_report.certificate["type"] == "GET"
    assert d_report.certificate["bound"] >= 0.999
    assert d_report.extras["method"] == "equal-weight"


def test_d_optimal_naive(naive_report, d_report, model):
    assert_design(naive_report.design_response, [0.13, 0.33, 0.45], [1 / 3] * 3, pt=0.005, wt=1e-12)
    spec = CriterionSpec.d()
    eff = efficiency(naive_report.design_response, d_report.design_response, spec, model)
    assert eff == pytest.approx(0.868, abs=0.005)
    sens = sensitivity_d(naive_report.design_response.points, naive_report.design_response, model,
                         mode=RegressorMode.NAIVE_INVERSE)
    np.testing.assert_allclose(sens, 0.0, atol=1e-3)


def test_d_optimal_one_parameter():
    rep = solve_d_optimal(linear(), starts=4)
    assert_design(rep.design_response, [1.0], [1.0], pt=1e-6, wt=1e-12)


def test_d_grid_oracle(d_report, model):
    grid = np.arange(0.0025, 0.45 + 1e-12, 0.0025)
    F = model.regressor(grid)
    best, arg = -np.inf, None
    for a in range(grid.size):
        for b in range(a + 1, grid.size):
            rest = np.arange(b + 1, grid.size)
            if rest.size == 0:
                continue
            dets = np.abs(np.linalg.det(np.stack([np.broadcast_to(F[a], (rest.size, 3)),
                                                  np.broadcast_to(F[b], (rest.size, 3)), F[rest]], axis=1)))
            c = int(np.argmax(dets))
            if dets[c] > best:
                best, arg = dets[c], (grid[a], grid[b], grid[rest[c]])
    np.testing.assert_allclose(d_report.design_response.points, arg, atol=0.0025 + 1e-9)


def test_d_fallback_agrees(model, d_report):
    rep = solve_d_optimal(model, force_fallback=True, starts=8)
    assert rep.extras["method"] == "vertex-direction"
    np.testing.assert_allclose(rep.value, d_report.value, rtol=1e-6)


def test_d_certification_failure(model, monkeypatch):
    monkeypatch.setattr(dopt, "_certified", lambda cert, m: False)
    with pytest.raises(CertificationFailed):
        solve_d_optimal(model, starts=4)


def test_get_certificate_property(d_report, vi_report, model):
    grid = model.response_space.linspace(4000)
    for rep, spec in ((d_report, CriterionSpec.d()), (vi_report, CriterionSpec.vi())):
        from oedcalib.criteria import frechet_derivative

        d = rep.design_response
        psi = frechet_derivative(grid, d, spec, model)
        assert psi.min() >= -1e-3 * rep.value
        np.testing.assert_allclose(frechet_derivative(d.points, d, spec, model), 0.0, atol=1e-3 * rep.value)


# ---------------------------------------------------------------- c


def test_c_gamma(c_reports):
    assert_design(c_reports["gamma"].design_response, [0.06, 0.27, 0.45], [0.41, 0.40, 0.19])


def test_c_alpha(c_reports):
    assert_design(c_reports["alpha"].design_response, [0.06, 0.27, 0.45], [0.78, 0.16, 0.06])


def test_alpha_gamma_share_support(c_reports):
    a, g = c_reports["alpha"].design_response, c_reports["gamma"].design_response
    np.testing.assert_allclose(a.points, g.points, atol=1e-3)
    assert np.max(np.abs(a.weights - g.weights)) > 0.1


def elfving_lp(model, c, n=901):
    """min sum|u| subject to sum u_i f(t_i) = c; the optimal c'M^-c equals the squared minimum."""
    t = np.linspace(0.0, 0.45, n)[1:]
    F = model.regressor(t)
    res = linprog(np.ones(2 * t.size), A_eq=np.hstack([F.T, -F.T]), b_eq=c, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun**2


@pytest.mark.parametrize("name,j", [("alpha", 0), ("beta", 1), ("gamma", 2)])
def test_c_against_linear_programming_oracle(c_reports, model, name, j):
    lp = elfving_lp(model, np.eye(3)[j])
    rep = c_reports[name]
    assert rep.value <= lp * (1 + 1e-9)
    assert rep.value == pytest.approx(lp, rel=1e-3)


def test_c_beta_optimum_is_three_points(c_reports):
    d = c_reports["beta"].design_response
    assert d.k == 3
    assert np.all(d.weights > 0.2)


@pytest.mark.parametrize("name", ["alpha", "beta", "gamma"])
def test_elfving_consistency(c_reports, name):
    cert = c_reports[name].certificate
    assert cert["type"] == "ELFVING"
    assert c_reports[name].value == pytest.approx(cert["phi_from_rho"], rel=1e-6)
    assert cert["random_check"]["n_better"] == 0
    assert cert["random_check"]["n"] > 1900


def test_c_general_vector(model):
    c = (1.0, -0.02, 0.5)
    rep = solve_c_optimal(model, c=c, n_random=200)
    assert rep.value == pytest.approx(elfving_lp(model, np.array(c)), rel=1e-3)


def test_c_direct_fallback(model, monkeypatch, c_reports):
    def boom(*a, **k):
        raise copt.DegenerateSystem("forced")

    monkeypatch.setattr(copt, "_scan", boom)
    rep = solve_c_optimal(model, c=(0, 0, 1), n_random=100, starts=16)
    assert rep.certificate["method"] == "direct"
    assert rep.value == pytest.approx(c_reports["gamma"].value, rel=1e-3)


def test_c_rejects_bad_vector(model):
    with pytest.raises(ValueError):
        solve_c_optimal(model, c=(0, 0, 0))
    with pytest.raises(ValueError):
        solve_c_optimal(model, c=(1, 0))


def test_c_efficiencies_of_d_optimum(c_reports, d_report, model):
    effs = {}
    for j, name in enumerate(model.param_names):
        effs[name] = c_reports[name].value / phi_c(fim(d_report.design_response, model), np.eye(3)[j])
    assert effs["alpha"] == pytest.approx(0.53, abs=0.03)
    assert effs["gamma"] == pytest.approx(0.81, abs=0.03)
    assert 0 < effs["beta"] <= 1


# ---------------------------------------------------------------- Wynn


def test_gi_design(gi_report, d_report, model):
    assert_design(gi_report.design_response, [0.13, 0.33, 0.45], [0.06, 0.30, 0.64])
    assert gi_report.certificate["type"] == "STAGNATION"
    assert gi_report.converged
    eff = efficiency(gi_report.design_response, d_report.design_response, CriterionSpec.d(), model)
    assert eff == pytest.approx(0.59, abs=0.03)


def test_gi_restart_at_optimum_stagnates(gi_report, model):
    rep = solve_gi_optimal(model, config=WynnConfig(initial=gi_report.design_response))
    # the stall test compares against the value `window` iterations back, so it fires at window + 1
    assert rep.converged and rep.iterations <= 201
    assert abs(rep.value - gi_report.value) < 1e-6 * gi_report.value


def test_vi_design(vi_report, d_report, model):
    assert_design(vi_report.design_response, [0.09, 0.29, 0.45], [0.19, 0.46, 0.35])
    assert vi_report.converged
    assert vi_report.certificate["bound"] >= 0.999
    eff = efficiency(vi_report.design_response, d_report.design_response, CriterionSpec.d(), model)
    assert eff == pytest.approx(0.93, abs=0.03)


def test_vi_merge_stability(vi_report, model):
    d = vi_report.design_response
    merged = merge_support(d, space=model.response_space)
    assert phi_vi(merged, model) == pytest.approx(phi_vi(d, model), rel=1e-6)


def test_vi_line_search_step(vi_report, model):
    rep = solve_vi_optimal(model, config=WynnConfig(step="line-search"))
    assert rep.converged
    assert rep.value == pytest.approx(vi_report.value, rel=1e-6)


def test_wynn_config_validation():
    with pytest.raises(ValueError):
        WynnConfig(delta=1.0)
    with pytest.raises(ValueError):
        WynnConfig(step="fixed")
    with pytest.raises(ValueError):
        WynnConfig(max_iter=0)


def test_wynn_initial_design_checks(model):
    with pytest.raises(ValueError):
        solve_vi_optimal(model, config=WynnConfig(initial=Design(Scale.RESPONSE, [0.2, 0.4], [0.5, 0.5])))
    near_zero = Design.uniform(Scale.RESPONSE, [0.0, 1e-9, 2e-9])
    with pytest.raises(SingularDesign):
        solve_vi_optimal(model, config=WynnConfig(initial=near_zero))


def test_wynn_max_iterations(model):
    rep = solve_vi_optimal(model, config=WynnConfig(max_iter=3, polish=False))
    assert not rep.converged and rep.iterations == 3
    with pytest.raises(MaxIterations):
        solve_vi_optimal(model, config=WynnConfig(max_iter=3, polish=False, strict=True))


def test_wynn_dose_scale_initial_design(model, vi_report):
    start = Design.uniform(Scale.DOSE, [2.0, 5.0, 10.0])
    rep = solve_vi_optimal(model, config=WynnConfig(initial=start))
    assert rep.value == pytest.approx(vi_report.value, rel=1e-5)


# ---------------------------------------------------------------- sequences


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(list(Family)), st.floats(0.01, 0.99), st.integers(2, 12))
def test_sequence_points_pinned_and_increasing(family, r, n):
    space = Interval(0.0, 0.45)
    pts = sequence_points(family, space, n, r)
    assert pts[-1] == space.hi
    assert np.all(np.diff(pts) > 0)
    assert pts[0] > space.lo


def test_sequence_formulas():
    space = Interval(0.0, 0.45)
    np.testing.assert_allclose(sequence_points("ar", space, 6, 0.84), 0.45 * (1 - 0.84 * np.arange(5, -1, -1) / 5))
    np.testing.assert_allclose(sequence_points("ge", space, 6, 0.69), 0.45 * 0.69 ** np.arange(5, -1, -1))


def test_sequence_spec_validation():
    with pytest.raises(ValueError):
        SequenceSpec("arithmetic", n=1)
    with pytest.raises(ValueError):
        SequenceSpec("arithmetic", r=1.0)
    with pytest.raises(ValueError):
        SequenceSpec("harmonic")


def test_generate_dose_scale(model):
    d = generate(SequenceSpec("arithmetic", "dose", 6, 0.5), model)
    assert d.scale is Scale.DOSE
    np.testing.assert_allclose(d.points, [5, 6, 7, 8, 9, 10])


def test_sequence_d_arithmetic(model, d_report):
    rep = optimize_sequence(model, None, SequenceSpec("arithmetic"), CriterionSpec.d(), reference=d_report.value)
    assert rep.ratio == pytest.approx(0.84, abs=0.01)
    np.testing.assert_allclose(rep.design_response.points, [0.07, 0.15, 0.22, 0.30, 0.37, 0.45], atol=0.005)
    assert rep.efficiencies["D"] == pytest.approx(0.84, abs=0.02)


def test_sequence_d_geometric(model, d_report):
    rep = optimize_sequence(model, None, SequenceSpec("geometric"), CriterionSpec.d(),
                            reference=d_report.design_response)
    assert rep.ratio == pytest.approx(0.69, abs=0.01)
    np.testing.assert_allclose(rep.design_response.points, [0.07, 0.10, 0.15, 0.21, 0.31, 0.45], atol=0.005)
    assert rep.efficiencies["D"] == pytest.approx(0.85, abs=0.02)


def test_sequence_vi_arithmetic_dose_points(model, vi_report):
    rep = optimize_sequence(model, None, SequenceSpec("arithmetic"), CriterionSpec.vi(), reference=vi_report.value)
    np.testing.assert_allclose(rep.design_dose.points, [0.90, 1.80, 3.20, 4.90, 7.10, 10.0], atol=0.1)
    assert rep.efficiencies["VI"] == pytest.approx(0.83, abs=0.04)


def test_sequence_on_dose_scale(model, d_report):
    rep = optimize_sequence(model, None, SequenceSpec("geometric", "dose"), CriterionSpec.d(),
                            reference=d_report.value)
    assert rep.design_dose.points[-1] == 10.0
    assert rep.design_response.points[-1] == pytest.approx(model.eta(10.0))
    assert 0 < rep.efficiencies["D"] <= 1


def test_sequence_singular(model):
    with pytest.raises(SingularSequence):
        optimize_sequence(model, None, SequenceSpec("arithmetic", n=2), CriterionSpec.d(), reference=1.0)


# ---------------------------------------------------------------- evaluation


def test_evaluate_practice_design(model, practice_design, d_report, gi_report, vi_report, c_reports):
    refs = {"D": d_report.value, "GI": gi_report.value, "VI": vi_report.value,
            **{f"c_{p}": c_reports[p].value for p in model.param_names}}
    ev = evaluate_fixed_design(practice_design, model, references=refs)
    expected = {"D": 0.51, "GI": 0.07, "VI": 0.34, "c_alpha": 0.19, "c_beta": 0.18, "c_gamma": 0.24}
    for name, value in expected.items():
        assert ev.efficiencies[name] == pytest.approx(value, abs=0.03), name


def test_evaluate_optimum_is_efficient(model, d_report):
    ev = evaluate_fixed_design(d_report.design_response, model, criteria=[CriterionSpec.d()],
                               references={"D": d_report.design_response})
    assert ev.efficiencies["D"] == pytest.approx(1.0)


def test_evaluate_matches_direct_ratio(model, gi_report, vi_report):
    ev = evaluate_fixed_design(gi_report.design_response, model, criteria=[CriterionSpec.vi()],
                               references={"VI": vi_report.value})
    assert ev.efficiencies["VI"] == pytest.approx(vi_report.value / phi_vi(gi_report.design_response, model))


def test_evaluate_records_errors_per_criterion(model, d_report):
    two = Design(Scale.RESPONSE, [0.2, 0.45], [0.5, 0.5])
    ev = evaluate_fixed_design(two, model, criteria=[CriterionSpec.d(), CriterionSpec.c_vector((0, 1, 0))],
                               references={"D": d_report.value, "c_beta": 1.0})
    by = {e.name: e for e in ev.entries}
    assert by["D"].error is not None and by["D"].efficiency is None
    assert "NotEstimable" in by["c_beta"].error
