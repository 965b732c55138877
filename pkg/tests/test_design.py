import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oedcalib.criteria import CriterionSpec
from oedcalib.design import (Design, Scale, efficiency, fim, inverse_transform, merge_support,
                             transform_design)
from oedcalib.errors import EmptyDesign, ScaleError, SingularDesign
from oedcalib.model import RegressorMode, linear

XI_D = Design.uniform(Scale.RESPONSE, [0.09, 0.27, 0.45])
XI_NAIVE = Design.uniform(Scale.RESPONSE, [0.13, 0.33, 0.45])


def designs(min_k=3, max_k=6):
    @st.composite
    def build(draw):
        k = draw(st.integers(min_k, max_k))
        pts = draw(st.lists(st.floats(0.01, 0.45), min_size=k, max_size=k, unique=True))
        pts = np.sort(np.array(pts))
        if np.any(np.diff(pts) < 1e-3):
            pts = np.linspace(0.02, 0.45, k)
        raw = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
        return Design(Scale.RESPONSE, pts, raw / raw.sum())

    return build()


# ---------------------------------------------------------------- Design


def test_design_validation():
    with pytest.raises(ValueError):
        Design(Scale.RESPONSE, [0.1, 0.1], [0.5, 0.5])
    with pytest.raises(ValueError):
        Design(Scale.RESPONSE, [0.2, 0.1], [0.5, 0.5])
    with pytest.raises(ValueError):
        Design(Scale.RESPONSE, [0.1, 0.2], [0.6, 0.6])
    with pytest.raises(ValueError):
        Design(Scale.RESPONSE, [0.1, 0.2], [1.2, -0.2])
    with pytest.raises(EmptyDesign):
        Design(Scale.RESPONSE, [], [])


def test_design_renormalises_rounded_weights():
    d = Design(Scale.RESPONSE, [0.1, 0.2, 0.3], [0.3333333, 0.3333333, 0.3333333])
    assert d.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_design_is_immutable():
    with pytest.raises(ValueError):
        XI_D.points[0] = 0.5


def test_from_unsorted_pools_duplicates():
    d = Design.from_unsorted("response", [0.3, 0.1, 0.3], [0.25, 0.5, 0.25])
    np.testing.assert_array_equal(d.points, [0.1, 0.3])
    np.testing.assert_allclose(d.weights, [0.5, 0.5])


def test_scale_parse_aliases():
    assert Scale.parse("netOD") is Scale.RESPONSE
    assert Scale.parse("dose") is Scale.DOSE


# ---------------------------------------------------------------- fim


def test_one_point_fim_is_rank_one(model):
    M = fim(Design(Scale.RESPONSE, [0.3], [1.0]), model).matrix
    f = model.regressor(0.3)
    np.testing.assert_allclose(M, np.outer(f, f), rtol=1e-14)
    assert abs(np.linalg.det(M)) < 1e-12 * np.abs(M).max() ** 3


def test_fim_rejects_dose_scale(model):
    with pytest.raises(ScaleError):
        fim(Design(Scale.DOSE, [1.0, 5.0, 10.0], [1 / 3] * 3), model)


def test_fim_records_mode_and_theta(model):
    info = fim(XI_D, model, mode="naive-inverse")
    assert info.mode is RegressorMode.NAIVE_INVERSE
    assert info.theta == model.theta0
    assert info.m == 3


@settings(max_examples=50, deadline=None)
@given(designs(min_k=1, max_k=6))
def test_fim_symmetric_psd_rank_bounded(design):
    from oedcalib.model import radiochromic

    model = radiochromic()
    M = fim(design, model).matrix
    np.testing.assert_array_equal(M, M.T)
    lam = np.linalg.eigvalsh(M)
    assert lam.min() >= -1e-10 * lam.max()
    assert np.sum(lam > 1e-10 * lam.max()) <= design.k


@settings(max_examples=50, deadline=None)
@given(designs())
def test_weighted_trace_identity(design):
    from oedcalib.model import radiochromic

    model = radiochromic()
    M = fim(design, model).matrix
    F = model.regressor(design.points)
    d = np.einsum("ij,jk,ik->i", F, np.linalg.inv(M), F)
    assert np.dot(design.weights, d) == pytest.approx(3.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(designs(), st.floats(0.1, 10.0))
def test_d_efficiency_scale_invariance(design, c):
    from oedcalib.model import CalibrationModel, radiochromic

    base = radiochromic()
    scaled = CalibrationModel(
        "scaled", base.param_names, base.theta0, base.response_space, base.dose_space,
        mu_fn=base.mu_fn, grad_fn=lambda y, th: tuple(c * v for v in base.grad_fn(y, th)[:1]) + (
            base.grad_fn(y, th)[1],),
    )
    spec = CriterionSpec.d()
    e1 = efficiency(design, XI_D, spec, base)
    e2 = efficiency(design, XI_D, spec, scaled)
    assert e1 == pytest.approx(e2, rel=1e-10)


# ---------------------------------------------------------------- transforms


def test_transform_table_rows(model):
    np.testing.assert_allclose(transform_design(XI_D, model).points, [0.80, 3.90, 10.00], atol=0.05)
    np.testing.assert_allclose(transform_design(XI_NAIVE, model).points, [1.33, 5.54, 10.00], atol=0.05)


def test_transform_round_trip(model):
    d = Design(Scale.RESPONSE, [0.0, 0.1234, 0.3, 0.45], [0.1, 0.2, 0.3, 0.4])
    back = inverse_transform(transform_design(d, model), model)
    np.testing.assert_allclose(back.points, d.points, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(designs(min_k=1))
def test_transform_preserves_weights_and_order(design):
    from oedcalib.model import radiochromic

    dose = transform_design(design, radiochromic())
    np.testing.assert_array_equal(dose.weights, design.weights)
    assert np.all(np.diff(dose.points) > 0)
    assert dose.scale is Scale.DOSE


def test_transform_scale_checks(model):
    with pytest.raises(ScaleError):
        transform_design(Design(Scale.DOSE, [1.0], [1.0]), model)
    with pytest.raises(ScaleError):
        inverse_transform(XI_D, model)


# ---------------------------------------------------------------- merging


def test_merge_close_points():
    d = Design(Scale.RESPONSE, [0.0899, 0.0901], [0.5, 0.5])
    out = merge_support(d, point_tol=1e-3)
    np.testing.assert_allclose(out.points, [0.09])
    np.testing.assert_allclose(out.weights, [1.0])


def test_merge_drops_tiny_weight():
    d = Design(Scale.RESPONSE, [0.1, 0.2, 0.3], [0.5, 1e-9, 0.5 - 1e-9])
    out = merge_support(d, point_tol=1e-6, weight_tol=1e-6)
    np.testing.assert_allclose(out.points, [0.1, 0.3])
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_merge_mode_location():
    d = Design(Scale.RESPONSE, [0.10, 0.101, 0.3], [0.1, 0.4, 0.5])
    np.testing.assert_allclose(merge_support(d, point_tol=0.01, location="mode").points, [0.101, 0.3])
    np.testing.assert_allclose(merge_support(d, point_tol=0.01).points, [0.1008, 0.3])


def test_merge_default_tolerance_needs_space():
    with pytest.raises(ValueError):
        merge_support(XI_D)


def test_merge_everything_dropped():
    with pytest.raises(EmptyDesign):
        merge_support(Design(Scale.RESPONSE, [0.1, 0.2], [0.5, 0.5]), point_tol=1e-6, weight_tol=0.9)


# ---------------------------------------------------------------- efficiency


def test_self_efficiency(model, d_report):
    for spec in (CriterionSpec.d(), CriterionSpec.vi(), CriterionSpec.gi(), CriterionSpec.c_vector((0, 0, 1))):
        assert efficiency(d_report.design_response, d_report.design_response, spec, model) == pytest.approx(1.0)


def test_naive_d_efficiency(model, d_report):
    eff = efficiency(XI_NAIVE, d_report.design_response, CriterionSpec.d(), model)
    assert eff == pytest.approx(0.868, abs=0.005)


def test_practice_d_efficiency(model, d_report, practice_design):
    eff = efficiency(practice_design, d_report.design_response, CriterionSpec.d(), model)
    assert eff == pytest.approx(0.51, abs=0.01)


def test_efficiency_singular_design(model, d_report):
    one = Design(Scale.RESPONSE, [0.3], [1.0])
    with pytest.raises(SingularDesign):
        efficiency(one, d_report.design_response, CriterionSpec.d(), model)
    with pytest.raises(SingularDesign):
        efficiency(one, d_report.design_response, CriterionSpec.c_vector((0, 0, 1)), model)


def test_efficiency_above_one_warns(model, d_report):
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        eff = efficiency(d_report.design_response, XI_NAIVE, CriterionSpec.d(), model)
    assert eff > 1
    assert any("beats its reference" in str(w.message) for w in rec)


def test_linear_model_fim():
    m = linear(theta=(2.0,))
    M = fim(Design(Scale.RESPONSE, [1.0], [1.0]), m).matrix
    assert M[0, 0] == pytest.approx(0.25)
