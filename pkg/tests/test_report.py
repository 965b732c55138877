import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oedcalib.config import load_config, parse_numbers, parse_weights
from oedcalib.design import Design, Scale
from oedcalib.errors import ConfigError
from oedcalib.report import (design_from_json, design_to_json, dumps, render_table, report_to_dict, sig,
                             support_text)
from oedcalib.reproduce import load_golden, thread_count


def test_sig_digits():
    assert sig(1 / 3) == 0.333333333333
    assert sig(float("nan")) is None
    assert json.loads(dumps({"x": np.float64(2 / 3), "n": np.int64(3)})) == {"x": 0.666666666667, "n": 3}


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 449_999), min_size=1, max_size=8, unique=True),
       st.lists(st.floats(0.01, 1.0), min_size=8, max_size=8))
def test_design_json_round_trip(ticks, raw):
    # 12 significant digits cannot separate points closer than that, so stay on a 1e-6 lattice
    pts = np.sort(ticks) * 1e-6
    w = np.array(raw[: pts.size])
    d = Design(Scale.RESPONSE, pts, w / w.sum())
    text = design_to_json(d)
    again = design_from_json(text)
    assert design_to_json(again) == text
    assert abs(again.weights.sum() - 1) < 1e-9


def test_report_round_trip(d_report):
    data = report_to_dict(d_report)
    text = dumps(data)
    assert dumps(json.loads(text)) == text


def test_support_text():
    d = Design.uniform(Scale.RESPONSE, [0.09, 0.27, 0.45])
    assert support_text(d) == "0.09 (1/3)  0.27 (1/3)  0.45 (1/3)"
    seq = Design.uniform(Scale.RESPONSE, [0.1, 0.2, 0.3, 0.4])
    assert support_text(seq) == "0.10  0.20  0.30  0.40"
    assert "0.78" in support_text(Design(Scale.RESPONSE, [0.06, 0.27, 0.45], [0.78, 0.16, 0.06]))


def test_render_table_layout():
    d = Design.uniform(Scale.RESPONSE, [0.09, 0.27, 0.45])
    text = render_table([("xi", d, Design.uniform(Scale.DOSE, [0.8, 3.9, 10.0]), 1.0)])
    head = text.splitlines()[0]
    assert "netOD support points (weights)" in head and "Eff. %" in head
    assert text.splitlines()[2].endswith("100.0")


def test_parse_numbers():
    assert parse_numbers("1, 2 3", "x") == [1, 2, 3]
    assert parse_numbers("1/4", "x") == [0.25]
    np.testing.assert_allclose(parse_numbers("0.2:0.5:7.7", "x"), np.arange(0.2, 7.71, 0.5))
    with pytest.raises(ConfigError, match="where"):
        parse_numbers("a, b", "where")


def test_parse_weights():
    assert parse_weights("1/3, 1/3", 3, "w")[-1] == pytest.approx(1 / 3)
    with pytest.raises(ConfigError):
        parse_weights("0.5", 3, "w")


def test_default_config():
    cfg = load_config()
    model = cfg.build_model()
    assert model.theta0 == pytest.approx((8.32, 49.91, 2.6))
    assert cfg.evaluate is not None and cfg.evaluate.k == 16
    assert cfg.evaluate_criteria == ("D", "GI", "VI", "c_alpha", "c_beta", "c_gamma")


@pytest.mark.parametrize("body,field", [
    ("[model]\nname = nope\n", "[model] name"),
    ("[model]\nresponse_space = 0.4, 0.1\n", "[model] response_space"),
    ("[solver]\ndelta = 2\n", "[solver]"),
    ("[solver]\nmax_iter = lots\n", "[solver] max_iter"),
    ("[sequence]\nfamily = harmonic\n", "[sequence]"),
    ("[evaluate]\npoints = 0.1, 0.2\nweights = 0.2, 0.2\n", "[evaluate]"),
    ("[criterion]\nkind = Q\n", "[criterion] kind"),
    ("[extras]\nx = 1\n", "[extras]"),
])
def test_config_errors_name_the_field(tmp_path, body, field):
    p = tmp_path / "c.ini"
    p.write_text(body)
    with pytest.raises(ConfigError) as exc:
        load_config(p).build_model()
    assert field in str(exc.value)


def test_space_mismatch_warns(tmp_path, caplog):
    p = tmp_path / "c.ini"
    p.write_text("[model]\ndose_space = 0, 20\n")
    load_config(p).build_model()
    assert "does not match" in caplog.text


def test_golden_file_parses():
    checks = load_golden()
    kinds = {c.kind for c in checks}
    assert kinds == {"design", "efficiency", "ratio"}
    d = next(c for c in checks if c.name == "d_opt")
    assert d.values["weights"] == pytest.approx([1 / 3] * 3)


def test_thread_count(monkeypatch):
    monkeypatch.setenv("OED_CALIB_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("OED_CALIB_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_count()
