import numpy as np
import pytest
import yaml

from conftest import CASES, DESK, base_doc, case_path
from flexgauge.casefile import CaseParseError, case_from_dict, case_to_dict, load_case, ptdf
from flexgauge.compact import assemble
from flexgauge.model import validate_case


def test_bundled_two_bus_shape(two_bus):
    assert (len(two_bus.buses), len(two_bus.generators), len(two_bus.lines)) == (2, 2, 1)
    assert validate_case(two_bus) == []


def test_fraction_gives_deviation():
    doc = base_doc(loads=(100.0,))
    doc["uncertainty"]["d_hat_fraction"] = 0.15
    case = case_from_dict(doc)
    assert case.buses[0].d_hat == pytest.approx(15.0)
    assert case.uncertainty.d_hat[0] == pytest.approx(15.0)


def test_explicit_deviation_wins():
    doc = base_doc(loads=(100.0,))
    doc["buses"][0]["d_hat"] = 7.0
    assert case_from_dict(doc).buses[0].d_hat == 7.0


def test_malformed_shift_factor_row_names_line(tmp_path):
    doc = base_doc(loads=(50.0, 60.0), n_gen=2)
    doc["lines"] = [{"id": "tie7", "capacity": 30, "shift_factors": [0.0, -1.0, 0.5]}]
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    with pytest.raises(CaseParseError, match=r"line tie7 \(line \d+\).*shift-factor row"):
        load_case(path)


def test_shift_factor_unknown_bus():
    doc = base_doc(loads=(50.0, 60.0), n_gen=2)
    doc["lines"] = [{"id": "l1", "capacity": 30, "shift_factors": {"b1": 0.0, "bx": -1.0}}]
    with pytest.raises(CaseParseError, match="line l1"):
        case_from_dict(doc)


def test_missing_field_reported(tmp_path):
    doc = base_doc()
    del doc["generators"][0]["p_max"]
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    with pytest.raises(CaseParseError, match="p_max"):
        load_case(path)


def test_not_a_mapping(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("- just\n- a list\n")
    with pytest.raises(CaseParseError):
        load_case(path)


def test_missing_file():
    with pytest.raises(CaseParseError):
        load_case(CASES / "nope.yaml")


def test_ptdf_three_bus_ring():
    sf = ptdf(["b1", "b2", "b3"], [("l1", "b1", "b2", 0.1), ("l2", "b2", "b3", 0.1),
                                   ("l3", "b1", "b3", 0.1)], "b1")
    # injection at b2 withdrawn at b1: two thirds flow directly back over l1
    assert sf["l1"]["b2"] == pytest.approx(-2 / 3)
    assert sf["l3"]["b2"] == pytest.approx(-1 / 3)
    assert all(row["b1"] == 0.0 for row in sf.values())


def test_ptdf_disconnected():
    with pytest.raises(CaseParseError, match="disconnected"):
        ptdf(["a", "b", "c"], [("l", "a", "b", 0.1)], "a")


def test_nominal_scale_budget(two_bus):
    from flexgauge.benders import nominal_dispatch_cost
    assert two_bus.budget == pytest.approx(1.05 * nominal_dispatch_cost(two_bus))


def test_per_interval_frequency_bounds():
    doc = base_doc(T=3)
    doc["agc"]["freq_max"] = [0.1, 0.2, 0.3]
    case = case_from_dict(doc)
    assert case.agc.freq_max.tolist() == [0.1, 0.2, 0.3]
    doc["agc"]["freq_max"] = [0.1, 0.2]
    with pytest.raises(CaseParseError):
        case_from_dict(doc)


def test_raw_model_round_trip(two_bus):
    doc = case_to_dict(two_bus)
    again = case_from_dict(doc)
    assert again.budget == pytest.approx(two_bus.budget)
    assert np.allclose(again.agc.alpha, two_bus.agc.alpha)
    assert np.allclose(again.agc.k_gain, two_bus.agc.k_gain)
    assert [ln.shift_factors for ln in again.lines] == [ln.shift_factors for ln in two_bus.lines]


def test_raw_model_missing_coefficient():
    doc = case_to_dict(load_case(case_path("two_bus.yaml")))
    del doc["agc"]["rho"]
    with pytest.raises(CaseParseError, match="rho"):
        case_from_dict(doc)


def test_default_horizon_is_ten():
    doc = base_doc()
    del doc["agc"]["n_sub_intervals"]
    assert case_from_dict(doc).agc.n_sub_intervals == 10


@pytest.mark.parametrize("path", DESK + [case_path("two_bus.yaml"), case_path("budget_sweep.yaml"),
                                         case_path("ramp_line_sweep.yaml")], ids=lambda p: p.stem)
def test_bundled_cases_load_and_assemble(path):
    case = load_case(path)
    assert validate_case(case) == []
    assert not case.agc.warnings
    assemble(case)


def test_synthetic_fixture_shape():
    case = load_case(case_path("synthetic_118.yaml"))
    assert len(case.buses) == 118 and len(case.generators) == 30
    share = sum(b.d_bar for b in case.buses) / sum(g.p_max for g in case.generators)
    assert share == pytest.approx(0.863, abs=1e-3)
    assert "non-authoritative" in case.name
