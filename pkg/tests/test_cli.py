import io
import json

import pandas as pd
import pytest

from app.cli import build_parser, main, q_grid
from app.core.errors import InvalidConfig, VerificationFailed
from tests.conftest import CONFIG_DIR

BASELINE = str(CONFIG_DIR / "baseline.cfg")
STRONG = str(CONFIG_DIR / "strong-discount.cfg")


@pytest.fixture
def weak_config(tmp_path):
    path = tmp_path / "weak.cfg"
    path.write_text(
        "mu = 0.2\nsigma = 0.6\nbeta = 0.01\nk = 0.85\nK1 = 4\nK2 = 7\nQ = 4\n"
        "g.kind = piecewise_linear\ng.h = 0.08\ng.p = 0.001\n"
    )
    return str(path)


def test_q_grid_is_inclusive():
    assert q_grid(1.0, 3.0, 0.5) == [1.0, 1.5, 2.0, 2.5, 3.0]
    with pytest.raises(InvalidConfig):
        q_grid(1.0, 3.0, 0.0)
    with pytest.raises(InvalidConfig):
        q_grid(3.0, 1.0, 1.0)


def test_solve_prints_regime_report(capsys):
    assert main(["solve", "--config", BASELINE]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["regime"] == "S1PlusGeneralized"
    assert report["Q"] == 4.0
    assert report["s_bar"] == pytest.approx(2.5402, abs=2e-3)


def test_solve_as_csv_row(capsys):
    assert main(["solve", "--config", BASELINE, "--q", "1", "--format", "csv"]) == 0
    frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert len(frame) == 1
    assert pd.isna(frame.loc[0, "Sbar"])


def test_table_writes_published_columns(tmp_path):
    out = tmp_path / "table.csv"
    code = main(["table", "--config", BASELINE, "--q-min", "3", "--q-max", "5", "--q-step", "1",
                 "--output", str(out)])
    assert code == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["Q", "s1", "S1", "A1*", "s2", "S2", "A2*", "Sbar", "s_low", "Xi"]
    assert list(frame["Q"]) == [3.0, 4.0, 5.0]
    assert frame.loc[1, "s_low"] == pytest.approx(-5.2712, abs=2e-3)
    assert frame.loc[2, "Xi"] == pytest.approx(0.3801, abs=5e-3)


def test_compare_layouts(capsys):
    assert main(["compare", "--config", BASELINE, "--x-min", "-8", "--x-max", "3", "--points", "12"]) == 0
    long = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert list(long.columns) == ["x", "cost", "policy_tag"]
    assert set(long["policy_tag"]) == {"band1", "band2", "generalized"}
    assert len(long) == 36

    assert main(["compare", "--config", BASELINE, "--x-min", "-8", "--x-max", "3", "--points", "12",
                 "--layout", "wide"]) == 0
    wide = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert list(wide.columns) == ["x", "band1", "band2", "generalized", "best"]


def test_verify_exit_codes(capsys):
    assert main(["verify", "--config", BASELINE, "--q", "1", "--check", "hjb"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["passed"] is True

    assert main(["verify", "--config", BASELINE, "--q", "3", "--check", "hjb"]) == 4
    summary = json.loads(capsys.readouterr().out)
    assert summary["passed"] is False

    assert main(["verify", "--config", BASELINE, "--check", "dominance"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert [c["check"] for c in summary["checks"]] == ["dominance[V1<=band1]"]


def test_verify_failure_names_failed_checks(capsys):
    args = build_parser().parse_args(["verify", "--config", BASELINE, "--q", "3", "--check", "hjb"])
    with pytest.raises(VerificationFailed) as excinfo:
        args.func(args)
    assert "hjb[DC[generalized]]" in excinfo.value.failed_checks
    assert all(name.startswith("hjb[") for name in excinfo.value.failed_checks)
    assert excinfo.value.exit_code == 4


def test_invalid_inputs_exit_with_config_error(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["table", "--config", BASELINE, "--q-min", "1", "--q-max", "2", "--q-step", "0"]) == 1
    assert main(["compare", "--config", BASELINE, "--x-min", "2", "--x-max", "1"]) == 1
    assert "error:" in capsys.readouterr().err


def test_validation_failure_exits_with_2(weak_config, capsys):
    assert main(["validate", "--config", weak_config]) == 2
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] is False
    assert main(["solve", "--config", weak_config]) == 2


def test_generalized_policy_needs_generalized_regime():
    code = main(["simulate", "--config", STRONG, "--policy-config", BASELINE, "--q", "1",
                 "--policy", "generalized", "--paths", "4", "--dt", "0.01", "--horizon", "0.1"])
    assert code == 3


def test_simulate_reports_estimate_and_closed_form(capsys):
    code = main(["simulate", "--config", STRONG, "--policy-config", BASELINE, "--policy", "band1",
                 "--paths", "20", "--dt", "0.01", "--horizon", "1", "--x0", "-1"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["policy"]["kind"] == "band"
    assert payload["x0"] == -1.0
    assert payload["estimate"]["n_paths"] == 20
    assert payload["closed_form"] > 0


def test_explicit_band_must_be_ordered():
    code = main(["simulate", "--config", STRONG, "--s", "1", "--S", "0", "--paths", "4"])
    assert code == 1
