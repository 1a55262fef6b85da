import csv
import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypsum import __version__, cli, summation
from hypsum.cli import RunConfig
from hypsum.errors import UsageError

from strategies import sets_s


def run(*argv):
    buf = io.StringIO()
    code = cli.main(list(argv), out=buf)
    return code, buf.getvalue()


def csv_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


def test_sum_tau_gcd():
    code, out = run("sum", "--formula", "tau_gcd", "--x", "1e6", "--output", "csv")
    assert code == 0
    (row,) = csv_rows(out)
    assert int(row["value"]) == summation.exact_sum("tau_gcd", 10**6)
    assert row["version"] == __version__ and row["error_bound"] == "0.0"


def test_sum_ratio_with_oracle():
    code, out = run("sum", "--formula", "ratio_hyp", "--x", "4", "--oracle", "--output", "csv")
    assert code == 0
    rows = csv_rows(out)
    assert [r["method"] for r in rows] == ["hyperbola", "oracle"]
    assert [float(r["value"]) for r in rows] == pytest.approx([25 / 6, 25 / 6], rel=1e-15)


def test_sum_at_one_is_f_of_one():
    code, out = run("sum", "--x", "1", "--output", "json")
    assert code == 0
    (row,) = json.loads(out)["rows"]
    assert row["value"] == 1 and row["spec"] == "id"


def test_sum_all_methods_agree():
    code, out = run("sum", "--formula", "log_lcm", "--x", "5000", "--method", "all", "--oracle", "--output", "csv")
    assert code == 0
    assert len(csv_rows(out)) == len(summation.methods_for("log_lcm")) + 1


def test_sum_mismatch_exits_3(monkeypatch):
    real = summation.exact_sum

    def broken(F, x, spec=None, store=None, method=None):
        v = real(F, x, spec, store, method)
        return v + 1 if method == "direct" else v

    monkeypatch.setattr(summation, "exact_sum", broken)
    code, _ = run("sum", "--formula", "tau_gcd", "--x", "100", "--method", "all")
    assert code == 3


def test_usage_and_resource_exit_codes():
    assert run("sum", "--formula", "no_such_formula", "--x", "10")[0] == 1
    assert run("sum", "--x", "0.5")[0] == 1
    assert run("frobnicate")[0] == 1
    assert run("sum")[0] == 1
    assert run("table")[0] == 1
    assert run("verify")[0] == 1
    assert run("sum", "--formula", "rect_gcd", "--x", "1e7")[0] == 2
    assert run("sum", "--formula", "tau_gcd", "--x", "1e4", "--method", "bogus")[0] == 1


def test_constants_published_decimals():
    code, out = run("constants", "--check-paper", "--output", "csv")
    assert code == 0
    assert "# result=pass" in out
    assert len(csv_rows(out)) == 6


def test_constants_published_decimals_mismatch(monkeypatch):
    from hypsum import constants

    monkeypatch.setitem(constants.PUBLISHED_DECIMALS, "C_log", 0.5)
    assert run("constants", "--check-paper")[0] == 3


def test_constants_both_methods_overlap():
    code, out = run("constants", "--name", "C_log", "--method", "both", "--output", "json")
    assert code == 0
    rows = json.loads(out)["rows"]
    assert len(rows) == 2
    (a, ea), (b, eb) = [(r["value"], float(r["error_bound"])) for r in rows]
    assert abs(float(a) - float(b)) <= ea + eb


def test_constants_hs():
    code, out = run("constants", "--name", "H_S", "--p", "2", "--S", "all", "--output", "json")
    assert code == 0
    (row,) = json.loads(out)["rows"]
    assert float(row["value"]) == pytest.approx(1 / 3, rel=1e-15)
    assert run("constants", "--name", "H_S")[0] == 1
    assert run("constants", "--name", "nope")[0] == 1


def test_constants_for_formula():
    code, out = run("constants", "--formula", "omega_gcd", "--output", "csv")
    assert code == 0
    assert all(r["name"].startswith("omega_gcd.") for r in csv_rows(out))


def test_verify_csv_has_sup_normalized():
    code, out = run("verify", "--formula", "omega_gcd", "--grid", "1e3:1e5:6", "--output", "csv")
    assert code == 0
    assert "# sup_normalized=" in out
    assert "x,exact,main,main_bound,residual,envelope,normalized,version" in out


def test_verify_fit_reports_stability():
    code, out = run("verify", "--formula", "gcd_hyp_id", "--fit", "--grid", "1e3:1e6:8", "--output", "json")
    assert code == 0
    meta = json.loads(out)["metadata"]
    assert {r["parameter"] for r in meta["fit"]} == {"c1", "c2"}
    assert "stable" in meta and meta["stability_tolerance"] == 0.05


def test_verify_rect_ratio():
    code, out = run("verify", "--formula", "rect_ratio", "--grid", "1e2:1e5:8", "--output", "json")
    assert code == 0
    meta = json.loads(out)["metadata"]
    assert meta["envelope"] == "log^2" and meta["points"] == 8


def test_verify_without_fit_on_fit_formula_is_a_state_error():
    assert run("verify", "--formula", "tau_lcm", "--grid", "1e3:1e5:6")[0] == 1


def test_table_command(tmp_path):
    code, out = run("table", "--name", "tau", "--n-max", "100", "--show", "6", "--output", "csv", "--cache-dir", str(tmp_path))
    assert code == 0
    assert [int(r["value"]) for r in csv_rows(out)] == [1, 2, 2, 3, 2, 4]
    assert "# summatory=482" in out
    code, out = run("table", "--spec", "log", "--n-max", "10", "--output", "json")
    assert code == 0 and json.loads(out)["metadata"]["n_max"] == 10
    assert run("table", "--name", "sigma", "--n-max", "10")[0] == 1


def test_identical_invocations_are_byte_identical(tmp_path):
    argv = ["verify", "--formula", "omega_gcd,log_gcd", "--grid", "1e3:1e5:6", "--output", "csv"]
    first = run(*argv, "--cache-dir", str(tmp_path))
    second = run(*argv, "--cache-dir", str(tmp_path))
    assert first == second and first[0] == 0
    for fmt in ("table", "json"):
        a = run("sum", "--formula", "ratio_hyp", "--x", "1e5", "--output", fmt)
        assert a == run("sum", "--formula", "ratio_hyp", "--x", "1e5", "--output", fmt)


def test_export(tmp_path):
    code, out = run("export", "--formula", "omega_gcd,gcd_hyp_id", "--grid", "1e3:1e5:6", "--out", str(tmp_path), "--output", "csv")
    assert code == 0
    assert (tmp_path / "omega_gcd.csv").read_text().startswith("x,exact,main")
    assert len(csv_rows((tmp_path / "gcd_hyp_id.csv").read_text())) == 6
    code, _ = run("export", "--formula", "omega_gcd", "--grid", "1e3:1e5:6", "--out", str(tmp_path), "--output", "json")
    assert json.loads((tmp_path / "omega_gcd.json").read_text())["metadata"]["formula"] == "omega_gcd"


def test_config_file_and_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nformulas=tau_gcd\noutput=json\n")
    code, out = run("sum", "--config", str(cfg), "--x", "100")
    assert code == 0 and json.loads(out)["rows"][0]["formula"] == "tau_gcd"
    # flags win over the file
    code, out = run("sum", "--config", str(cfg), "--x", "100", "--formula", "omega_gcd", "--output", "csv")
    assert code == 0 and csv_rows(out)[0]["formula"] == "omega_gcd"
    cfg.write_text("colour=blue\n")
    assert run("sum", "--config", str(cfg), "--x", "100")[0] == 1
    assert run("sum", "--config", str(tmp_path / "missing.cfg"), "--x", "100")[0] == 1
    monkeypatch.setenv("HYPSUM_CACHE", str(tmp_path / "cache"))
    assert run("table", "--name", "mu", "--n-max", "50")[0] == 0
    assert any((tmp_path / "cache").iterdir())


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig(S="0,1")
    with pytest.raises(UsageError):
        RunConfig(n_max=0)
    with pytest.raises(UsageError):
        RunConfig(n_max="1.5")
    with pytest.raises(UsageError):
        RunConfig(eta=-1)
    with pytest.raises(UsageError):
        RunConfig(output="xml")
    with pytest.raises(UsageError):
        RunConfig(S="1", beta=0.5)
    assert RunConfig(S="1,2", eta=1).function_spec() is not None
    assert RunConfig(beta=0.5, delta=1).function_spec() is not None
    assert run("sum", "--x", "10", "--S", "0,1")[0] == 1


@given(
    st.one_of(st.none(), st.integers(1, 10**8)),
    st.one_of(st.none(), st.sampled_from(["1e3:1e7:12", "100:1000:5", "10,20,30"])),
    st.lists(st.sampled_from(["tau_gcd", "omega_lcm", "ratio_hyp", "rect_gcd"]), max_size=3, unique=True),
    st.one_of(st.none(), sets_s()),
    st.one_of(st.none(), st.floats(0, 5)),
    st.floats(0.01, 2.0),
    st.sampled_from(cli.OUTPUTS),
)
def test_run_config_text_round_trip(n_max, grid, forms, S, eta, lambda_c, output):
    cfg = RunConfig(
        n_max=n_max, grid=grid, formulas=tuple(forms), S=S and str(S), eta=eta, lambda_c=lambda_c, output=output
    )
    text = cfg.to_text()
    again = RunConfig.from_text(text)
    assert again == cfg and again.to_text() == text
