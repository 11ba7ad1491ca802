import csv
import hashlib
import json
import math

import numpy as np
import pytest

from wavevol.cli import (
    PipelineConfig,
    build_parser,
    main,
    measures_header,
    read_measures,
)
from wavevol.errors import ConfigError

SIM = {"N": 78, "days": 130, "eta": 1e-4, "jump_intensity": 0.5, "jump_std": 0.004,
       "vol": {"kind": "stochastic", "sigma": 0.006, "kappa": 0.1, "vol_of_vol": 0.25}}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    cfg = _write(root / "sim.json", SIM)
    assert main(["simulate", "--config", cfg, "--seed", "3", "-o", str(root)]) == 0
    assert main(["estimate", str(root / "sessions.csv"), "-o", str(root / "measures.csv")]) == 0
    return root


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(["fit", "r.csv", "m.csv", "-o", "f.json"])
    assert args.model == "realized_garch" and args.measure == "jwtsrv" and args.min_obs == 100


def test_simulate_outputs(simulated):
    truth = _rows(simulated / "truth.csv")
    returns = _rows(simulated / "returns.csv")
    assert len(truth) == len(returns) == 130
    assert [r["date"] for r in truth] == [r["date"] for r in returns]
    sessions = _rows(simulated / "sessions.csv")
    assert len(sessions) == 130 * 79
    # the daily return is the sum of the intraday grid returns
    first = [float(r["return"]) for r in sessions[1:79]]
    assert sum(first) == pytest.approx(float(returns[0]["return"]), abs=1e-12)


def test_simulate_is_seeded(simulated, tmp_path):
    cfg = _write(tmp_path / "sim.json", SIM)
    main(["simulate", "--config", cfg, "--seed", "3", "-o", str(tmp_path / "a")])
    main(["simulate", "--config", cfg, "--seed", "4", "-o", str(tmp_path / "b")])
    same = (tmp_path / "a" / "sessions.csv").read_bytes() == (simulated / "sessions.csv").read_bytes()
    assert same
    assert (tmp_path / "b" / "sessions.csv").read_bytes() != (simulated / "sessions.csv").read_bytes()


def test_estimate_columns(simulated, tmp_path):
    rows = _rows(simulated / "measures.csv")
    assert list(rows[0]) == measures_header(5)
    assert all(int(r["n"]) == 78 for r in rows)
    for r in rows[:20]:
        comps = sum(float(r[f"jw_c{j}"]) for j in range(1, 6))
        assert comps == pytest.approx(float(r["jwtsrv"]), rel=1e-12, abs=1e-300)
    back = read_measures(simulated / "measures.csv")
    assert back[0].rv == float(rows[0]["rv"])

    out = tmp_path / "ann.csv"
    assert main(["estimate", str(simulated / "sessions.csv"), "--annualize", "-o", str(out)]) == 0
    ann = _rows(out)
    assert float(ann[0]["rv"]) == pytest.approx(math.sqrt(252 * float(rows[0]["rv"])))


def test_estimate_config(simulated, tmp_path):
    cfg = _write(tmp_path / "est.json", {"levels": 3, "jump_wavelet": "d4"})
    out = tmp_path / "m.csv"
    assert main(["estimate", str(simulated / "sessions.csv"), "--config", cfg, "-o", str(out)]) == 0
    assert list(_rows(out)[0]) == measures_header(4)
    bad = _write(tmp_path / "bad.json", {"levels": 3, "wavelet_colour": "red"})
    assert main(["estimate", str(simulated / "sessions.csv"), "--config", bad, "-o", str(out)]) == 2


def test_jumps(simulated, tmp_path):
    out = tmp_path / "jumps.csv"
    assert main(["jumps", str(simulated / "sessions.csv"), "-o", str(out)]) == 0
    rows = _rows(out)
    assert rows and set(rows[0]) == {"date", "k", "jump_size", "threshold", "d_t"}
    assert all(abs(float(r["jump_size"])) > 0 for r in rows)


def test_fit_and_evaluate(simulated, tmp_path):
    fit_path, states = tmp_path / "fit.json", tmp_path / "states.csv"
    args = ["fit", str(simulated / "returns.csv"), str(simulated / "measures.csv"), "--measure", "rv",
            "-o", str(fit_path), "--states", str(states)]
    assert main(args) == 0
    art = json.loads(fit_path.read_text())
    assert art["spec"]["family"] == "realized_garch" and art["n_obs"] == 130
    st = _rows(states)
    assert len(st) == 130 and set(st[0]) == {"date", "h", "z", "u"}

    dates = [r["date"] for r in _rows(simulated / "returns.csv")]
    report, fc = tmp_path / "report.json", tmp_path / "fc.csv"
    args = ["evaluate", str(fit_path), str(simulated / "returns.csv"), str(simulated / "measures.csv"),
            "--split", dates[105], "--min-obs", "100", "-o", str(report), "--forecasts", str(fc)]
    assert main(args) == 0
    rep = json.loads(report.read_text())
    assert rep["n_obs"] == 25 and rep["scheme"] == "fixed-params"
    assert {"alpha_mz", "beta_mz", "r2_mz", "hmse", "qlike"} <= set(rep)
    rows = _rows(fc)
    assert rows[0]["date"] == dates[105]
    assert float(rows[0]["vol_forecast"]) == pytest.approx(math.sqrt(float(rows[0]["h_forecast"])))
    assert float(rows[0]["h_forecast"]) == pytest.approx(float(st[105]["h"]), rel=1e-12)


def test_fit_exit_codes(simulated, tmp_path):
    out = str(tmp_path / "f.json")
    r, m = str(simulated / "returns.csv"), str(simulated / "measures.csv")
    assert main(["fit", r, m, "--min-obs", "500", "-o", out]) == 3
    assert main(["fit", r, str(tmp_path / "missing.csv"), "-o", out]) == 3
    short = tmp_path / "short.csv"
    short.write_text("\n".join((simulated / "returns.csv").read_text().splitlines()[:50]) + "\n")
    assert main(["fit", str(short), m, "-o", out]) == 3
    assert main(["fit", r, m, "--model", "realized_jgarch_scale", "-o", out]) == 2


def test_evaluate_rejects_non_artifact(simulated, tmp_path):
    bogus = _write(tmp_path / "x.json", {"hello": 1})
    args = ["evaluate", bogus, str(simulated / "returns.csv"), str(simulated / "measures.csv"),
            "--split", "2020-06-01", "-o", str(tmp_path / "r.json")]
    assert main(args) == 2


def _ticks(path):
    rng = np.random.default_rng(0)
    start = 1614639600000  # 2021-03-01 23:00 UTC, inside the Chicago session
    ts = start + np.sort(rng.integers(0, 3 * 86_400_000, 30_000))
    px = 1.2 * np.exp(np.cumsum(rng.normal(0, 5e-5, 30_000)))
    path.write_text("timestamp_ms,price\n" + "".join(f"{t},{float(p)!r}\n" for t, p in zip(ts, px)))


def test_ingest(tmp_path):
    _ticks(tmp_path / "ticks.csv")
    assert main(["ingest", str(tmp_path / "ticks.csv"), "--instrument", "EUR", "-o", str(tmp_path / "out")]) == 0
    returns = _rows(tmp_path / "out" / "returns.csv")
    assert 2 <= len(returns) <= 4
    sessions = _rows(tmp_path / "out" / "sessions.csv")
    assert {r["date"] for r in sessions} == {r["date"] for r in returns}


def test_ingest_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("when,price\n1,2\n")
    assert main(["ingest", str(bad), "-o", str(tmp_path / "o")]) == 3
    cal = _write(tmp_path / "cal.json", {"timezone": "Nowhere/City"})
    _ticks(tmp_path / "ticks.csv")
    assert main(["ingest", str(tmp_path / "ticks.csv"), "--config", cal, "-o", str(tmp_path / "o")]) == 2


RUN = {
    "mode": "simulate",
    "output": "out",
    "seed": 7,
    "simulation": {"N": 78, "days": 50, "eta": 2e-4, "jump_intensity": 0.5, "jump_std": 0.004,
                   "vol": {"kind": "stochastic", "sigma": 0.006, "kappa": 0.1, "vol_of_vol": 0.25}},
    "models": [{"family": "garch"}, {"family": "realized_garch", "measure": "rv"},
               {"family": "realized_jgarch", "measure": "jwtsrv"}],
    "evaluation": {"split_fraction": 0.6, "min_in_sample": 30, "min_out_of_sample": 20},
}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = _write(root / "cfg.json", RUN)
    assert main(["run", "--config", cfg, "-o", str(root / "a")]) == 0
    return root


def test_run_tree(pipeline):
    a = pipeline / "a"
    for name in ("sessions/sessions.csv", "sessions/returns.csv", "sessions/truth.csv", "measures.csv",
                 "plotdata/components.csv", "plotdata/jumps.csv", "report.json", "manifest.json"):
        assert (a / name).is_file(), name
    for label in ("garch", "realized_garch_rv", "realized_jgarch_jwtsrv"):
        assert (a / "fits" / f"{label}.json").is_file()
        assert (a / "forecasts" / f"{label}.csv").is_file()
    rep = json.loads((a / "report.json").read_text())
    assert rep["n_days"] == 50 and rep["n_in_sample"] == 30
    assert set(rep["models"]) == {"garch", "realized_garch_rv", "realized_jgarch_jwtsrv"}
    assert sorted(rep["ranking"]) == sorted(rep["models"])


def test_run_manifest(pipeline):
    a = pipeline / "a"
    man = json.loads((a / "manifest.json").read_text())
    assert len(man["config_sha256"]) == 64
    for rel, digest in man["files"].items():
        assert hashlib.sha256((a / rel).read_bytes()).hexdigest() == digest
    assert "manifest.json" not in man["files"]


def test_plotdata_components_add_up(pipeline):
    rows = _rows(pipeline / "a" / "plotdata" / "components.csv")
    measures = _rows(pipeline / "a" / "measures.csv")
    assert len(rows) == 50
    for r, m in zip(rows, measures):
        # annualized variance units
        assert float(r["total_var"]) == pytest.approx(252 * float(m["jwtsrv"]), rel=1e-12)
        parts = sum(float(r[f"var_c{j}"]) for j in range(1, 6))
        assert parts == pytest.approx(float(r["total_var"]), rel=1e-12, abs=1e-300)
        assert float(r["total_vol"]) == pytest.approx(math.sqrt(float(r["total_var"])))


def test_run_is_byte_identical(pipeline):
    cfg = str(pipeline / "cfg.json")
    assert main(["run", "--config", cfg, "-o", str(pipeline / "b")]) == 0
    a, b = pipeline / "a", pipeline / "b"
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_run_seed_changes_output(pipeline):
    cfg = str(pipeline / "cfg.json")
    assert main(["run", "--config", cfg, "--seed", "8", "-o", str(pipeline / "c")]) == 0
    a = json.loads((pipeline / "a" / "manifest.json").read_text())
    c = json.loads((pipeline / "c" / "manifest.json").read_text())
    assert a["config_sha256"] != c["config_sha256"]


@pytest.mark.parametrize("change", [{"models": []}, {"mode": "replay"}, {"models": [{"family": "garch"}] * 2},
                                    {"evaluation": {"scheme": "weekly"}}, {"colour": 1}])
def test_run_config_errors(tmp_path, change):
    cfg = _write(tmp_path / "cfg.json", {**RUN, **change})
    assert main(["run", "--config", cfg, "-o", str(tmp_path / "o")]) == 2


def test_run_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


def test_run_stage_failure_reported(tmp_path, capsys):
    cfg = _write(tmp_path / "cfg.json", {**RUN, "mode": "ticks", "ticks": str(tmp_path / "missing.csv")})
    code = main(["run", "--config", cfg, "-o", str(tmp_path / "o")])
    assert code in (2, 3)
    assert "wavevol run" in capsys.readouterr().err


def test_pipeline_config_digest_ignores_output(tmp_path):
    a = PipelineConfig.from_dict(RUN, base=tmp_path, output="x")
    b = PipelineConfig.from_dict(RUN, base=tmp_path, output="y")
    assert a.digest() == b.digest()
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({**RUN, "models": []}, base=tmp_path)


def test_simulate_with_calendar(tmp_path):
    cfg = _write(tmp_path / "sim.json", {"N": 50, "days": 3, "start_date": "2021-03-01",
                                         "calendar": {"timezone": "Europe/London", "open": "08:00", "close": "16:30"}})
    assert main(["simulate", "--config", cfg, "-o", str(tmp_path)]) == 0
    assert [r["date"] for r in _rows(tmp_path / "returns.csv")] == ["2021-03-01", "2021-03-02", "2021-03-03"]
