import json
from datetime import date
from pathlib import Path

import pandas as pd
import pytest

from gridprice import cli, market_data, pipeline
from gridprice.synthetic import synthetic_hourly, write_raw_day

SMALL = dict(grid_points=25, mc_draws=50)


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("inputs")
    for iso, seed in (("CAISO", 1), ("PJM", 2)):
        market_data.write_hourly_csv(synthetic_hourly(iso, days=120, seed=seed), d / f"{iso}.csv")
    return d


def _config(inputs, out, isos="CAISO"):
    return pipeline.RunConfig(isos=isos, input_dir=str(inputs), output_dir=str(out), **SMALL)


def _tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != "manifest.json"}


def test_stage_isolation(tmp_path, inputs):
    bad = tmp_path / "in"
    bad.mkdir()
    (bad / "CAISO.csv").write_bytes((inputs / "CAISO.csv").read_bytes())
    (bad / "PJM.csv").write_text("timestamp,price_usd_mwh\nnot-a-time,1\n")
    manifest = pipeline.run_pipeline(pipeline.RunConfig(isos="CAISO,PJM", input_dir=str(bad),
                                                        output_dir=str(tmp_path / "out"), **SMALL))
    by = {e["iso"]: e for e in manifest["isos"]}
    assert by["CAISO"]["status"] == "ok"
    assert by["PJM"]["status"] == "failed" and by["PJM"]["failed_stage"] == "ingest"
    assert manifest["status"] == "partial_failure"
    assert pipeline.exit_code(manifest) == 2
    assert (tmp_path / "out" / "CAISO" / "skewt" / "coefficients.csv").exists()


def test_outputs_schema_and_counts(tmp_path, inputs):
    out = tmp_path / "out"
    manifest = pipeline.run_pipeline(_config(inputs, out))
    assert pipeline.exit_code(manifest) == 0
    base = out / "CAISO"
    for name, n in manifest["isos"][0]["rows"].items():
        assert len((base / name).read_text().splitlines()) - 1 == n
    files = {
        "hourly.csv": "hourly", "residuals.csv": "residuals", "volatility.csv": "volatility",
        "detrend_coefficients.csv": "detrend_coefficients", "qreg_price/curves.csv": "qreg_curves",
        "qreg_volatility/curves.csv": "qreg_curves", "skewt/coefficients.csv": "skewt_coefficients",
        "skewt/skewness_curve.csv": "skewt_skewness", "skewt/quantile_curves.csv": "skewt_quantiles",
        "skewt/quantile_differences.csv": "skewt_differences", "summary.csv": "summary",
        "negative_prices.csv": "negative_prices",
    }
    for f, schema in files.items():
        header = (base / f).read_text().splitlines()[0].split(",")
        assert header == list(pipeline.SCHEMAS[schema]), f
    curves = pd.read_csv(base / "qreg_price" / "curves.csv")
    assert len(curves) == 25 * 4
    assert sorted(curves["tau"].unique()) == [0.25, 0.5, 0.75, 0.9]
    summary = pd.read_csv(base / "summary.csv")
    assert list(summary["variable"]) == ["detrended_price", "price_volatility", "vre_pct"]
    assert json.loads((out / "manifest.json").read_text())["config_sha256"] == manifest["config_sha256"]


def test_determinism(tmp_path, inputs):
    a, b = tmp_path / "a", tmp_path / "b"
    pipeline.run_pipeline(_config(inputs, a))
    pipeline.run_pipeline(_config(inputs, b))
    assert _tree(a) == _tree(b)
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    ma.pop("created_at"), mb.pop("created_at")
    ma["config"].pop("output_dir"), mb["config"].pop("output_dir")
    ma.pop("config_sha256"), mb.pop("config_sha256")
    assert ma == mb


def test_config_file_and_cli_run(tmp_path, inputs):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# test run\nisos = CAISO\ninput_dir = {inputs}\ngrid_points = 25\nmc_draws = 50\n"
                   f"lambda = 0.9\nuntrimmed_volatility_summary = true\n")
    code = cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "5"])
    assert code == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["config"]["lam"] == 0.9 and m["config"]["seed"] == 5
    summary = pd.read_csv(tmp_path / "o" / "CAISO" / "summary.csv")
    assert "price_volatility_untrimmed" in set(summary["variable"])


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(ValueError):
        pipeline.RunConfig.from_file(cfg)


def test_cache_env_override(monkeypatch):
    monkeypatch.setenv("GRIDPRICE_CACHE", "/tmp/somewhere")
    assert pipeline.RunConfig(cache_dir="/elsewhere").cache_dir == "/tmp/somewhere"


def test_usage_errors():
    assert cli.main([]) == 1
    assert cli.main(["volatility", "--in", "x.csv"]) == 1  # missing --out
    assert cli.main(["bogus"]) == 1


def test_subcommands_end_to_end(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    for i, day in enumerate((date(2021, 3, 1), date(2021, 3, 2))):
        write_raw_day(cache, "PJM", day, seed=i)
    monkeypatch.setenv("GRIDPRICE_CACHE", str(cache))
    hourly = tmp_path / "hourly.csv"
    assert cli.main(["ingest", "--iso", "PJM", "--from", "2021-03-01", "--to", "2021-03-02",
                     "--out", str(hourly)]) == 0
    assert len(market_data.read_hourly_csv(hourly)) == 48

    big = tmp_path / "big.csv"
    market_data.write_hourly_csv(synthetic_hourly("PJM", days=90, seed=4), big)
    resid = tmp_path / "resid.csv"
    assert cli.main(["detrend", "--in", str(big), "--iso", "PJM", "--out-residuals", str(resid),
                     "--out-coefficients", str(tmp_path / "coef.csv")]) == 0
    vol = tmp_path / "vol.csv"
    assert cli.main(["volatility", "--in", str(resid), "--out", str(vol)]) == 0
    assert cli.main(["qreg", "--in", str(vol), "--target", "volatility", "--tau", "0.5,0.9",
                     "--grid-points", "20", "--out", str(tmp_path / "q")]) == 0
    assert len(pd.read_csv(tmp_path / "q" / "curves.csv")) == 40
    assert cli.main(["skewt", "--in", str(vol), "--iso", "PJM", "--grid-points", "20",
                     "--mc-draws", "30", "--out", str(tmp_path / "s")]) == 0
    assert pd.read_csv(tmp_path / "s" / "coefficients.csv")["iso"].eq("PJM").all()
    assert cli.main(["report", "--in", str(vol), "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "checks.json").exists()


def test_failure_exit_code(tmp_path):
    assert cli.main(["volatility", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "v.csv")]) == 2
