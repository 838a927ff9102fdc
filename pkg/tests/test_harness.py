import json
import os

import pytest
import yaml

from htbnp import NumericalFailure
from htbnp.exceptions import ConfigError
from htbnp.harness import cli, config
from htbnp.harness.artifacts import SCHEMAS, RunWriter, read_table, sha256_file
from htbnp.harness.config import DEFAULTS, EXPERIMENTS, load_config, validate
from htbnp.harness.experiments import pool_size
from htbnp.harness.plotting import PlotError, emit_plot

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "schemas.json")

# small configs that exercise every experiment in a few seconds
SMALL = {
    "fig1_posterior_means": {"n_points": 11, "sigmas": [1e-3, 1e-5]},
    "inverse_regression": {"n_grid": [1e3, 1e9], "truncation": 40, "n_points": 20,
                           "sampler": {"kind": "RandomWalk", "n_draws": 600, "burn_in": 200}},
    "dj94_denoise": {"signals": ["HeaviSine"], "length": 256, "coarse_level": 3,
                     "mala": {"n_draws": 400, "burn_in": 200, "thin": 10},
                     "mwg": {"n_draws": 400, "burn_in": 200, "thin": 10}},
    "density_estimation": {"n_grid": [100], "max_level": 4, "n_points": 32,
                           "sampler": {"n_draws": 200, "burn_in": 100, "thin": 5}},
    "classification": {"n_grid": [100], "max_level": 4, "n_points": 32,
                       "sampler": {"n_draws": 200, "burn_in": 100, "thin": 5}},
    "rate_sweep": {"n_grid": [1e2, 1e3, 1e4], "replicates": 2, "truncation": 100},
    "prior_mass": {"n_grid": [50, 100], "truncation": 30, "n_mc": 2000, "calibration_n_mc": 2000},
    "theory_suite": {"bvm_draws": 500},
}


def _write_config(tmp_path, experiment, **extra):
    path = tmp_path / f"{experiment}.yaml"
    path.write_text(yaml.safe_dump({"experiment": experiment, **SMALL[experiment], **extra}))
    return str(path)


def _run(tmp_path, experiment, out="out", **extra):
    cfg = _write_config(tmp_path, experiment, **extra)
    out_dir = str(tmp_path / out)
    assert cli.main([experiment, "--config", cfg, "--out", out_dir]) == 0
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return out_dir, json.load(fh)


# configuration

def test_defaults_cover_every_experiment():
    assert set(DEFAULTS) == set(EXPERIMENTS)
    for exp in EXPERIMENTS:
        cfg = validate({"experiment": exp})
        assert cfg["seed"] == 0 and cfg["paper_scale"] is False


@pytest.mark.parametrize("raw, field", [
    ({}, "experiment"),
    ({"experiment": "nope"}, "experiment"),
    ({"experiment": "rate_sweep", "replicates": 0}, "replicates"),
    ({"experiment": "rate_sweep", "bogus": 1}, "bogus"),
    ({"experiment": "dj94_denoise", "length": 1000}, "length"),
    ({"experiment": "dj94_denoise", "mala": {"n_draws": 10, "burn_in": 10}}, "mala.burn_in"),
    ({"experiment": "density_estimation", "n_grid": [100, 10]}, "n_grid"),
    ({"experiment": "fig1_posterior_means", "seed": -1}, "seed"),
])
def test_invalid_configs_name_the_field(raw, field):
    with pytest.raises(ConfigError) as info:
        validate(raw)
    assert info.value.path == field


def test_paper_scale_merges_published_lengths():
    cfg = validate({"experiment": "dj94_denoise", "paper_scale": True, "mala": {"step": 0.2}})
    assert cfg["mala"]["n_draws"] == 120000 and cfg["mala"]["step"] == 0.2
    assert validate({"experiment": "dj94_denoise"})["mala"]["n_draws"] == 20000


def test_yaml_scientific_notation_is_a_number(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("experiment: fig1_posterior_means\nn: 1e7\n")
    assert load_config(str(p))["n"] == 1e7
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"))


# artifacts

def test_schemas_match_golden_file():
    with open(GOLDEN) as fh:
        golden = json.load(fh)
    assert {k: (v["version"], v["columns"]) for k, v in golden.items()} == \
        {k: (v, list(c)) for k, (v, c) in SCHEMAS.items()}


def test_manifest_exists_before_tables(tmp_path):
    w = RunWriter(str(tmp_path / "r"), {"experiment": "rate_sweep", "seed": 1})
    with open(w.manifest_path) as fh:
        assert json.load(fh)["status"] == "running"
    path = w.write_table("rate_sweep", [("direct", 100, 0, 0.25)])
    w.finish()
    with open(w.manifest_path) as fh:
        doc = json.load(fh)
    assert doc["status"] == "complete"
    assert doc["outputs"]["rate_sweep.csv"]["sha256"] == sha256_file(path)
    assert doc["outputs"]["rate_sweep.csv"]["schema"] == "rate_sweep/v1"
    with pytest.raises(Exception):
        w.write_table("rate_sweep", [("direct", 100)])


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_every_experiment_writes_its_schema(tmp_path, experiment):
    out, manifest = _run(tmp_path, experiment)
    assert manifest["status"] == "complete"
    for name, meta in manifest["outputs"].items():
        assert sha256_file(os.path.join(out, name)) == meta["sha256"]
        if name.endswith(".csv"):
            cols, rows = read_table(os.path.join(out, name))
            assert cols == SCHEMAS[name[:-4]][1]
            assert len(rows) == meta["rows"] > 0


def test_reruns_are_byte_identical_across_worker_counts(tmp_path, monkeypatch):
    monkeypatch.setenv("HT_BNP_THREADS", "1")
    a, ma = _run(tmp_path, "rate_sweep", out="a")
    monkeypatch.setenv("HT_BNP_THREADS", "2")
    b, mb = _run(tmp_path, "rate_sweep", out="b")
    assert {k: v["sha256"] for k, v in ma["outputs"].items()} == {k: v["sha256"] for k, v in mb["outputs"].items()}
    c, mc = _run(tmp_path, "rate_sweep", out="c", seed=5)
    assert mc["outputs"]["rate_sweep.csv"]["sha256"] != ma["outputs"]["rate_sweep.csv"]["sha256"]


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("HT_BNP_THREADS", "3")
    assert pool_size(10) == 3 and pool_size(2) == 2
    monkeypatch.setenv("HT_BNP_THREADS", "many")
    with pytest.raises(Exception):
        pool_size(4)


def test_fig1_gaussian_tail_is_linear(tmp_path):
    out, _ = _run(tmp_path, "fig1_posterior_means", tails=[{"kind": "Gaussian"}])
    _, rows = read_table(os.path.join(out, "fig1_posterior_means.csv"))
    n = 1e7
    for _, s, x, m in rows:
        s, x, m = float(s), float(x), float(m)
        assert m == pytest.approx(n * s * s * x / (1 + n * s * s), rel=1e-8, abs=1e-15)


def test_dj94_manifest_records_snr(tmp_path):
    _, manifest = _run(tmp_path, "dj94_denoise")
    assert manifest["extras"]["snr_achieved"]["HeaviSine"] == pytest.approx(7.0, abs=0.01)


# plotting

def _band_table(tmp_path):
    p = tmp_path / "band.csv"
    p.write_text("t,mean,lower,upper\n0,1,0.5,1.5\n0.5,2,1.5,2.5\n1,1.5,1,2\n")
    return str(p)


def test_band_plot_has_region_and_edges(tmp_path):
    path = emit_plot(_band_table(tmp_path), "band", x="t", y="mean")
    svg = open(path).read()
    assert path.endswith("band_band.svg")
    assert svg.count("<path") >= 3
    again = emit_plot(_band_table(tmp_path), "band", str(tmp_path / "b2.svg"), x="t", y="mean")
    assert open(again).read() == svg


def test_plot_errors_write_nothing(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("t,mean\n")
    with pytest.raises(PlotError):
        emit_plot(str(empty), "line", x="t", y="mean")
    with pytest.raises(PlotError):
        emit_plot(_band_table(tmp_path), "line", x="t", y="missing")
    assert not list(tmp_path.glob("*.svg"))


# command line

def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    good = _write_config(tmp_path, "fig1_posterior_means")
    assert cli.main(["validate", "--config", good]) == 0
    assert "experiment: fig1_posterior_means" in capsys.readouterr().out
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment: rate_sweep\nreplicates: 0\n")
    assert cli.main(["rate_sweep", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["prior_mass", "--config", good, "--out", str(tmp_path / "y")]) == 2
    assert cli.main(["plot", _band_table(tmp_path), "--kind", "line", "--y", "nope"]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["not_an_experiment"])
    assert info.value.code == 2

    def boom(cfg, writer):
        raise NumericalFailure("quadrature did not converge")
    monkeypatch.setattr(cli, "run", boom)
    out = tmp_path / "failed"
    assert cli.main(["fig1_posterior_means", "--config", good, "--out", str(out)]) == 3
    with open(out / "manifest.json") as fh:
        doc = json.load(fh)
    assert doc["status"] == "failed" and "converge" in doc["error"]


def test_readme_config_examples_validate():
    import re
    readme = os.path.join(os.path.dirname(__file__), os.pardir, "README.md")
    blocks = re.findall(r"```yaml\n(.*?)```", open(readme, encoding="utf-8").read(), re.S)
    seen = set()
    for block in blocks:
        raw = yaml.load(block, Loader=config._Loader)
        seen.add(validate(raw)["experiment"])
    assert seen == set(EXPERIMENTS)
