import json

import numpy as np
import pytest

from lattice_spde.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, run
from lattice_spde.config import KEYS, ConfigError, RunConfig, read_config_file

SMALL = ["--L", "16", "--m", "2", "--samples", "100000", "--burn-in", "500", "--no-timestamp"]


def records(path):
    return [json.loads(line) for line in open(path) if not line.startswith("#")]


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_trees_command(tmp_path):
    assert run(["trees", "--p", "3", "--order", "1", "--output-dir", str(tmp_path)]) == EXIT_OK
    recs = records(tmp_path / "trees.jsonl")
    assert len(recs) == 4 and sorted(r["multiplicity"] for r in recs) == [1, 1, 3, 3]


def test_graphs_command(tmp_path):
    flags = ["--equilibrium", "--connected", "--even-only", "--output-dir", str(tmp_path)]
    assert run(["graphs"] + flags) == EXIT_OK
    recs = records(tmp_path / "graphs.jsonl")
    assert len(recs) == 8 and sum(r["tadpole"] for r in recs) == 6
    assert run(["graphs", "--drop-tadpoles"] + flags) == EXIT_OK
    recs = records(tmp_path / "graphs.jsonl")
    assert len(recs) == 2 and not any(r["tadpole"] for r in recs)


def test_eval_zero_cumulants(tmp_path):
    assert run(["eval", "--sigma2", "0", "--L", "4", "--output-dir", str(tmp_path)]) == EXIT_OK
    rows = [line.split(",") for line in (tmp_path / "series.csv").read_text().splitlines()[1:]]
    assert rows and all(float(r[-1]) == 0.0 for r in rows)
    th = [line.split(",") for line in (tmp_path / "F_th.csv").read_text().splitlines() if line[0].isdigit()]
    assert len(th) == 4 and all(float(r[-1]) == 0.0 for r in th)


def test_eval_assembles_first_order_model(tmp_path):
    from lattice_spde.evaluator import first_order_kernels, read_lag_csv
    from lattice_spde.lattice import LatticeConfig

    # c2 = 0.5 + 1 = 1.5, c4 = 1, odd cumulants vanish
    args = ["eval", "--L", "8", "--m", "1", "--lam", "0.2", "--method", "momentum", "--sigma2", "0.5",
            "--z", "1", "--atoms", "1:0.5,-1:0.5", "--output-dir", str(tmp_path)]
    assert run(args) == EXIT_OK
    cfg = LatticeConfig(1, 1.0, 8, 1.0)
    F, _ = read_lag_csv(tmp_path / "F_th.csv", cfg)
    K = first_order_kernels(cfg)
    assert np.allclose(F, 1.5 * K.P1 + 0.2 * (1.0 * K.P2 + 1.5**2 * K.Ptad), atol=1e-12)


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus = 1\n")
    assert run(["trees", "--config", str(bad)]) == EXIT_CONFIG
    assert run(["simulate", "--dt", "1.0"]) == EXIT_CONFIG
    assert run(["simulate", "--samples", "ten"]) == EXIT_CONFIG
    assert run(["fit", "--input", str(tmp_path / "missing.csv")]) == EXIT_IO
    assert run(["trees", "--config", str(tmp_path / "missing.cfg")]) == EXIT_IO
    with pytest.raises(SystemExit) as exc:
        run(["trees", "--bogus", "1"])
    assert exc.value.code == EXIT_CONFIG


def test_numeric_failure_exit(tmp_path):
    assert run(["simulate"] + SMALL + ["--output-dir", str(tmp_path)]) == EXIT_OK
    code = run(["fit", "--lam", "0", "--L", "16", "--m", "2", "--input", str(tmp_path / "correlation.csv"),
                "--output-dir", str(tmp_path)])
    assert code == EXIT_NUMERIC


@pytest.mark.parametrize("cmd", ["trees", "graphs", "eval", "simulate"])
def test_idempotence(tmp_path, cmd):
    extra = SMALL if cmd == "simulate" else ["--L", "4", "--no-timestamp", "--equilibrium"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run([cmd, "--output-dir", str(a)] + extra) == EXIT_OK
    assert run([cmd, "--output-dir", str(b)] + extra) == EXIT_OK
    assert files(a) == files(b)


def test_timestamp_header(tmp_path):
    run(["trees", "--output-dir", str(tmp_path)])
    assert "generated" in (tmp_path / "trees.jsonl").read_text().splitlines()[0]


def test_config_round_trip(tmp_path):
    dump = tmp_path / "run.cfg"
    args = SMALL + ["--z", "1", "--sigma2", "0.5", "--atoms", "1:0.5,-1:0.5", "--lam", "0.05"]
    assert run(["pipeline", "--dump-config", str(dump), "--output-dir", str(tmp_path / "a")] + args) == EXIT_OK
    again = RunConfig.from_strings(read_config_file(dump))
    assert again.dumps() == dump.read_text() and set(again.values) == set(KEYS)
    assert run(["pipeline", "--config", str(dump), "--output-dir", str(tmp_path / "b")]) == EXIT_OK
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig.from_strings({"k_zero": "2.0"})
    with pytest.raises(ConfigError):
        RunConfig.from_strings({"kernel_method": "quadrature"})
    with pytest.raises(ConfigError):
        RunConfig.from_strings({"L": "2.5"})
    assert RunConfig.from_strings({"richardson": "off"}).quad.richardson is False


def test_simulate_then_fit_matches_pipeline(tmp_path):
    assert run(["simulate", "--output-dir", str(tmp_path / "s")] + SMALL) == EXIT_OK
    corr = tmp_path / "s" / "correlation.csv"
    assert run(["fit", "--input", str(corr), "--output-dir", str(tmp_path / "s")] + SMALL) == EXIT_OK
    assert run(["pipeline", "--output-dir", str(tmp_path / "p")] + SMALL) == EXIT_OK
    a = json.loads((tmp_path / "s" / "fit.json").read_text())
    b = json.loads((tmp_path / "p" / "fit.json").read_text())
    for key in ("c2", "c4", "K", "se_c2", "se_K"):
        assert a[key] == pytest.approx(b[key], rel=1e-12)


def test_pipeline_gaussian(tmp_path, capsys):
    args = ["pipeline", "--samples", "2000000", "--no-timestamp", "--output-dir", str(tmp_path)]
    assert run(args) == EXIT_OK
    res = json.loads((tmp_path / "fit.json").read_text())
    assert abs(res["K"]) < 0.1 and res["label"] == "diffusive"
    assert "diffusive" in capsys.readouterr().out
