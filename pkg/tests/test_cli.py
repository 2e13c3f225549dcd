import csv
import io
import json
from pathlib import Path

import pytest

from kernelbounds import cli
from kernelbounds.config import ConfigError, RunConfig
from kernelbounds.quadrature import QuadratureError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def cfg_path(name):
    return str(CONFIGS / f"{name}.toml")


def test_hardy_criterion(capsys):
    code, out, _ = run(capsys, "criterion", "--config", cfg_path("hardy"))
    rep = json.loads(out)
    assert code == cli.EXIT_OK
    assert rep["max"] == pytest.approx((1 / 20) ** 0.25, rel=1e-8)
    assert rep["config"]["variant"] == "3.9"
    assert rep["verdict"] == "bounded"


def test_divergent_weight_exits_three(capsys):
    code, out, _ = run(capsys, "criterion", "--config", cfg_path("divergent"))
    assert code == cli.EXIT_DIVERGENT
    assert json.loads(out)["verdict"] == "unbounded by criterion"


def test_regime_violation_names_the_line(capsys):
    code, out, err = run(capsys, "criterion", "--config", cfg_path("bad_regime"))
    assert code == cli.EXIT_INPUT
    assert "1 < q < p" in err and "line" in err
    assert out == ""


def test_unknown_key_is_an_input_error(tmp_path, capsys):
    p = tmp_path / "typo.toml"
    p.write_text('variant = "3.9"\n\n[kernel]\nname = "log_ratio"\nsgn = "+"\n')
    code, _, err = run(capsys, "criterion", "--config", str(p))
    assert code == cli.EXIT_INPUT
    assert "sgn" in err and "line 5" in err


def test_missing_file_is_an_input_error(capsys):
    code, _, _ = run(capsys, "criterion", "--config", "/nonexistent/run.toml")
    assert code == cli.EXIT_INPUT


def test_unreachable_tolerance_exits_two(capsys):
    code, _, err = run(capsys, "criterion", "--config", cfg_path("hardy"), "--tol", "1e-15")
    assert code == cli.EXIT_BUDGET
    assert "budget" in err


def test_budget_errors_anywhere_map_to_two(monkeypatch, capsys):
    def boom(*a, **k):
        raise QuadratureError("forced")

    monkeypatch.setattr(cli, "criterion", boom)
    code, _, _ = run(capsys, "criterion", "--config", cfg_path("hardy"))
    assert code == cli.EXIT_BUDGET


def test_norm_on_synthetic_matrix(capsys):
    code, out, _ = run(capsys, "norm", "--config", cfg_path("rank_one"))
    rep = json.loads(out)
    assert code == 0
    assert rep["norm"]["value"] == pytest.approx(17.5418249, rel=1e-7)
    assert rep["grid_size"] == 3


def test_norm_refinement_trace(capsys):
    code, out, _ = run(capsys, "norm", "--config", cfg_path("hardy"))
    rep = json.loads(out)
    sizes = [t["grid_size"] for t in rep["refinement"]]
    assert code == 0 and sizes == [200, 400]


def test_verify_class(capsys):
    code, out, _ = run(capsys, "verify-class", "--config", cfg_path("verify_sqrt"))
    rep = json.loads(out)
    assert code == 0
    assert rep["membership"]["ok"] and rep["companion_laws"]["ok"]
    assert rep["min_h"]["value"] == pytest.approx(2 ** 0.5, rel=1e-2)


def test_compose_table(capsys):
    code, out, _ = run(capsys, "compose", "--config", cfg_path("compose"))
    rep = json.loads(out)
    pts = rep["table"]["points"]
    vals = rep["table"]["values"]
    assert code == 0 and rep["order"] == 2
    for j, x in enumerate(pts):
        for k, s in enumerate(pts[: j + 1]):
            assert vals[j][k] == pytest.approx((x - s) ** 2 / 2, rel=1e-8, abs=1e-14)


def test_partition_command(capsys):
    code, out, _ = run(capsys, "partition", "--config", cfg_path("partition"))
    rep = json.loads(out)
    assert code == 0
    assert [r["k_i"] for r in rep["intervals"]] == [0, 1, 2, 3]
    assert rep["verification"]["ok"]


def test_csv_only_for_sweeps(capsys):
    code, _, err = run(capsys, "criterion", "--config", cfg_path("hardy"), "--format", "csv")
    assert code == cli.EXIT_INPUT


def _small_sweep(tmp_path):
    text = (CONFIGS / "sweep.toml").read_text()
    p = tmp_path / "small.toml"
    p.write_text(text.split("[sweep]")[0] + '[sweep]\nkernel = ["constant", "log_ratio"]\n'
                 'exponents = [[2.0, "4/3"]]\ngrid = [40]\n')
    return p


def test_sweep_csv_is_reproducible(tmp_path, capsys):
    p = _small_sweep(tmp_path)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["sweep", "--config", str(p), "--out", str(out1)]) == 0
    assert cli.main(["sweep", "--config", str(p), "--out", str(out2), "--workers", "2"]) == 0
    assert out1.read_text() == out2.read_text()
    lines = out1.read_text().splitlines()
    assert lines[0].startswith("# kernelbounds ") and "csv-schema 1" in lines[0]
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert [r["kernel"] for r in rows] == ["constant", "log_ratio"]
    assert all(r["verdict"] == "bounded" and r["error"] == "" for r in rows)


def test_sweep_points_drop_alpha_for_other_kernels():
    cfg = RunConfig.from_path(cfg_path("sweep"))
    pts = cli.sweep_points(cfg)
    assert len(pts) == 12
    assert all("alpha" not in p for p in pts if p["kernel"] != "power_diff")


def test_bad_sweep_point_is_recorded_in_its_row():
    cfg = RunConfig.from_path(cfg_path("sweep"))
    row = cli.run_row(cfg.raw, {"exponents": [1.5, 2.0]})
    assert "regime" in row["error"]


def test_config_accepts_fractions_and_rejects_bad_windows():
    assert RunConfig.from_text('q = "3/2"\n').q == 1.5
    with pytest.raises(ConfigError):
        RunConfig.from_text("window = [1.0, 0.5]\n")
    with pytest.raises(ConfigError):
        RunConfig.from_text('variant = "9.9"\n')


def test_config_digest_tracks_content():
    a = RunConfig.from_text("p = 3.0\nq = 2.0\n")
    b = RunConfig.from_text("q = 2.0\np = 3.0\n")
    c = RunConfig.from_text("p = 3.0\nq = 1.5\n")
    assert a.digest() == b.digest() != c.digest()
