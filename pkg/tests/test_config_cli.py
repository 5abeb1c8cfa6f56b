import json
from pathlib import Path

import pytest

from nskstab.cli import main
from nskstab.config import ConfigError, parse_config

MINIMAL = """\
[profile]
kind = linear
params = 1, 1

[physics]
g = 1.0
mu = 0.1
sigma = 0.02
L = 1.0
"""

FULL = MINIMAL + """
[mesh]
n_elements = 32
quad_points = 4

[solver]
fixed_point_tol = 1e-10
j_max = 2

[evolution]
dt = auto
t_end = 5.0

[instability]
coefficients = 1.0, 0.02
delta = 0.01
epsilon0 = 0.1

[output]
out_dir = artifacts
mode_samples = 101
"""


def write(tmp_path: Path, text: str, name: str = "run.cfg") -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, MINIMAL))
    assert cfg.n_elements == 128
    assert cfg.quad_points == 4
    assert cfg.fixed_point_tol == 1e-10
    assert cfg.j_max == 4
    assert cfg.dt is None
    assert cfg.profile_kind == "linear"
    assert len(cfg.config_hash) == 16


def test_full_config_values(tmp_path):
    cfg = parse_config(write(tmp_path, FULL))
    assert cfg.n_elements == 32
    assert cfg.j_max == 2
    assert cfg.dt is None and cfg.t_end == 5.0
    assert cfg.coefficients == [1.0, 0.02]
    assert cfg.out_dir == "artifacts"


def test_negative_sigma_reports_line(tmp_path):
    bad = MINIMAL.replace("sigma = 0.02", "sigma = -1")
    with pytest.raises(ConfigError, match="sigma must be nonnegative") as exc:
        parse_config(write(tmp_path, bad))
    assert "line 8" in str(exc.value)


def test_missing_profile_section(tmp_path):
    text = MINIMAL.split("[physics]")[1]
    with pytest.raises(ConfigError, match=r"\[profile\]"):
        parse_config(write(tmp_path, "[physics]" + text))


def test_unknown_key_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="unknown key") as exc:
        parse_config(write(tmp_path, MINIMAL + "\n[mesh]\nn_elems = 4\n"))
    assert "line" in str(exc.value)


def test_type_mismatch_reports_line(tmp_path):
    bad = MINIMAL.replace("g = 1.0", "g = one")
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_config(write(tmp_path, bad))


def test_duplicate_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(write(tmp_path, MINIMAL + "\n[physics]\ng = 2.0\n"))


def test_nonincreasing_profile_rejected_at_parse_use(tmp_path):
    bad = MINIMAL.replace("params = 1, 1", "params = 1, -1")
    cfg = parse_config(write(tmp_path, bad))
    with pytest.raises(ConfigError, match="not increasing"):
        cfg.make_profile()


def test_tabulated_profile_config(tmp_path):
    text = """\
[profile]
kind = tabulated
table = 0 1, 0.25 1.3, 0.5 1.7, 0.75 2.2, 1 2.8

[physics]
g = 1.0
mu = 0.1
sigma = 0.01
L = 1.0
"""
    cfg = parse_config(write(tmp_path, text))
    prof = cfg.make_profile()
    assert prof(0.5) == pytest.approx(1.7, abs=1e-12)


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = write(tmp_path, MINIMAL.replace("sigma = 0.02", "sigma = -3"))
    rc = main(["sigma-critical", "--config", str(bad)])
    assert rc == 2
    assert "sigma must be nonnegative" in capsys.readouterr().err


def test_cli_missing_file_exit_code(tmp_path, capsys):
    rc = main(["check", "--config", str(tmp_path / "nope.cfg")])
    assert rc == 2


def test_cli_sigma_critical_output(tmp_path, capsys):
    cfg = write(tmp_path, FULL)
    rc = main(["sigma-critical", "--config", str(cfg)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "sigma_c = 0.101321" in out
    assert "subcritical" in out


def test_cli_gamma_spectrum_overrides(tmp_path, capsys):
    cfg = write(tmp_path, FULL)
    rc = main(["gamma-spectrum", "--config", str(cfg), "--k", "3.14159",
               "--lambda", "0.1"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "gamma_1" in out and "n_positive" in out


def test_cli_dispersion_stable_regime(tmp_path, capsys):
    stable = write(tmp_path, FULL.replace("sigma = 0.02", "sigma = 0.2"))
    rc = main(["dispersion", "--config", str(stable), "--out", str(tmp_path / "o")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "stable at this sigma" in out
    summary = json.loads((tmp_path / "o" / "dispersion_summary.json").read_text())
    assert summary["stable"] is True and summary["S"] == []


def test_cli_pipeline_and_determinism(tmp_path, capsys):
    cfg = write(tmp_path, FULL)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    for out in (out1, out2):
        assert main(["dispersion", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["modes", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["instability-plan", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    names = sorted(p.name for p in out1.iterdir())
    assert "dispersion.csv" in names and "plan.json" in names
    assert any(n.startswith("mode_") for n in names)
    # identical config => byte-identical artifacts
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    # every document embeds the config hash and version
    cfg_obj = parse_config(cfg)
    for name in names:
        if name.endswith(".json"):
            doc = json.loads((out1 / name).read_text())
            blob = json.dumps(doc)
            assert cfg_obj.config_hash in blob
        else:
            assert cfg_obj.config_hash in (out1 / name).read_text()


def test_cli_modes_partial_output_warning(tmp_path, capsys):
    cfg = write(tmp_path, FULL.replace("j_max = 2", "j_max = 6"))
    rc = main(["modes", "--config", str(cfg), "--out", str(tmp_path / "m")])
    captured = capsys.readouterr()
    assert rc == 0
    assert "only" in captured.err and "available" in captured.err


def test_cli_check_passes(tmp_path, capsys):
    cfg = write(tmp_path, FULL)
    rc = main(["check", "--config", str(cfg)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "FAIL" not in out
    assert out.count("PASS") >= 15
