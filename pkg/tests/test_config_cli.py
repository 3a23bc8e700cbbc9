import filecmp
import json
import os

import pytest
import yaml

from nlkg import cli
from nlkg.config import load_config
from nlkg.errors import ConfigError


def _yaml(tmp_path, data):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_defaults_load_and_hash_ignores_threads():
    a = load_config()
    b = load_config(overrides={"run": {"threads": 4}})
    c = load_config(overrides={"run": {"seed": 3}})
    assert a.params.p == 7.0
    assert a.hash == b.hash != c.hash


@pytest.mark.parametrize("over", [
    {"model": {"q": 1}},
    {"experiments": {"spectral": {"N": "many"}}},
    {"constants": {"delta_star": 0.5}},          # must stay below delta_X
    {"constants": {"delta_trap": 0.05}},         # must equal 3 eps
    {"run": {"threads": 0}},
])
def test_invalid_configs(over):
    with pytest.raises(ConfigError):
        load_config(overrides=over)


def test_unknown_key_exits_2(tmp_path, capsys):
    rc = cli.main(["spectral", "--config", _yaml(tmp_path, {"modle": {}}),
                   "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err


def test_locked_run_directory(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / ".lock").write_text("1")
    assert cli.main(["spectral", "--out", str(out)]) == cli.EXIT_CONFIG
    with cli.run_directory(str(tmp_path / "p")):
        with pytest.raises(cli.RunDirLocked):
            with cli.run_directory(str(tmp_path / "p")):
                pass
    assert not (tmp_path / "p" / ".lock").exists()


def test_numerical_failure_exits_3_and_marks(tmp_path):
    cfg = _yaml(tmp_path, {"experiments": {"shoot": {"bracket": [0.04, 0.05],
                                                      "mu_minus": [0.02]}}})
    out = tmp_path / "o"
    assert cli.main(["shoot", "--config", cfg, "--out", str(out)]) == cli.EXIT_NUMERICAL
    assert "BracketInvalid" in (out / cli.MARKER).read_text()
    assert not (out / ".lock").exists()


def test_incomplete_output_exits_4(tmp_path):
    cfg = _yaml(tmp_path, {"experiments": {"eject": {"amplitudes": [1e-9]}}})
    out = tmp_path / "o"
    assert cli.main(["eject", "--config", cfg, "--out", str(out)]) == cli.EXIT_INCOMPLETE
    assert (out / cli.MARKER).exists()


def test_outputs_are_deterministic_with_headers(tmp_path):
    for name in ("a", "b"):
        assert cli.main(["spectral", "--out", str(tmp_path / name)]) == cli.EXIT_OK
    a, b = tmp_path / "a", tmp_path / "b"
    files = sorted(os.listdir(a))
    assert files == sorted(os.listdir(b)) and cli.MARKER not in files
    _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    assert mismatch == [] and errors == []
    h = load_config().hash
    for f in files:
        if f.endswith(".tsv"):
            head = [ln for ln in (a / f).read_text().splitlines() if ln.startswith("#")]
            assert f"# config_hash: {h}" in head
            assert any(ln.startswith("# constants: {") for ln in head)
    summ = json.loads((a / "spectral_summary.json").read_text())
    assert summ["config_hash"] == h and summ["subcommand"] == "spectral"


def test_fmt():
    assert cli.fmt(None) == "NA" and cli.fmt(True) == "true" and cli.fmt(0.1) == "0.1"
    assert cli.fmt("a\tb") == "a b"
