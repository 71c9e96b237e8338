import json
import math
import subprocess
import sys

import pytest

from levygsd.cli import main
from levygsd.config import ExperimentConfig, config_from_mapping, load_config
from levygsd.errors import ConfigError

RUN_CONFIG = """
[model]
id = "stable"
alpha = 1.0

[potential]
family = "power-log-loglog"
d1 = 2.0

[grid]
R_box = [8.0, 12.0]

[run]
stages = ["check-model", "groundstate", "propagate", "mc-fk", "gsd-scan"]
t_list = [0.5]
p_list = [4, "inf"]
seed = 7
n_paths = 5000
dt = 0.05
"""


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# -- config -------------------------------------------------------------------


def test_load_config(tmp_path):
    cfg = load_config(_write(tmp_path, RUN_CONFIG))
    assert cfg.model_id == "stable" and cfg.model_params == (("alpha", 1.0),)
    assert cfg.p_list == (4.0, math.inf) and cfg.seed == 7
    assert cfg.ordered_stages() == ["check-model", "groundstate", "propagate", "gsd-scan", "mc-fk"]


def test_config_hash_ignores_workers_and_output():
    a = ExperimentConfig(seed=1)
    b = ExperimentConfig(seed=1, workers=8, out_dir="elsewhere", formats=("json",))
    assert a.sha256() == b.sha256()
    assert a.sha256() != ExperimentConfig(seed=2).sha256()


@pytest.mark.parametrize(
    "data, match",
    [
        ({"model": {"id": "nope"}}, "nope"),
        ({"modle": {}}, "unknown sections"),
        ({"run": {"sedd": 1}}, "unknown keys"),
        ({"run": {"stages": ["mc-fk"]}}, "seed"),
        ({"run": {"p_list": [2]}}, "exceed 2"),
        ({"run": {"p_list": ["big"]}}, "inf"),
        ({"model": {"id": "stable", "alpha": "x"}}, "numeric"),
        ({"model": {"id": "stable", "alpha": 3.0}}, "alpha"),
        ({"potential": {"family": "cubic"}}, "cubic"),
        ({"run": {"stages": ["dance"]}}, "unknown stage"),
        ({"grid": {"R_box": []}}, "non-empty"),
    ],
)
def test_config_rejections(data, match):
    with pytest.raises(ConfigError, match=match):
        config_from_mapping(data)


def test_config_parse_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[model\nid = 1"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


# -- command line -------------------------------------------------------------------


def test_unknown_model_exit_code(tmp_path, capsys):
    assert main(["catalog", "--model", "nope", "--out", str(tmp_path)]) == 2
    assert "nope" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    path = _write(tmp_path, "[run]\nsedd = 3\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_mc_without_seed_exit_code(tmp_path):
    assert main(["mc-fk", "--out", str(tmp_path)]) == 2


def test_catalog_lists_every_model(tmp_path, capsys):
    from levygsd.levy_models import CATALOG

    assert main(["catalog", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert all(name in text for name in CATALOG)
    doc = json.loads((tmp_path / "catalog.json").read_text())
    assert [r["id"] for r in doc["data"]] == list(CATALOG)
    first = (tmp_path / "catalog.csv").read_text().splitlines()[0]
    assert first.startswith("# config_sha256=")


def test_classify_table_relativistic(tmp_path, capsys):
    code = main(["classify", "--table", "--model", "relativistic", "--param", "alpha=1.5", "--param", "m=2",
                 "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "c=1.5874" in out and "gamma=1.75" in out
    rows = json.loads((tmp_path / "classify.json").read_text())["data"]["rows"]
    assert len(rows) == 12


def test_param_syntax_error(tmp_path):
    assert main(["check-model", "--param", "alpha", "--out", str(tmp_path)]) == 2


def test_run_is_byte_identical_across_threads(tmp_path):
    path = _write(tmp_path, RUN_CONFIG)
    outs = []
    for threads, name in ((1, "a"), (4, "b")):
        out = tmp_path / name
        assert main(["run", "--config", str(path), "--out", str(out), "--threads", str(threads)]) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert "manifest.json" in files and "mc_fk.json" in files and "gsd_scan.csv" in files
    assert files == sorted(p.name for p in outs[1].iterdir())
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    man = json.loads((outs[0] / "manifest.json").read_text())
    assert man["seed"] == 7 and set(man["artifacts"]) == set(files) - {"manifest.json"}


def test_verify_subset(tmp_path, capsys):
    assert main(["verify", "--checks", "1", "7", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "criterion  1 [PASS]" in out and "criterion  7 [PASS]" in out


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "levygsd.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "gsd-scan" in res.stdout
