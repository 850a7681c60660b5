import csv
import io
from pathlib import Path

import pytest
import yaml

from swmix.cli import main
from swmix.config import ConfigError, parse_config
from swmix.runner import fmt

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def rows(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


def test_gallery_exits_zero(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "gallery.yaml"), "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "gallery.csv")
    assert len(table) == 6
    assert all(r["passed"] == "true" for r in table)


def test_transpose_exits_three(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "transpose.yaml"), "--out", str(tmp_path)]) == 3
    assert "complete positivity violated" in capsys.readouterr().err


def test_slow_mixing_exits_four(tmp_path, capsys):
    cfg = write(tmp_path, {"experiments": [{"name": "c", "kind": "classify", "n_probe": 50,
                                            "operators": [{"name": "slow", "builtin": "depolarizing",
                                                           "lam": 1e-4}]}]})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 4
    assert "spectral verdict" in capsys.readouterr().err


def test_empty_grid_exits_two(tmp_path, capsys):
    cfg = write(tmp_path, {"experiments": [{"name": "fg", "kind": "decay-free-group", "words": ["g0"],
                                            "n_values": []}]})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("doc", [
    {"experiments": []},
    {"experiments": [{"name": "x", "kind": "nonsense"}]},
    {"experiments": [{"name": "fg", "kind": "decay-free-group", "words": ["g0"], "n_values": [4, 2]}]},
    {"experiments": [{"name": "z", "kind": "zsido", "mode": "sampled"}]},
    {"experiments": [{"name": "c", "kind": "classify", "operators": [{"name": "r", "builtin": "random",
                                                                        "shape": [2]}]}]},
])
def test_bad_configs(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_missing_file(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.yaml")]) == 2


def test_validate(capsys):
    assert main(["validate", str(CONFIGS / "demo.yaml")]) == 0
    assert "ok" in capsys.readouterr().out
    assert main(["validate", str(CONFIGS / "transpose.yaml")]) == 3


def test_deterministic_output(tmp_path):
    doc = {"experiments": [
        {"name": "c", "kind": "classify", "seed": 3, "n_probe": 200,
         "operators": [{"name": "r", "builtin": "random", "shape": [2], "seed": 5},
                       {"name": "dep", "builtin": "depolarizing", "lam": 0.5}]},
        {"name": "fp", "kind": "decay-free-product", "d": 2,
         "words": [{"letters": [[0, [[0, 1], [1, 0]]], [1, [[1, 0], [0, -1]]]]}], "n_values": [1, 7, 30]},
        {"name": "z", "kind": "zsido", "mode": "sampled", "seed": 9, "trials": 2, "n_values": [2, 16],
         "horizon": 200, "subsequences": ["evens"],
         "sequences": [{"name": "a", "kind": "alternating", "v": [1, 0]},
                       {"name": "s", "kind": "sqrt_decay", "v": [0, 1]}]},
    ]}
    cfg = write(tmp_path, doc)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a)]) == 0
    assert main(["run", cfg, "--out", str(b)]) == 0
    for name in ("c.csv", "fp.csv", "z.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_bounds_ordered(tmp_path):
    assert main(["run", str(CONFIGS / "demo.yaml"), "--out", str(tmp_path)]) == 0
    for name in ("free_group.csv", "free_group_rd.csv", "free_product.csv"):
        table = rows(tmp_path / name)
        assert table
        for r in table:
            assert float(r["lower_float"]) <= float(r["upper_float"])
    fg = rows(tmp_path / "free_group.csv")
    assert list(fg[0]) == ["word", "n", "lower_exact_num", "lower_exact_den", "lower_float", "upper_float",
                           "constants_mode"]
    assert list(rows(tmp_path / "free_product.csv")[0])[-1] == "p"
    z = rows(tmp_path / "zsido.csv")
    assert list(z[0]) == ["sequence_name", "n", "wmz_value", "certificate", "subsequence_name", "sub_norm"]
    assert {r["certificate"] for r in z} <= {"exact", "lower_bound"}


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SWMIX_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(CONFIGS / "gallery.yaml")]) == 0
    assert (tmp_path / "env" / "gallery.csv").exists()


def test_fmt():
    assert fmt(True) == "true"
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3"
