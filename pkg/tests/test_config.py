import math

import pytest

from lavdm_kit.config import (
    EXPERIMENTS,
    PRESETS,
    build_config,
    dump_toml,
    parse_toml,
    validate_config,
)
from lavdm_kit.errors import ConfigError


class TestParser:
    def test_scalars_and_arrays(self):
        text = """
# a comment
experiment = "beta_sweep"
n = 1200
epsilon = 0.17
trunc = inf
flag = true
beta_grid = [0.0, 0.25, 0.5]
"""
        values, lines = parse_toml(text)
        assert values["experiment"] == "beta_sweep"
        assert values["n"] == 1200
        assert values["epsilon"] == 0.17
        assert math.isinf(values["trunc"])
        assert values["flag"] is True
        assert values["beta_grid"] == [0.0, 0.25, 0.5]
        assert lines["n"] == 4

    def test_rejects_tables(self):
        with pytest.raises(ConfigError):
            parse_toml("[section]\nx = 1\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            parse_toml("x = 1\nx = 2\n")

    def test_dump_roundtrip(self):
        values = {
            "experiment": "alpha_sweep", "n": 7, "epsilon": 0.25,
            "trunc": math.inf, "grid": [1, 2, 3], "name": "abc", "on": False,
        }
        back, _ = parse_toml(dump_toml(values))
        assert back == values


class TestValidation:
    def test_minimal_config_fills_defaults(self):
        cfg = build_config({"experiment": "landmark_sweep", "chart": "klein"})
        assert cfg.n == 1000
        assert cfg.m_grid == [64, 128, 256, 512]
        assert cfg.epsilon == 0.2
        assert cfg.trials == 10
        echoed = dump_toml(cfg.as_dict())
        assert "m_grid" in echoed

    def test_out_of_range_beta_names_field(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text('experiment = "beta_sweep"\nbeta = 1.5\n')
        with pytest.raises(ConfigError) as err:
            validate_config(path)
        assert any("beta" in m and "line 2" in m for m in err.value.messages)

    def test_unknown_key_with_line(self, tmp_path):
        path = tmp_path / "typo.toml"
        path.write_text('experiment = "beta_sweep"\nepsilonn = 0.2\n')
        with pytest.raises(ConfigError) as err:
            validate_config(path)
        assert any("epsilonn" in m and "line 2" in m for m in err.value.messages)

    def test_missing_experiment(self):
        with pytest.raises(ConfigError):
            build_config({"chart": "klein"})

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            build_config({"experiment": "beta_sweep", "beta_grid": []})

    def test_presets_cover_all_experiments(self):
        for name, table in PRESETS.items():
            for exp in EXPERIMENTS:
                assert exp in table, f"{exp} missing from preset {name}"
                cfg = build_config({"experiment": exp}, preset=name)
                assert cfg.experiment == exp

    def test_shipped_preset_files_parse(self):
        from importlib import resources

        files = resources.files("lavdm_kit") / "presets"
        names = [f.name for f in files.iterdir() if f.name.endswith(".toml")]
        assert len(names) == 14
        for name in names:
            values, lines = parse_toml((files / name).read_text())
            build_config(values, lines)
