import pytest

from skewdrift.config.settings import SCHEMA_VERSION, Config, config
from skewdrift.utils.errors import ConfigError


def test_defaults_are_available():
    assert config.get("solver", "rtol") == 1e-10
    assert config.get("potentials", "line_nodes") == 32
    assert config.get("zhikov", "rho") == 0.05
    assert SCHEMA_VERSION == "skewdrift-report/1"


def test_load_coerces_to_default_types(write_config):
    path = write_config(
        "[solve]\n"
        "domain = unit_disk\n"
        "resolution = 12\n"
        "[solver]\n"
        "rtol = 1e-9\n"
        "check_apriori = no\n"
    )
    config.load_config(path, "solve")
    assert config.get("solve", "resolution") == 12
    assert config.get("solver", "rtol") == pytest.approx(1e-9)
    assert config.get("solver", "check_apriori") is False
    assert config.get("solve", "domain") == "unit_disk"


def test_unknown_keys_are_rejected(write_config):
    path = write_config("[solve]\ndomain = unit_disk\nresolution = 8\nmeshsize = 3\n[extras]\nfoo = 1\n")
    with pytest.raises(ConfigError) as info:
        config.load_config(path, "solve")
    assert "solve.meshsize" in info.value.keys
    assert "[extras]" in info.value.keys


def test_missing_required_keys_are_listed_together(write_config):
    path = write_config("[potential]\nresolution = 8\n")
    with pytest.raises(ConfigError) as info:
        config.load_config(path, "potential")
    assert info.value.keys == ["potential.domain", "potential.field", "potential.construction"]


@pytest.mark.parametrize("section, key, value", [
    ("solve", "resolution", "0"),
    ("zhikov", "rho", "0.2"),
    ("zhikov", "rho", "0"),
    ("solver", "rtol", "0"),
    ("run", "threads", "0"),
    ("potentials", "line_nodes", "16"),
])
def test_out_of_range_values(write_config, section, key, value):
    path = write_config(f"[{section}]\n{key} = {value}\n")
    with pytest.raises(ConfigError) as info:
        config.load_config(path)
    assert info.value.keys == [f"{section}.{key}"]


def test_uncoercible_value(write_config):
    path = write_config("[solve]\nresolution = many\n")
    with pytest.raises(ConfigError, match="solve.resolution"):
        config.load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        config.load_config(tmp_path / "absent.cfg")


def test_get_floats():
    config.set("truncate", "lambdas", "1, 2.5,4")
    assert config.get_floats("truncate", "lambdas") == [1.0, 2.5, 4.0]
    config.set("solve", "schedule", "")
    assert config.get_floats("solve", "schedule") == []
    config.set("truncate", "lambdas", "1,x")
    with pytest.raises(ConfigError):
        config.get_floats("truncate", "lambdas")


def test_save_and_reload(tmp_path):
    fresh = Config()
    fresh.set("norms", "resolution", 32)
    fresh.set("analysis", "p_max", 128.0)
    path = tmp_path / "saved.cfg"
    fresh.save_config(path)

    other = Config()
    other.load_config(path)
    assert other.get("norms", "resolution") == 32
    assert other.get("analysis", "p_max") == 128.0
    assert other.resolved() == fresh.resolved()


def test_reset_to_defaults():
    config.set("run", "seed", 7)
    config.reset_to_defaults()
    assert config.get("run", "seed") == 0
