import pytest

from twoslit.config import SCHEMA_VERSION, RunConfig
from twoslit.errors import ConfigurationError


def test_defaults_valid():
    cfg = RunConfig()
    cfg.validate()
    assert cfg.schema_version == SCHEMA_VERSION
    assert [s["name"] for s in cfg.experiment.scenarios] == ["A", "B"]
    offs = cfg.pattern.offsets()
    assert offs[0] == -0.12 and offs[-1] == 0.12 and len(offs) == 121


def test_toml_round_trip():
    cfg = RunConfig()
    cfg.seed = 5
    cfg.dbb.n_pairs = 123
    back = RunConfig.from_toml(cfg.to_toml())
    assert back == cfg
    assert back.to_dict() == cfg.to_dict()


def test_partial_file_uses_defaults(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("seed = 9\n[dbb]\nn_pairs = 10\n")
    cfg = RunConfig.load(path)
    assert cfg.seed == 9 and cfg.dbb.n_pairs == 10
    assert cfg.pattern == RunConfig().pattern


def test_int_promoted_to_float():
    cfg = RunConfig.from_dict({"pattern": {"fixed_distance": 2}})
    assert isinstance(cfg.pattern.fixed_distance, float)


@pytest.mark.parametrize("data,field", [
    ({"bogus": 1}, "bogus"),
    ({"dbb": {"nope": 1}}, "dbb.nope"),
    ({"schema_version": 2}, "schema_version"),
    ({"seed": -1}, "seed"),
    ({"dbb": {"n_pairs": 0}}, "dbb.n_pairs"),
    ({"dbb": {"n_pairs": 1.5}}, "dbb.n_pairs"),
    ({"dbb": {"quadrature_order": 15}}, "dbb.quadrature_order"),
    ({"dbb": {"profile": "tri"}}, "dbb.profile"),
    ({"dbb": {"probe_planes": [1e-5]}}, "dbb.probe_planes"),
    ({"dbb": {"placements": [[0.0, 1.0]]}}, "dbb.placements"),
    ({"pattern": {"scan_step": 0.0}}, "pattern.scan_step"),
    ({"pattern": {"lens_diameter": -1.0}}, "pattern.lens_diameter"),
    ({"pattern": {"fixed_distance": "far"}}, "pattern.fixed_distance"),
    ({"experiment": {"scenarios": []}}, "experiment.scenarios"),
    ({"experiment": {"calibration_scenario": "Z"}}, "experiment.calibration_scenario"),
    ({"experiment": {"background_delay": 1e-9}}, "experiment.background_delay"),
    ({"compare": {"configurations": []}}, "compare.configurations"),
    ({"output": {"dir": ""}}, "output.dir"),
])
def test_invalid_values_name_the_field(data, field):
    with pytest.raises(ConfigurationError) as exc:
        RunConfig.from_dict(data)
    assert exc.value.field == field
    assert field in str(exc.value)


def test_scenario_field_errors():
    sc = dict(RunConfig().experiment.scenarios[0])
    bad = dict(sc, expected_sigma=1.0)
    with pytest.raises(ConfigurationError, match=r"experiment.scenarios\[0\].expected_sigma"):
        RunConfig.from_dict({"experiment": {"scenarios": [bad]}})
    extra = dict(sc, colour="red")
    with pytest.raises(ConfigurationError, match=r"experiment.scenarios\[0\].colour"):
        RunConfig.from_dict({"experiment": {"scenarios": [extra]}})
    missing = {k: v for k, v in sc.items() if k != "offset2"}
    with pytest.raises(ConfigurationError, match=r"experiment.scenarios\[0\].offset2"):
        RunConfig.from_dict({"experiment": {"scenarios": [missing]}})


def test_bad_toml_and_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="invalid TOML"):
        RunConfig.from_toml("seed = = 3")
    with pytest.raises(ConfigurationError):
        RunConfig.load(tmp_path / "absent.toml")
