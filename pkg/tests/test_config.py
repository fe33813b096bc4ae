import pytest

from millopt.config import (
    PipelineConfig,
    config_from_dict,
    config_hash,
    dump_config,
    load_config,
)
from millopt.errors import ConfigError
from millopt.models import FAMILY_DEFAULTS


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("MILLOPT_SEED", "MILLOPT_OUTPUT_DIR", "MILLOPT_WORKERS", "LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


class TestDefaults:
    def test_full_roster_and_methods(self):
        config = load_config()
        assert [e.family for e in config.roster] == list(FAMILY_DEFAULTS)
        assert [m.name for m in config.campaign.methods] == ["de", "ga", "pso", "urs", "lhc"]
        assert config.cv.k == 10
        assert config.campaign.runs == 10

    def test_cv_seed_falls_back_to_master_seed(self):
        config = config_from_dict({"seed": 3})
        assert config.cv_seed == 3
        assert config_from_dict({"seed": 3, "cv": {"seed": 9}}).cv_seed == 9

    def test_method_specs(self):
        specs = load_config().campaign.method_specs()
        assert [s.kind for s in specs] == ["de", "ga", "pso", "uniform", "lhs"]
        assert specs[0].optimizer.population == 25
        assert specs[3].n_samples == 1250


class TestLoading:
    def test_yaml_file(self, tmp_path):
        path = tmp_path / "pipeline.yaml"
        path.write_text(
            "seed: 11\n"
            "cv:\n  k: 5\n"
            "roster:\n"
            "  - name: deep_gbm\n    family: gbm\n    hyperparameters: {max_depth: 5}\n"
            "campaign:\n  runs: 3\n  methods:\n    - {name: de, kind: de, de: {F: 0.8}}\n"
        )
        config = load_config(path)
        assert config.seed == 11
        assert config.cv.k == 5
        assert config.roster_entry("deep_gbm").to_spec().params()["max_depth"] == 5
        assert config.campaign.method_specs()[0].optimizer.de.F == 0.8

    def test_unknown_key_names_its_path(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"cv": {"folds": 5}})
        assert exc.value.key == "cv.folds"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("seed: [1, 2\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_env_then_explicit_overrides(self, monkeypatch):
        monkeypatch.setenv("MILLOPT_SEED", "21")
        monkeypatch.setenv("MILLOPT_WORKERS", "4")
        monkeypatch.setenv("LOG_LEVEL", "debug")
        config = load_config(overrides={"seed": 5, "output_dir": None})
        assert config.seed == 5
        assert config.workers == 4
        assert config.log_level == "DEBUG"
        assert config.output_dir == "output"

    def test_non_integer_override(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"workers": "many"})

    def test_dump_and_reload(self, tmp_path):
        config = config_from_dict({"seed": 4, "lof": {"k": 15}})
        dump_config(config, tmp_path / "c.yaml")
        again = load_config(tmp_path / "c.yaml")
        assert again == config


class TestValidation:
    def test_unimplemented_family_rejected(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"roster": [{"name": "net", "family": "mlp"}]})
        assert "unimplemented" in str(exc.value)
        assert exc.value.key == "roster[0].family"

    def test_bad_hyperparameter(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"roster": [{"name": "g", "family": "gbm",
                                          "hyperparameters": {"learning_rate": 2.0}}]})
        assert exc.value.key == "roster[0].learning_rate"

    def test_duplicate_roster_names(self):
        roster = [{"name": "a", "family": "ols"}, {"name": "a", "family": "cart"}]
        with pytest.raises(ConfigError):
            config_from_dict({"roster": roster})

    def test_pinned_must_be_in_roster(self):
        with pytest.raises(ConfigError):
            config_from_dict({"selection": {"pinned": "svm"}})

    def test_csv_source_needs_paths(self):
        with pytest.raises(ConfigError):
            config_from_dict({"data": {"source": "csv"}})

    @pytest.mark.parametrize("raw", [
        {"cv": {"k": 1}},
        {"workers": 0},
        {"roster": []},
        {"campaign": {"methods": [{"name": "x", "kind": "annealing"}]}},
        {"campaign": {"methods": [{"name": "x", "kind": "de", "population": 2}]}},
        {"campaign": {"methods": [{"name": "x", "kind": "de", "de": {"G": 1}}]}},
    ])
    def test_rejected(self, raw):
        with pytest.raises(ConfigError):
            config_from_dict(raw)


class TestConfigHash:
    def test_execution_keys_do_not_count(self):
        a = PipelineConfig(output_dir="a", workers=1)
        b = PipelineConfig(output_dir="b", workers=8, log_level="DEBUG")
        assert config_hash(a) == config_hash(b)

    def test_content_keys_count(self):
        assert config_hash(PipelineConfig(seed=1)) != config_hash(PipelineConfig(seed=2))
        assert config_hash(config_from_dict({"lof": {"k": 5}})) != config_hash(PipelineConfig())
