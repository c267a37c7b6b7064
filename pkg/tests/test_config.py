import json

import pytest
import yaml

from src.app.core.config.loader import ConfigFileError, config_loader
from src.app.core.config.settings import Settings
from src.app.models.pydantic.bench import BenchmarkConfig
from src.app.models.pydantic.fleet import CommunicationMode
from src.app.models.pydantic.scenario import ScenarioConfig


def test_defaults_then_file_then_overrides(tmp_path):
    path = tmp_path / "bench.json"
    path.write_text(json.dumps({"vehicles": 5, "seed": 9, "payload_sizes": [16, 64]}))

    assert config_loader.load_model(BenchmarkConfig).vehicles == 3
    from_file = config_loader.load_model(BenchmarkConfig, path)
    assert (from_file.vehicles, from_file.seed, from_file.payload_sizes) == (5, 9, (16, 64))

    overridden = config_loader.load_model(BenchmarkConfig, path, {"seed": 1, "vehicles": None, "modes": ["single"]})
    assert (overridden.vehicles, overridden.seed) == (5, 1)
    assert overridden.modes == (CommunicationMode.SINGLE,)


def test_yaml_sections_and_nested_models(tmp_path):
    path = tmp_path / "scenario.yaml"
    document = {
        "scenario": {
            "seed": 4,
            "link": {"base_latency_ms": 8, "jitter_ms": 1, "loss_rate": 0.01},
            "fleet": [{"zone": "green", "home_peer": 1}],
            "crash_schedule": [{"at_ms": 100, "node": "peer-2"}],
        }
    }
    path.write_text(yaml.safe_dump(document))
    config = config_loader.load_model(ScenarioConfig, path, section="scenario")
    assert config.seed == 4
    assert config.link.base_latency_ms == 8
    assert config.fleet[0].home_peer == 1
    assert config.crash_schedule[0].node == "peer-2"


def test_empty_file_yields_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert config_loader.load_model(ScenarioConfig, path) == ScenarioConfig()


@pytest.mark.parametrize(
    "content",
    ["seed: [1", "- just\n- a list\n", '{"payload_sizes": [48]}', '{"peers": 1, "endorsement_required": 2}'],
)
def test_unusable_files_raise_config_errors(tmp_path, content):
    path = tmp_path / "bad.yaml"
    path.write_text(content)
    with pytest.raises(ConfigFileError):
        config_loader.load_model(BenchmarkConfig, path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigFileError):
        config_loader.load_raw(tmp_path / "absent.yaml")


def test_settings_read_the_prefixed_environment(monkeypatch):
    monkeypatch.setenv("EDGECHAIN_BLOCK_MAX_MESSAGE_COUNT", "25")
    monkeypatch.setenv("EDGECHAIN_LINK_LOSS_RATE", "0.05")
    current = Settings(_env_file=None)
    assert current.BLOCK_MAX_MESSAGE_COUNT == 25
    assert current.LINK_LOSS_RATE == 0.05
    assert current.HEARTBEAT_MS == 50.0
    assert current.CERT_VALIDITY_MS == 365 * 24 * 3600 * 1000
