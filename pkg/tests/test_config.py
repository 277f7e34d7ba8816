import pytest

from pyscaling.config import HARDWARE_ENV, HardwareProfile, ModelConfig, RunConfig, TrainingConfig, \
    default_hardware_profile, load_hardware_profile, load_model_config
from pyscaling.exception import ConfigError


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_model_config_defaults():
    cfg = ModelConfig(n=4, vocab=11, d_emb=8, heads=2, layers=2)
    assert cfg.d_ff == 32
    assert cfg.d_h == 4
    assert cfg.replace(d_emb=16).d_ff == 64
    assert ModelConfig(n=4, vocab=11, d_emb=8, heads=2, layers=2, d_ff=20).replace(d_emb=16).d_ff == 20


@pytest.mark.parametrize("values", [
    dict(n=0, vocab=11, d_emb=8, heads=2, layers=2),
    dict(n=4, vocab=-1, d_emb=8, heads=2, layers=2),
    dict(n=4, vocab=11, d_emb=8, heads=3, layers=2),
    dict(n=4, vocab=11, d_emb=8, heads=2, layers=-1),
    dict(n=4.5, vocab=11, d_emb=8, heads=2, layers=2),
])
def test_model_config_validation(values):
    with pytest.raises(ConfigError):
        ModelConfig(**values)


def test_hardware_and_training_validation():
    with pytest.raises(ConfigError):
        HardwareProfile(flops=0)
    with pytest.raises(ConfigError):
        TrainingConfig(batch_size=0)
    assert HardwareProfile().replace(flops=None, cost_per_year=5.0).cost_per_year == 5.0


def test_load_model_config(tmp_path):
    path = write(tmp_path, "toy.cfg", "# toy model\nn=4\nvocab = 11\n\nd_emb=8  # width\nheads=2\nlayers=2\n")
    assert load_model_config(path) == ModelConfig(n=4, vocab=11, d_emb=8, heads=2, layers=2)


def test_malformed_line_is_named(tmp_path):
    path = write(tmp_path, "bad.cfg", "n=4\nvocab 11\n")
    with pytest.raises(ConfigError) as info:
        load_model_config(path)
    assert "line 2" in str(info.value)


def test_unknown_key(tmp_path):
    path = write(tmp_path, "bad.cfg", "n=4\nvocab=11\nd_model=8\n")
    with pytest.raises(ConfigError) as info:
        load_model_config(path)
    assert "d_model" in str(info.value) and "line 3" in str(info.value)


def test_missing_keys(tmp_path):
    path = write(tmp_path, "short.cfg", "n=4\nvocab=11\n")
    with pytest.raises(ConfigError) as info:
        load_model_config(path)
    assert "d_emb" in str(info.value)


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_model_config(tmp_path / "absent.cfg")


def test_hardware_profile_from_environment(tmp_path, monkeypatch):
    path = write(tmp_path, "gpu.cfg", "flops=600e12\ncost_per_year=20000\n")
    assert load_hardware_profile(path).flops == 600e12

    monkeypatch.setenv(HARDWARE_ENV, str(path))
    profile = default_hardware_profile()
    assert profile.cost_per_year == 20000.0
    assert profile.seconds_per_year == 3.156e7

    monkeypatch.delenv(HARDWARE_ENV)
    assert default_hardware_profile() == HardwareProfile()


def test_run_config_sources(tmp_path):
    assert RunConfig("estimate", preset="A").resolve_model_config().d_emb == 4096
    with pytest.raises(ConfigError):
        RunConfig("estimate", preset="A", config_path="x.cfg").resolve_model_config()
    with pytest.raises(ConfigError):
        RunConfig("estimate").resolve_model_config()
    default = ModelConfig(n=2, vocab=3, d_emb=4, heads=1, layers=1)
    assert RunConfig("verify").resolve_model_config(default) is default
    with pytest.raises(ConfigError):
        RunConfig("estimate", output_format="yaml")
