import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridpump.config import (
    OUTPUT_ENV,
    ConfigError,
    ScenarioConfig,
    config_from_mapping,
    parse_config,
)
from gridpump.noise import DEFAULT_MAINS, NoiseModel

SQRT_PI = np.sqrt(np.pi)


def write(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    return p


def test_minimal_config_has_stated_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, 'code = "square"\n'))
    assert cfg.kappa == 0.37
    assert cfg.eps == pytest.approx(2 * SQRT_PI * 0.045)
    assert cfg.mu == pytest.approx(2 * SQRT_PI * 0.065)
    n = cfg.noise
    assert (n.gamma_down, n.gamma_up, n.gamma_deph) == (10.0, 10.0, 20.0)
    assert n.drift_sigma == pytest.approx(2 * np.pi * 6.0)
    assert n.mains.amplitudes == [25.0, 1.0, 29.0, 3.0, 31.0]
    assert n.recoil.mean_photons == 2.0 and n.recoil.mean_norm == 0.13
    model = n.model()
    assert model.mains == DEFAULT_MAINS


def test_unknown_key_is_named(tmp_path):
    p = write(tmp_path, 'code = "square"\nepsilonn = 0.2\n')
    with pytest.raises(ConfigError, match="epsilonn") as info:
        parse_config(p)
    assert "line 2" in str(info.value)


def test_unknown_nested_key(tmp_path):
    with pytest.raises(ConfigError, match="noise.gama_up"):
        parse_config(write(tmp_path, "[noise]\ngama_up = 1.0\n"))


def test_kappa_out_of_range(tmp_path):
    with pytest.raises(ConfigError, match="kappa") as info:
        parse_config(write(tmp_path, "kappa = 1.5\n"))
    assert "line 1" in str(info.value)


@pytest.mark.parametrize(
    "text",
    [
        'cycles = "ten"\n',
        "cycles = 2.5\n",
        "frame_corrected = 1\n",
        'code = "triangle"\n',
        "n_traj = 0\n",
        'mode = "guess"\n',
        "[noise.mains]\nfrequencies = [50.0]\n",
        "noise = 3\n",
        "eps = -0.1\n",
        "[scan]\nfree_points = 2\n",
    ],
)
def test_invalid_values(tmp_path, text):
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, text))


def test_syntax_error(tmp_path):
    with pytest.raises(ConfigError, match="syntax"):
        parse_config(write(tmp_path, "kappa = = 1\n"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "absent.toml")


def test_dotted_and_table_keys_agree(tmp_path):
    a = parse_config(write(tmp_path, "noise.gamma_up = 5.0\nscan.points = 7\n"))
    b = config_from_mapping({"noise": {"gamma_up": 5.0}, "scan": {"points": 7}})
    assert a == b


def test_integers_accepted_for_floats(tmp_path):
    assert parse_config(write(tmp_path, "noise.gamma_up = 5\n")).noise.gamma_up == 5.0


def test_noise_disabled_gives_silent_model():
    cfg = config_from_mapping({"noise": {"enabled": False}})
    assert cfg.noise.model() == NoiseModel.noiseless()


def test_output_dir(monkeypatch, tmp_path):
    cfg = ScenarioConfig(scenario="charfn")
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert str(cfg.output_dir()) == "runs/charfn"
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert cfg.output_dir() == tmp_path / "charfn"
    cfg.out = "elsewhere"
    assert str(cfg.output_dir()) == "elsewhere"


def _strip_none(d):
    return {k: _strip_none(v) if isinstance(v, dict) else v for k, v in d.items() if v is not None}


@given(
    st.sampled_from(["square", "hexagonal"]),
    st.floats(0.05, 0.8),
    st.integers(0, 50),
    st.integers(0, 2**31),
    st.booleans(),
)
def test_round_trip_through_mapping(code, kappa, cycles, seed, enabled):
    cfg = ScenarioConfig(code=code, kappa=kappa, cycles=cycles, seed=seed)
    cfg.noise.enabled = enabled
    assert config_from_mapping(_strip_none(cfg.to_dict())) == cfg.validate()
