import json
import math

import pytest

from bnbrl.config import BlinkSchedule, ConfigError, RunConfig, load_config


def write(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return p


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.sensor.fov == 270.0 and cfg.sensor.blink is None
    assert cfg.ppo.effective_kl_coef == 1.0 / (cfg.ppo.n_envs * cfg.ppo.rollout_len)


def test_load_overrides_and_blink(tmp_path):
    cfg = load_config(write(tmp_path, "[episode]\nn_humans = 5\nrobot_goal = 1.0, 2.0\n"
                                      "[sensor]\nfov = 180\nmax_range = inf\nblink_on = 2\n"
                                      "[net]\nvariant = bndnn\n[ppo]\nkl_coef = 0.5\n"))
    assert cfg.episode.n_humans == 5 and cfg.episode.robot_goal == (1.0, 2.0)
    assert cfg.sensor.fov == 180.0 and math.isinf(cfg.sensor.max_range)
    assert cfg.sensor.blink == BlinkSchedule(2.0, 0.5)
    assert cfg.net.variant == "bndnn" and cfg.ppo.effective_kl_coef == 0.5


@pytest.mark.parametrize("text", [
    "[nope]\nx = 1\n",
    "[episode]\nn_humanz = 3\n",
    "[sensor]\nfov = 400\n",
    "[net]\nvariant = transformer\n",
    "[reward]\ngamma_bel = 1.5\n",
    "[episode]\ndt = 0\n",
])
def test_invalid_configs_raise(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_dict_round_trip_is_json_safe():
    cfg = RunConfig()
    cfg.sensor.max_range = math.inf
    cfg.sensor.blink = BlinkSchedule(1.5, 0.25)
    data = json.loads(json.dumps(cfg.to_dict(), allow_nan=False))
    assert data["sensor"]["max_range"] == "inf"
    back = RunConfig.from_dict(data)
    assert back == cfg
