import json

import numpy as np
import pytest

from azil.config import RunConfig, load_config, parse_config, save_config
from azil.errors import ConfigError, DataError
from azil.io import read_session, read_sessions, session_from_dict, session_to_dict, write_csv, write_session
from azil.scene import SceneConfig, simulate_session


def test_defaults_round_trip(tmp_path):
    cfg = RunConfig()
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg
    assert cfg.scene.layout_distribution == "table" and cfg.seeds == [2711, 2712, 2713]


def test_partial_config_keeps_other_defaults():
    cfg = parse_config('{"sessions": 12, "scene": {"duration": 60}, "bins": {"preset": "8"}}')
    assert cfg.sessions == 12 and cfg.scene.duration == 60 and cfg.bins.n_bins == 8
    assert cfg.scene.gyro_rate == 100.0 and cfg.train_loc == RunConfig().train_loc


def test_custom_edges_and_model_tuple():
    cfg = parse_config('{"bins": {"edges": [-90, 0, 90]}, "model": {"mlp_hidden": [10, 5]}}')
    assert cfg.bins.n_bins == 2 and cfg.model.mlp_hidden == (10, 5)


@pytest.mark.parametrize("text, line, fragment", [
    ('{\n  "sessions": 10,\n  "colour": 1\n}', 3, "unknown key 'colour'"),
    ('{\n  "scene": {\n    "duration": "long"\n  }\n}', 3, "scene.duration"),
    ('{\n  "sessions": 10,\n  "seeds": [1, 2,]\n}', 3, "invalid JSON"),
    ('{\n  "model": {\n    "hidden": 32,\n    "reduced": 8\n  }\n}', 4, "invalid 'model'"),
    ('{\n  "anchor": "middle"\n}', 2, "anchor"),
    ('{\n  "sessions": 1,\n  "bins": {"preset": "5"}\n}', 3, "bins"),
    ('{\n  "features": {\n    "static_mode": "guess"\n  }\n}', 3, "static_mode"),
    ('{\n  "use_gpu": true,\n  "sessions": 3\n}', 2, "use_gpu"),
])
def test_config_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "run.json")
    assert info.value.line == line
    assert str(info.value).startswith(f"run.json:{line}: ")
    assert fragment in str(info.value)


def test_bool_is_not_a_number():
    with pytest.raises(ConfigError):
        parse_config('{"sessions": true}')


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_session_round_trip(tmp_path):
    trace = simulate_session(SceneConfig(duration=40.0, group_size=3), 11, "s0001")
    path = write_session(tmp_path / "session_s0001.json", trace)
    back = read_session(path)
    assert back.session_id == "s0001" and back.layout.group_size == 3
    assert np.array_equal(back.gyro.omega, trace.gyro.omega) and np.array_equal(back.vad, trace.vad)
    assert np.array_equal(back.true_az, trace.true_az) and back.noise_level == trace.noise_level
    assert session_to_dict(back) == session_to_dict(trace)
    assert [t.session_id for t in read_sessions(tmp_path)] == ["s0001"]


def test_session_errors(tmp_path):
    doc = session_to_dict(simulate_session(SceneConfig(duration=40.0, group_size=2), 1, "a"))
    broken = dict(doc, vad={"self": doc["vad"]["self"][:-1], "partners": doc["vad"]["partners"]})
    with pytest.raises(DataError):
        session_from_dict(broken)
    with pytest.raises(DataError):
        session_from_dict({"meta": {}})
    (tmp_path / "session_x.json").write_text("{\n  oops\n}")
    with pytest.raises(DataError, match=r"session_x.json:2"):
        read_session(tmp_path / "session_x.json")
    with pytest.raises(DataError):
        read_sessions(tmp_path / "nowhere")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DataError):
        read_sessions(empty)


def test_write_csv(tmp_path):
    path = write_csv(tmp_path / "t.csv", [{"a": 1, "b": 2.5}, {"a": 3}])
    assert path.read_text() == "a,b\n1,2.5\n3,\n"
    assert json.loads(json.dumps({"ok": True}))
