import json

import pytest

from unimask.config import ConfigError, RunConfig
from unimask.kinematics import default_topology


def test_defaults_round_trip():
    cfg = RunConfig()
    back = RunConfig.from_dict(json.loads(cfg.to_json()))
    assert back == cfg
    assert back.to_dict()["topology"] == "default22"
    assert cfg.train.mask == cfg.mask


def test_train_mask_and_seed_default_to_top_level():
    cfg = RunConfig.from_dict({"seed": 5, "mask": {"kind": "forecast", "t_obs": 10, "horizon": 25}})
    assert cfg.train.mask.kind == "forecast" and cfg.train.seed == 5
    cfg = RunConfig.from_dict({"mask": {"kind": "forecast"}, "train": {"mask": {"kind": "completion", "p": 0.5}}})
    assert cfg.train.mask.kind == "completion" and cfg.mask.kind == "forecast"


@pytest.mark.parametrize("doc, msg", [
    ({"sed": 1}, "unknown key"),
    ({"schema_version": 2}, "schema_version"),
    ({"data": {"source": "web"}}, "data.source"),
    ({"data": {"source": "motion_dir"}}, "needs data.path"),
    ({"data": {"synthetic": {"frames": 3}}}, "unknown synthetic"),
    ({"data": {"test_fraction": 1.0}}, "test_fraction"),
    ({"model": {"dimension": 8}}, "unknown key"),
    ({"model": {"dim": 10, "heads": 4}}, "divisible"),
    ({"train": {"lr": -1}}, "lr must be"),
    ({"train": {"mask": {"kind": "forecast", "tobs": 3}}}, "train.mask"),
    ({"mask": {"kind": "zigzag"}}, "zigzag"),
    ({"mask": {"kind": "completion", "p": 2.0}}, "must lie in"),
    ({"topology": "smpl"}, "topology"),
    ({"topology": {"names": ["a"], "parents": [-1], "offsets": [[0, 0, 0]], "bones": 1}}, "unknown key"),
])
def test_schema_violations(doc, msg):
    with pytest.raises(ConfigError, match=msg):
        RunConfig.from_dict(doc)


def test_inline_topology_sets_joint_count():
    topo = {"names": ["a", "b", "c"], "parents": [-1, 0, 1], "offsets": [[0, 0, 0]] * 3}
    cfg = RunConfig.from_dict({"topology": topo, "model": {"patch_scheme": "S1"}})
    assert cfg.model.num_joints == 3 and cfg.topology.num_joints == 3
    assert cfg.topology != default_topology()


def test_overrides(tmp_path):
    (tmp_path / "a.bvh").write_text("")
    cfg = RunConfig().with_overrides(seed=3, kind="occlusion", p=0.2, steps=10, lr=1e-3, data=str(tmp_path))
    assert cfg.seed == cfg.train.seed == cfg.model.seed == 3
    assert cfg.mask.kind == cfg.train.mask.kind == "occlusion" and cfg.mask.p == 0.2
    assert cfg.train.steps == 10 and cfg.train.lr == 1e-3
    assert cfg.data.source == "bvh_dir" and cfg.data.path == str(tmp_path)
    assert RunConfig().with_overrides(data=str(tmp_path / "nope")).data.source == "motion_dir"
    assert RunConfig().with_overrides(seed=None) == RunConfig()
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(depth=3)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        RunConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{\n"seed": 1,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        RunConfig.load(bad)
    good = tmp_path / "good.json"
    good.write_text(RunConfig(seed=9).to_json())
    assert RunConfig.load(good).seed == 9
