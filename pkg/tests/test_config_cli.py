import json

import pytest

from scenred.cli import main, read_csv
from scenred.config import RunConfig, load_config
from scenred.errors import InvalidArgument

TINY = {
    "k": 2, "seed": 0, "seeds": [0, 1],
    "problem": {"family": "CFLP", "facilities": 2, "customers": 3, "scenarios": 4, "count": 3, "seed": 5},
    "reward": {"alpha": 0.5, "time_scale": 100.0},
    "ppo": {"env_count": 2, "minibatch": 2, "update_epochs": 1, "epochs": 1},
    "net": {"hidden_low": 4, "f1": 4, "hidden_high": 8, "embed": 8, "heads": 2, "critic_hidden": 4},
    "report": {"shuffles": 5},
    "train": {"checkpoint_every": 1},
}


@pytest.fixture
def cfg_path(tmp_path):
    data = dict(TINY, paths={"dataset": str(tmp_path / "data"), "out": str(tmp_path / "out")})
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def test_defaults_round_trip():
    cfg = RunConfig()
    again = load_config(None, env={}, overrides=None)
    assert again.to_json() == cfg.to_json()


def test_env_and_override_precedence(cfg_path):
    env = {"SCENRED_PPO_EPOCHS": "7", "SCENRED_K": "3"}
    cfg = load_config(cfg_path, env=env, overrides={"k": 4})
    assert cfg.ppo.epochs == 7 and cfg.k == 4
    assert cfg.net.embed == 8


def test_bad_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"ppo": {"nope": 1}}))
    with pytest.raises(InvalidArgument):
        load_config(p, env={})
    with pytest.raises(InvalidArgument):
        load_config(None, env={"SCENRED_PPO_EPOCHS": "many"})


def test_cli_pipeline(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["generate", "--config", str(cfg_path)]) == 0
    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    assert [e["id"] for e in manifest["instances"]] == ["cflp_0000", "cflp_0001", "cflp_0002"]
    assert main(["solve-ef", "--config", str(cfg_path), "--ef"]) == 0
    _, rows = read_csv(out / "solve_ef.csv")
    assert all(r["match"] == "1" for r in rows)
    assert main(["train", "--config", str(cfg_path)]) == 0
    assert (out / "checkpoints" / "ckpt_00000.json").exists()
    assert (out / "checkpoints" / "ckpt_00002.json").exists()
    echo, metrics = read_csv(out / "metrics.csv")
    assert echo["k"] == 2 and len(metrics) == 2
    ck = str(out / "policy.json")
    assert main(["evaluate", "--config", str(cfg_path), "--checkpoint", ck]) == 0
    _, rep = read_csv(out / "report.csv")
    assert {r["method"] for r in rep} == {"policy", "random", "kmedoids", "valueSpace"}
    assert len(rep) == 3 * 2 * 4
    assert all(r["wallSeconds"] == "" for r in rep)
    assert main(["order-cdf", "--config", str(cfg_path), "--checkpoint", ck]) == 0
    _, od = read_csv(out / "order_cdf.csv")
    assert len(od) == 3 * 2 * 6


def test_cli_exit_codes(cfg_path, tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["evaluate", "--config", str(cfg_path)])
    assert e.value.code == 1
    assert main(["train", "--config", str(cfg_path), "--dataset", str(tmp_path / "missing")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SystemExit) as e:
        main(["generate", "--config", str(bad)])
    assert e.value.code == 1


def test_checkpoint_width_mismatch_exit(cfg_path, tmp_path):
    assert main(["generate", "--config", str(cfg_path)]) == 0
    assert main(["train", "--config", str(cfg_path)]) == 0
    data = json.loads(cfg_path.read_text())
    data["net"]["embed"] = 16
    other = tmp_path / "wide.json"
    other.write_text(json.dumps(data))
    assert main(["evaluate", "--config", str(other), "--checkpoint", str(tmp_path / "out" / "policy.json")]) == 2
