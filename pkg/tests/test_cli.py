import json

from swarmlearn.cli import main


def test_usage_errors_exit_1(capsys, tmp_path):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["synth", "--n", "ten", "--out", "x.csv"]) == 1
    assert "--n" in capsys.readouterr().err
    assert main(["report", "--in", str(tmp_path / "nope")]) == 1
    assert main(["run-node", "--config", str(tmp_path / "none.json")]) == 1


def test_runtime_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,0\n3,4,7\n")
    assert main(["partition", "--in", str(bad), "--fractions", "0.5,0.5", "--out", str(tmp_path / "p")]) == 2
    assert "LabelError" in capsys.readouterr().err


def test_synth_partition_run_node(tmp_path, capsys):
    data = tmp_path / "data.csv"
    assert main(["synth", "--n", "800", "--d", "6", "--class-sep", "1.0", "--seed", "3", "--out", str(data)]) == 0
    assert main(["partition", "--in", str(data), "--fractions", "0.5,0.5", "--out", str(tmp_path / "parts")]) == 0
    assert sorted(p.name for p in (tmp_path / "parts").iterdir()) == [
        "node0_train.csv", "node0_val.csv", "node1_train.csv", "node1_val.csv"]
    cfg = {"schema_version": 1, "node_id": 0, "train_csv": "parts/node0_train.csv",
           "val_csv": "parts/node0_val.csv", "model": {"hidden_dim": 4}, "max_epochs": 4,
           "exchange_interval": 2, "seeds": [], "checkpoint_dir": "ckpt", "out": "node0.json"}
    (tmp_path / "node0.cfg.json").write_text(json.dumps(cfg))
    assert main(["run-node", "--config", str(tmp_path / "node0.cfg.json")]) == 0
    out = json.loads((tmp_path / "node0.json").read_text())
    assert out["stop"] in ("max_epochs", "early_stop") and len(out["rounds"]) >= 1
    assert (tmp_path / "ckpt" / "node0.npz").exists()


def test_run_sim_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["run-sim", "--nodes", "4", "--seed", "1", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "seed_1.json").read_bytes()
    assert a == (tmp_path / "b" / "seed_1.json").read_bytes()
    res = json.loads(a)
    assert {c["arm"] for c in res["cells"]} == {"swarm"} and len(res["cells"]) == 4


def test_scenario_then_report(tmp_path, capsys):
    spec = {"name": "cli-tiny", "dataset": {"n": 1000, "d": 6, "class_sep": 0.8}, "seeds": [1, 2],
            "node": {"hidden_dim": 4, "epochs": 4}}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    assert main(["scenario", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "r")]) == 0
    assert sorted(p.name for p in (tmp_path / "r").iterdir()) == ["seed_1.json", "seed_2.json", "timing.json"]
    capsys.readouterr()
    assert main(["report", "--in", str(tmp_path / "r"), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "scenario,seed,node,arm,auc,sens,spec,f1,gap" and len(lines) == 1 + 18
    assert main(["report", "--in", str(tmp_path / "r")]) == 0
    assert "swarm - standalone mean AUC" in capsys.readouterr().out
    assert main(["report", "--in", str(tmp_path / "r"), "--format", "csv", "--summary"]) == 0
    assert capsys.readouterr().out.startswith("scenario,node,arm,n,auc_mean")


def test_unknown_spec_name_is_usage_error(tmp_path):
    assert main(["scenario", "--spec", "no_such_scenario", "--out", str(tmp_path)]) == 1
