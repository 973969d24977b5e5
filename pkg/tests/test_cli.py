"""Command-line surface: exit codes and offline derivations."""

import json

import pytest

from veriledger.cli import main


@pytest.fixture
def initialized(tmp_path):
    assert main(["init", "--dir", str(tmp_path / "net"), "--nodes", "1", "--devices", "1"]) == 0
    return tmp_path / "net"


def test_init_writes_keys_membership_configs(initialized):
    out = initialized
    assert (out / "membership.json").exists()
    assert (out / "node-0.key").exists()
    assert (out / "node-0" / "config.json").exists()
    members = json.loads((out / "membership.json").read_text())["members"]
    roles = {r for m in members for r in m["roles"]}
    assert {"operator", "device-agent", "manufacturer", "auditor"} <= roles


def test_status_unknown_device_exit_zero(initialized, capsys):
    config = str(initialized / "node-0" / "config.json")
    code = main(["status", "dev-0", "--config", config])
    assert code == 0
    assert "Unknown" in capsys.readouterr().out


def test_status_json_flag(initialized, capsys):
    config = str(initialized / "node-0" / "config.json")
    assert main(["--json", "status", "dev-0", "--config", config]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["state"] == "Unknown"


def test_status_requires_exactly_one_source(initialized):
    with pytest.raises(SystemExit) as e:
        main(["status", "dev-0"])
    assert e.value.code == 2


def test_audit_clean_store_exit_zero(initialized, capsys):
    config = str(initialized / "node-0" / "config.json")
    assert main(["audit", "--config", config]) == 0
    assert "valid" in capsys.readouterr().out


def test_audit_tampered_store_exit_one(initialized, capsys):
    config_path = initialized / "node-0" / "config.json"
    assert main(["audit", "--config", str(config_path)]) == 0  # materialize the store
    log = initialized / "node-0" / "data" / "chains" / "main.log"
    blob = bytearray(log.read_bytes())
    blob[len(blob) // 2] ^= 0x01
    log.write_bytes(bytes(blob))
    code = main(["audit", "--config", str(config_path)])
    assert code == 1
    assert "first-invalid" in capsys.readouterr().out.replace('"', " ")


def test_manifest_build_and_output(tmp_path, capsys):
    root = tmp_path / "dev"
    (root / "bin").mkdir(parents=True)
    (root / "bin" / "app").write_bytes(b"x" * 100)
    out_file = tmp_path / "dev.manifest.json"
    code = main(
        ["manifest", "build", "--device", "dev-1", "--root", str(root), "--out", str(out_file)]
    )
    assert code == 0
    manifest = json.loads(out_file.read_text())
    assert manifest["device_id"] == "dev-1"
    assert manifest["entries"][0][0] == "bin/app"


def test_sim_run_missing_file_exit_two(tmp_path):
    assert main(["sim", "run", str(tmp_path / "missing.json")]) == 2


def test_sim_run_scenario(tmp_path, capsys):
    scenario = {
        "seed": 9,
        "duration_ms": 4000,
        "nodes": 4,
        "devices": {"count": 1, "artifacts_per_device": 1},
        "injections": [{"time_ms": 1500, "device_id": "dev-0"}],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario))
    out = tmp_path / "metrics.json"
    assert main(["sim", "run", str(path), "--out", str(out)]) == 0
    metrics = json.loads(out.read_text())
    assert metrics["seed"] == 9
    assert len(metrics["detections"]) == 1


def test_sim_run_invalid_scenario_exit_one(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"duration_ms": 100, "injections": [{"time_ms": 500, "device_id": "dev-0"}]}))
    assert main(["sim", "run", str(path)]) == 1
