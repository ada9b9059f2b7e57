import json
import os
import subprocess


def run(cli, *args, cwd=None):
    return subprocess.run([cli, *args], capture_output=True, text=True, cwd=cwd)


def test_missing_case_gives_usage_exit(cli_path, tmp_path):
    r = run(cli_path, "train", "--case", str(tmp_path / "nope.m"))
    assert r.returncode == 2
    assert "not found" in r.stderr


def test_missing_subcommand_gives_usage_exit(cli_path):
    r = run(cli_path)
    assert r.returncode == 2


def test_train_eval_compare_pipeline(cli_path, data_dir, tmp_path):
    case = os.path.join(data_dir, "case2.m")
    out = tmp_path / "run"
    r = run(cli_path, "train", "--case", case, "--epochs", "1", "--seed", "5",
            "--out", str(out))
    assert r.returncode == 0, r.stderr
    assert (out / "checkpoint.json").exists()
    assert (out / "history.csv").exists()
    assert (out / "manifest.json").exists()

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 5
    assert len(manifest["case_sha256"]) == 64

    header = (out / "history.csv").read_text().splitlines()[0]
    assert header.split(",")[:4] == ["iteration", "epoch", "sample_cost", "lambda_norm"]

    ev = tmp_path / "eval"
    r = run(cli_path, "eval", "--case", case, "--checkpoint", str(out / "checkpoint.json"),
            "--seed", "5", "--out", str(ev))
    assert r.returncode == 0, r.stderr
    metrics = json.loads((ev / "metrics.json").read_text())
    assert metrics["n_samples"] == 200

    bl = tmp_path / "baseline"
    r = run(cli_path, "eval", "--case", case, "--policy", "baseline", "--seed", "5",
            "--out", str(bl))
    assert r.returncode == 0, r.stderr

    r = run(cli_path, "compare", str(ev / "metrics.json"), str(bl / "metrics.json"),
            "--out", str(tmp_path / "table.csv"))
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "table.csv").exists()
    assert (tmp_path / "table.md").exists()
    assert r.stdout.count("|") > 5


def test_compare_requires_input(cli_path):
    r = run(cli_path, "compare")
    assert r.returncode == 2


def test_compare_single_input(cli_path, data_dir, tmp_path):
    case = os.path.join(data_dir, "case2.m")
    out = tmp_path / "single"
    r = run(cli_path, "eval", "--case", case, "--policy", "baseline", "--seed", "4",
            "--out", str(out))
    assert r.returncode == 0, r.stderr
    r = run(cli_path, "compare", str(out / "metrics.json"))
    assert r.returncode == 0
    assert r.stdout.count("\n") >= 3  # header + separator + one row


def test_checkpoint_case_mismatch(cli_path, data_dir, tmp_path):
    case2 = os.path.join(data_dir, "case2.m")
    case14 = os.path.join(data_dir, "case14.m")
    out = tmp_path / "run2"
    r = run(cli_path, "train", "--case", case2, "--epochs", "0", "--seed", "1",
            "--out", str(out))
    assert r.returncode == 0, r.stderr
    r = run(cli_path, "eval", "--case", case14, "--checkpoint", str(out / "checkpoint.json"),
            "--seed", "1", "--out", str(tmp_path / "bad"))
    assert r.returncode == 2
    assert "dimension" in r.stderr.lower() or "match" in r.stderr.lower()


def test_pf_subcommand_reports_state(cli_path, data_dir):
    r = run(cli_path, "pf", "--case", os.path.join(data_dir, "case2.m"))
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    assert len(doc["bus"]) == 2
    assert doc["bus"][0]["theta"] == 0.0
    assert "slack_p" in doc


def test_agc_mode_recorded_in_checkpoint(cli_path, data_dir, tmp_path):
    out = tmp_path / "agc"
    r = run(cli_path, "train", "--case", os.path.join(data_dir, "case14.m"),
            "--epochs", "0", "--mode", "agc", "--seed", "3", "--out", str(out))
    assert r.returncode == 0, r.stderr
    ckpt = json.loads((out / "checkpoint.json").read_text())
    assert ckpt["mode"] == "agc"
    assert ckpt["input_dim"] == 1
