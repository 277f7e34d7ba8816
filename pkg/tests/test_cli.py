import json
import struct

import pytest

from typer.testing import CliRunner

from pyscaling.cli import app

runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, list(args))


@pytest.fixture
def toy_config(tmp_path):
    path = tmp_path / "toy.cfg"
    path.write_text("n=4\nvocab=11\nd_emb=8\nheads=2\nlayers=2\nd_ff=32\n")
    return path


def test_estimate_json():
    result = invoke("estimate", "--preset", "A", "--format", "json")
    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert data["training_flops"] == pytest.approx(2.70e21, rel=0.01)
    assert data["parameters"] == 6711410688
    assert data["config"]["d_emb"] == 4096


def test_estimate_config_file(toy_config):
    result = invoke("estimate", "--config", str(toy_config), "--format", "json")
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["parameters"] == 1776


def test_estimate_faster_gpu():
    default = json.loads(invoke("estimate", "-p", "A", "-f", "json").output)
    fast = json.loads(invoke("estimate", "-p", "A", "-f", "json", "--gpu-flops", "600e12").output)
    assert fast["gpu_years"] == pytest.approx(default["gpu_years"] / 2)


def test_estimate_table_and_csv():
    result = invoke("estimate", "--preset", "C")
    assert result.exit_code == 0
    assert "Parameters" in result.output
    result = invoke("estimate", "--preset", "C", "--format", "csv", "--bytes-per-element", "2")
    assert result.exit_code == 0
    assert result.output.splitlines()[0] == "quantity,value"
    assert "kv_cache_memory_bytes" in result.output


def test_estimate_moe():
    result = invoke("estimate", "--moe", "deepseek", "--format", "json")
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["training_flops"] == pytest.approx(2.94e24, rel=0.01)


def test_estimate_errors(tmp_path):
    result = invoke("estimate", "--preset", "Z")
    assert result.exit_code == 2
    assert "Z" in result.output

    bad = tmp_path / "bad.cfg"
    bad.write_text("n=4\nvocab\n")
    result = invoke("estimate", "--config", str(bad))
    assert result.exit_code == 2
    assert "line 2" in result.output

    assert invoke("estimate").exit_code == 2


def test_verify_default_passes():
    result = invoke("verify", "--format", "json")
    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert data["passed"] is True


def test_verify_corrupted_expectation():
    assert invoke("verify", "--expect-offset", "1", "--no-gradients").exit_code == 1


def test_verify_heads_sweep():
    result = invoke("verify", "--heads", "1,2,4", "--no-gradients", "--format", "json")
    assert result.exit_code == 0, result.output
    sweep = [c for c in json.loads(result.output)["checks"] if c["name"].startswith("forward total, H=")]
    assert len(sweep) == 3
    assert len({c["measured"] for c in sweep}) == 1


def test_verify_guard():
    assert invoke("verify", "--preset", "A").exit_code == 3


def test_train_is_deterministic(tmp_path):
    first = invoke("train", "--steps", "3", "--batch-size", "1", "--seed", "2")
    second = invoke("train", "--steps", "3", "--batch-size", "1", "--seed", "2")
    assert first.exit_code == 0, first.output
    assert first.output == second.output
    lines = first.output.splitlines()
    assert len(lines) == 4
    assert lines[-1].startswith("initial ")


def test_train_missing_corpus(tmp_path):
    assert invoke("train", "--corpus", str(tmp_path / "none.txt")).exit_code == 2


def test_generate_zero_steps_echoes_prompt():
    result = invoke("generate", "--prompt", "row ", "--steps", "0")
    assert result.exit_code == 0
    assert result.output == "row \n"


def test_generate_is_reproducible_and_checked():
    first = invoke("generate", "--steps", "10", "--seed", "3")
    assert first.exit_code == 0
    assert len(first.output) == len("row ") + 10 + 1
    assert first.output == invoke("generate", "--steps", "10", "--seed", "3").output

    checked = invoke("generate", "--steps", "10", "--greedy", "--check")
    assert checked.exit_code == 0, checked.output
    assert "agrees" in checked.output


def test_generate_defaults_fill_the_window():
    result = invoke("generate")
    assert result.exit_code == 0, result.output
    assert result.output.startswith("row ")
    assert len(result.output) == 32 + 1

    explicit = invoke("generate", "--steps", "28")
    assert explicit.exit_code == 0
    assert explicit.output == result.output


def test_generate_rejects_negative_steps():
    assert invoke("generate", "--steps", "-1").exit_code == 2


def test_generate_overflow():
    assert invoke("generate", "--prompt", "row ", "--steps", "40").exit_code == 2


def test_train_checkpoint_then_generate(tmp_path):
    path = tmp_path / "demo.ckpt"
    assert invoke("train", "--steps", "2", "--batch-size", "1", "--save", str(path)).exit_code == 0
    result = invoke("generate", "--checkpoint", str(path), "--prompt", "life", "--steps", "5", "--greedy")
    assert result.exit_code == 0, result.output
    assert result.output.startswith("life")


def test_generate_with_corrupt_checkpoint(tmp_path):
    path = tmp_path / "broken.ckpt"
    header = struct.pack("<H7qBI", 1, 4, 11, 8, 2, 2, 32, -1, 1, 1)
    path.write_bytes(b"PYSCALE\x00" + header + b"\xff")
    result = invoke("generate", "--checkpoint", str(path))
    assert result.exit_code == 2
    assert "corrupt" in result.output
