import hashlib
import json

import numpy as np
import pytest

from switchfb.channel import FeedforwardProfile, binary_adder, channel_to_document, profile_to_document
from switchfb.cli import main

from conftest import random_channel


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, doc in [
        ("adder", channel_to_document(binary_adder())),
        ("noisy", channel_to_document(random_channel(np.random.default_rng(3), 3, 3, 4))),
        ("half", profile_to_document(FeedforwardProfile.constant(0.5))),
        ("zero", profile_to_document(FeedforwardProfile.constant(0.0))),
        ("step", profile_to_document(FeedforwardProfile.step(0.5))),
        ("last", profile_to_document(FeedforwardProfile.from_blocks([1, 1, 0, 0]))),
        ("first", profile_to_document(FeedforwardProfile.from_blocks([0, 0, 1, 1]))),
    ]:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(doc))
        paths[name] = str(path)
    return paths


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_capacity(files, capsys):
    code, out = run(capsys, "capacity", files["adder"])
    assert code == 0 and "1.584963" in out.out


def test_region_thm1(files, capsys):
    code, out = run(capsys, "region", files["adder"], files["half"], "--which", "thm1")
    assert code == 0
    assert "0.792481" in out.out and "0.579380" in out.out and "holds" in out.out


def test_region_thm1_needs_constant_profile(files, capsys):
    code, out = run(capsys, "region", files["adder"], files["step"], "--which", "thm1")
    assert code == 2 and "constant" in out.err


def test_region_prop2_no_feedforward(files, capsys, tmp_path):
    code, _ = run(capsys, "region", files["adder"], files["zero"], "--which", "prop2", "--angles", "4",
                  "--restarts", "2", "--out", tmp_path / "o")
    doc = json.loads((tmp_path / "o" / "region.json").read_text())
    assert code == 0 and doc["regions"][0]["frontier"] == [[0.0, 0.0]]


def test_ksp_step_profile(files, capsys):
    code, out = run(capsys, "ksp", files["adder"], files["step"], "--B", "4")
    assert code == 0 and "[0.792481, 0.792481]" in out.out and "minimising b0" in out.out


def test_ksp_feedback_first_beats_feedback_last(files, capsys, tmp_path):
    vals = {}
    for name in ("first", "last"):
        run(capsys, "ksp", files["adder"], files[name], "--B", "4", "--out", tmp_path / name)
        vals[name] = json.loads((tmp_path / name / "ksp.json").read_text())["inner"]
    assert vals["first"] >= vals["last"] - 1e-9


def test_example2(capsys, tmp_path):
    code, out = run(capsys, "example2", "--alpha", "2")
    assert code == 0 and '"y_size": 24' in out.out
    code, out = run(capsys, "capacity", _write(tmp_path, out.out.split("\n", 1)[1]))
    assert code == 0 and "4.584963" in out.out


def _write(tmp_path, text):
    path = tmp_path / "e2.json"
    path.write_text(text)
    return str(path)


def test_simulate_sweep_csv(files, capsys, tmp_path):
    code, out = run(capsys, "simulate", files["adder"], "--p", "0.5", "--n", "30", "--B", "2", "--R1", "0.1",
                    "--epsilon", "0.8", "--trials", "10", "--sweep-axis", "n", "--sweep-values", "20,40",
                    "--format", "csv", "--out", tmp_path)
    assert code == 0
    lines = (tmp_path / "simulate.sweep.csv").read_text().splitlines()
    assert lines[0].startswith("axis_value,trials,errors") and len(lines) == 3


def test_simulate_check_flag(files, capsys):
    code, out = run(capsys, "simulate", files["adder"], "--p", "0.5", "--n", "60", "--B", "2", "--R1", "1.0",
                    "--R0", "0.1", "--epsilon", "0.8", "--trials", "20", "--engine", "ensemble",
                    "--check", "converse")
    assert code == 0 and "converse check" in out.out and "PASS" in out.out


def test_exit_code_validation(files, capsys):
    code, out = run(capsys, "simulate", files["adder"], "--p", "0.5", "--n", "30", "--trials", "0")
    assert code == 2 and "trials" in out.err
    code, _ = run(capsys, "capacity", "{")
    assert code == 2


def test_exit_code_convergence(files, capsys):
    code, out = run(capsys, "capacity", files["noisy"], "--max-iter", "1", "--tol", "1e-12")
    assert code == 3


def test_exit_code_resource_cap(capsys):
    code, out = run(capsys, "example2", "--alpha", "6")
    assert code == 4 and "resource cap" in out.err


def test_outputs_deterministic_with_manifest(files, capsys, tmp_path):
    argv = ["region", files["adder"], files["half"], "--which", "prop2", "--angles", "4", "--restarts", "2"]
    run(capsys, *argv, "--out", tmp_path / "a")
    run(capsys, *argv, "--out", tmp_path / "b")
    a = (tmp_path / "a" / "region.json").read_bytes()
    assert a == (tmp_path / "b" / "region.json").read_bytes()
    man = json.loads((tmp_path / "a" / "region.manifest.json").read_text())
    assert man["outputs"]["region.json"] == hashlib.sha256(a).hexdigest()
    assert set(man["inputs"]) == {files["adder"], files["half"]}
    assert man["seed"] == 0 and man["command"] == "region" and "duration_s" in man


def test_threads_flag_validated(files, capsys):
    code, _ = run(capsys, "capacity", files["adder"], "--threads", "0")
    assert code == 2
