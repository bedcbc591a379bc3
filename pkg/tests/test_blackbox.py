#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# SPDX-License-Identifier: GPL-3.0-only

"""External checks on the command-line script.

Checks in this file probe the application as a whole from the outside
(blackbox tests) marked by `blackbox`.  They are complemented by the
module tests labelled by `imported`."""

import os
import struct
import subprocess

import pytest

PRG = "scripts/sepdl"


def sepdl(args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        f"python {PRG} {args}", shell=True, capture_output=True, text=True
    )


@pytest.fixture
def tiny_data(tmp_path):
    path = tmp_path / "tiny.sdt"
    result = sepdl(f"synth --preset tiny --seed 1 --out {path}")
    assert result.returncode == 0, result.stderr
    return path


@pytest.mark.blackbox
def test_script_exists() -> None:
    """Check for the script's presence."""
    assert os.path.isfile(PRG), f"script {PRG} was not found"


@pytest.mark.blackbox
def test_version(capfd) -> None:
    subprocess.run(f"python {PRG} --version", shell=True, check=True)
    out, err = capfd.readouterr()
    assert out.startswith("sepdl ")


@pytest.mark.blackbox
def test_synth_writes_tensor_and_atoms(tiny_data) -> None:
    data = tiny_data.read_bytes()
    magic, g, v, t = struct.unpack("<4sIII", data[:16])
    assert (magic, g, v, t) == (b"SDT1", 4, 9, 12)
    assert len(data) == 16 + 8 * g * v * t
    atoms = (tiny_data.parent / "tiny.sdt.atoms.csv").read_text().splitlines()
    assert atoms[0] == "mode,atom,index,value"
    assert len(atoms) == 1 + 2 * 4 + 3 * 9


@pytest.mark.blackbox
def test_oracle_with_large_lambda_keeps_nothing(tiny_data, tmp_path) -> None:
    out = tmp_path / "oracle.csv"
    result = sepdl(f"oracle --data {tiny_data} --lambda 1000 --out {out}")
    assert result.returncode == 0, result.stderr
    assert result.stdout.strip().endswith("r_tilde=0")
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# objective_star=")
    assert lines[1] == "t,rank,objective"
    assert len(lines) == 2 + 12


@pytest.mark.blackbox
def test_certify_oracle_factorization(tiny_data, tmp_path) -> None:
    model = tmp_path / "star"
    result = sepdl(f"oracle --data {tiny_data} --lambda 0.05 --out {tmp_path / 'o.csv'} --factorize {model}")
    assert result.returncode == 0, result.stderr
    assert sorted(os.listdir(model)) == ["coef.sdt", "gamma.sdt", "psi.sdt"]

    same = sepdl(f"certify --data {tiny_data} --model {model} --lambda 0.05")
    assert same.returncode == 0, same.stderr
    header, row = same.stdout.splitlines()
    assert header == "iteration,g,p,c,verdict,t_star,tau_star"
    assert row.split(",")[4] == "GlobalOptimal"

    smaller = sepdl(f"certify --data {tiny_data} --model {model} --lambda 0.01")
    assert smaller.returncode == 3
    assert smaller.stdout.splitlines()[1].split(",")[4] != "GlobalOptimal"


@pytest.mark.blackbox
def test_learn_then_certify(tiny_data, tmp_path) -> None:
    model, log = tmp_path / "model", tmp_path / "log.csv"
    result = sepdl(
        f"learn --data {tiny_data} --lambda 0.05 --cert-tol 1e-3 --oracle-gap "
        f"--out-model {model} --log {log}"
    )
    assert result.returncode == 0, result.stderr
    assert result.stdout.startswith("certified=True")
    lines = log.read_text().splitlines()
    assert lines[0].startswith("# seed=0 lambda=0.050000000000000003 objective_star=")
    assert lines[1] == "round,iter_total,objective,r1,r2,g,p,c,verdict,gap"
    assert lines[-1].split(",")[8] == "GlobalOptimal"

    check = sepdl(f"certify --data {tiny_data} --model {model} --lambda 0.05 --cert-tol 1e-3")
    assert check.returncode == 0, check.stdout


@pytest.mark.blackbox
def test_learn_output_does_not_depend_on_threads(tiny_data, tmp_path) -> None:
    outputs = []
    for threads in (1, 3):
        log, model = tmp_path / f"log{threads}.csv", tmp_path / f"model{threads}"
        result = sepdl(
            f"--threads {threads} learn --data {tiny_data} --lambda 0.05 "
            f"--max-rounds 3 --log {log} --out-model {model}"
        )
        assert result.returncode == 0, result.stderr
        outputs.append((log.read_bytes(), (model / "coef.sdt").read_bytes()))
    assert outputs[0] == outputs[1]


@pytest.mark.blackbox
def test_denoise_sweep_reruns_give_identical_files(tiny_data, tmp_path) -> None:
    model, scores, out = tmp_path / "star", tmp_path / "psnr.csv", tmp_path / "clean.sdt"
    sepdl(f"oracle --data {tiny_data} --lambda 0.05 --out {tmp_path / 'o.csv'} --factorize {model}")
    args = (
        f"denoise --noisy {tiny_data} --reference {tiny_data} --model {model} "
        f"--patch 3 --stride 3 --sweep 0.001,0.1,3 --psnr-csv {scores} --out {out}"
    )
    outputs = []
    for _ in range(2):
        result = sepdl(args)
        assert result.returncode == 0, result.stderr
        assert result.stdout.startswith("best_lambda=")
        assert "psnr_denoised=" in result.stdout
        outputs.append((scores.read_bytes(), out.read_bytes()))
    assert outputs[0] == outputs[1]
    lines = scores.read_text().splitlines()
    assert lines[0] == "lambda,psnr"
    assert len(lines) == 1 + 3
    assert out.read_bytes()[:4] == b"SDT1"


@pytest.mark.blackbox
def test_psnr_of_identical_files_is_infinite(tiny_data) -> None:
    result = sepdl(f"psnr --a {tiny_data} --b {tiny_data}")
    assert result.returncode == 0, result.stderr
    assert result.stdout.strip() == "inf"


@pytest.mark.blackbox
@pytest.mark.parametrize(
    "args",
    [
        "learn --lambda 0.1",
        "synth --preset nosuch --out x.sdt",
        "oracle --data missing.sdt --lambda 0.1 --out o.csv",
        "oracle --data {data} --lambda -1 --out {out}",
    ],
)
def test_usage_errors_exit_with_one(tiny_data, tmp_path, args) -> None:
    result = sepdl(args.format(data=tiny_data, out=tmp_path / "o.csv"))
    assert result.returncode == 1
    assert "sepdl: error:" in result.stderr
