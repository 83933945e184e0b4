#!/usr/bin/env python3
# Copyright (C) 2026 The ERASE Toolkit Authors
# SPDX-License-Identifier: Apache-2.0
"""End-to-end checks of the erase command-line tool.

Usage: cli_test.py <erase binary> <fixtures dir> <case>
Images are written as binary PGM so that only the standard library and numpy
are needed.
"""

import csv
import json
import math
import pathlib
import subprocess
import sys
import tempfile

import numpy as np

BIN = pathlib.Path(sys.argv[1])
FIXTURES = pathlib.Path(sys.argv[2])
CASE = sys.argv[3]


def run(*args, expect=0):
    proc = subprocess.run([str(BIN), *map(str, args)], capture_output=True, text=True)
    if proc.returncode != expect:
        raise AssertionError(
            f"exit {proc.returncode} (wanted {expect}) for {args}\nstdout:\n{proc.stdout}\nstderr:\n{proc.stderr}")
    return proc


def write_pgm(path, pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes())
    return path


def noise_image(path, w, h, seed, levels=256):
    rng = np.random.default_rng(seed)
    return write_pgm(path, rng.integers(0, levels, size=(h, w)) * (256 // levels))


def load(path):
    return json.loads(pathlib.Path(path).read_text())


# ---------------------------------------------------------------------------

def case_analyze_constant(tmp):
    img = write_pgm(tmp / "flat.pgm", np.full((84, 112), 128))
    out = run("analyze", "--image", img, "--out", tmp / "o").stdout
    assert out.split()[0] == "global_entropy" and float(out.split()[1]) == 0.0, out
    doc = load(tmp / "o" / "entropy_map.json")
    assert all(v == 0.0 for v in doc["values"])
    for name in ("entropy_heatmap.png", "low_entropy_mask.png", "high_entropy_mask.png"):
        assert (tmp / "o" / name).stat().st_size > 0, name


def case_analyze_golden(tmp):
    run("analyze", "--image", FIXTURES / "textured.png", "--out", tmp)
    got = load(tmp / "entropy_map.json")
    golden = load(FIXTURES / "textured_golden.json")
    assert got["geometry"]["rows"] == golden["rows"] and got["geometry"]["cols"] == golden["cols"]
    assert len(got["values"]) == len(golden["values"])
    worst = max(abs(a - b) for a, b in zip(got["values"], golden["values"]))
    assert worst <= 1e-12, worst
    assert abs(got["global"] - golden["global"]) <= 1e-12


def case_analyze_bins2(tmp):
    # Patches are either one colour or an exact 50/50 split of 0 and 255.
    px = np.zeros((56, 56), dtype=np.uint8)
    px[0:28, 28:56] = 255
    px[28:56, 0:28:2] = 255
    px[28:56, 28:56] = np.indices((28, 28)).sum(axis=0) % 2 * 255
    img = write_pgm(tmp / "binary.pgm", px)
    run("analyze", "--image", img, "--bins", 2, "--out", tmp)
    values = load(tmp / "entropy_map.json")["values"]
    ln2 = math.log(2.0)
    assert all(min(abs(v), abs(v - ln2)) <= 1e-12 for v in values), values
    assert sorted(round(v, 9) for v in values) == [0.0, 0.0, round(ln2, 9), round(ln2, 9)]


def case_pipeline_deterministic(tmp):
    img = noise_image(tmp / "n.pgm", 336, 280, 1, levels=16)
    for d in ("a", "b"):
        run("pipeline", "--image", img, "--policy", "qwen2.5-vl-7b", "--attn", "synthetic:42", "--out", tmp / d)
    for name in ("result.json", "cost_report.json", "cost_report.csv", "stage2_mask.png"):
        assert (tmp / "a" / name).read_bytes() == (tmp / "b" / name).read_bytes(), name
    doc = load(tmp / "a" / "result.json")
    for key in ("decision", "bypassed", "stage1_count", "stage2_count", "stage2_layer", "kept_indices"):
        assert key in doc, key
    assert doc["stage2_count"] == min(doc["k_final"], doc["stage1_count"])
    run("pipeline", "--image", img, "--attn", "synthetic:43", "--out", tmp / "c")
    assert load(tmp / "c" / "result.json") != doc


def case_pipeline_bypass(tmp):
    img = noise_image(tmp / "n.pgm", 280, 280, 2)
    run("pipeline", "--image", img, "--attn", "synthetic:1", "--k-final", 100000, "--out", tmp / "big")
    doc = load(tmp / "big" / "result.json")
    assert doc["bypassed"] is True
    assert doc["kept_indices"] == doc["stage1_kept"]
    assert doc["evicted"]["indices"] == []
    run("pipeline", "--image", img, "--attn", "synthetic:1", "--k-final", 5, "--out", tmp / "small")
    doc = load(tmp / "small" / "result.json")
    assert doc["bypassed"] is False and doc["stage2_count"] == 5
    run("pipeline", "--image", img, "--attn", "synthetic:1", "--k-final", 0.5, "--out", tmp / "frac")
    doc = load(tmp / "frac" / "result.json")
    assert doc["k_final"] == 50


def case_pipeline_provenance(tmp):
    img = noise_image(tmp / "n.pgm", 224, 224, 3)
    out = run("pipeline", "--image", img, "--policy", "qwen2.5-vl-7b", "--attn", "synthetic:0", "--out", tmp).stdout
    assert "builtin:qwen2.5-vl-7b" in out and "published" in out, out
    assert load(tmp / "result.json")["provenance"].startswith("builtin:qwen2.5-vl-7b")

    policy = tmp / "policy.json"
    policy.write_text(json.dumps({
        "model_id": "custom", "patch_h": 28, "patch_w": 28, "bins": 256,
        "thresholds": [3.0, 2.0, 1.0], "prune_ratios": [0.1, 0.2, 0.3, 0.4],
        "early_layer": 2, "late_layer": 17, "total_layers": 28,
        "final_budget": {"mode": "count", "value": 10}}))
    out = run("pipeline", "--image", img, "--policy", policy, "--attn", "synthetic:0", "--out", tmp / "c").stdout
    assert "file:" in out, out
    assert load(tmp / "c" / "result.json")["stage2_count"] == 10


def make_dump(dump, rows, cols, layers, seed, heads=2, dim=8, text=5):
    rng = np.random.default_rng(seed)
    n = rows * cols
    perm = rng.permutation(n)
    manifest = {
        "format_version": 1, "model_id": "qwen2.5-vl-7b", "num_layers": 28, "hidden_dim": 3584,
        "num_heads": heads, "head_dim": dim, "num_text_tokens": text, "num_vision_tokens": n,
        "vision_token_patch_indices": perm.tolist(), "layers": []}
    data = {}
    dump.mkdir(parents=True, exist_ok=True)
    for layer in layers:
        q = rng.standard_normal((heads, text, dim)).astype("<f4")
        k = rng.standard_normal((heads, n, dim)).astype("<f4")
        (dump / f"q_{layer}.bin").write_bytes(q.tobytes())
        (dump / f"k_{layer}.bin").write_bytes(k.tobytes())
        manifest["layers"].append({"index": layer, "q_file": f"q_{layer}.bin", "k_file": f"k_{layer}.bin"})
        data[layer] = (q.astype(np.float64), k.astype(np.float64))
    (dump / "manifest.json").write_text(json.dumps(manifest))
    return perm, data


def case_pipeline_dump(tmp):
    golden = load(FIXTURES / "textured_golden.json")
    rows, cols = golden["rows"], golden["cols"]
    perm, data = make_dump(tmp / "dump", rows, cols, [2, 17], seed=5)
    run("pipeline", "--image", FIXTURES / "textured.png", "--attn", f"dump:{tmp / 'dump'}", "--k-final", 4,
        "--out", tmp / "o")
    doc = load(tmp / "o" / "result.json")
    assert not doc["bypassed"]
    q, k = data[doc["stage2_layer"]]
    token_of_patch = np.argsort(perm)
    kept = np.array(doc["stage1_kept"])
    keys = k[:, token_of_patch[kept], :]
    logits = np.einsum("htd,hvd->htv", q, keys) / math.sqrt(q.shape[2])
    logits -= logits.max(axis=2, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=2, keepdims=True)
    expect = probs.mean(axis=0).sum(axis=0)
    got = np.array(doc["stage2_scores"])
    assert np.max(np.abs(got - expect)) <= 1e-5, np.max(np.abs(got - expect))
    order = sorted(range(len(expect)), key=lambda i: (-got[i], i))[:4]
    assert doc["kept_indices"] == sorted(int(kept[i]) for i in order)

    # A dump without the selected layer fails with a descriptive data error.
    make_dump(tmp / "wrong", rows, cols, [5], seed=6)
    err = run("pipeline", "--image", FIXTURES / "textured.png", "--attn", f"dump:{tmp / 'wrong'}", "--k-final", 4,
              "--out", tmp / "w", expect=2).stderr
    assert "no layer" in err and "available: 5" in err, err
    # Grid mismatch: the dump covers a different number of patches.
    make_dump(tmp / "small", 2, 2, [2, 17], seed=7)
    err = run("pipeline", "--image", FIXTURES / "textured.png", "--attn", f"dump:{tmp / 'small'}", "--k-final", 4,
              "--out", tmp / "s", expect=2).stderr
    assert "vision tokens" in err, err


def case_exit_codes(tmp):
    img = noise_image(tmp / "n.pgm", 56, 56, 4)
    run(expect=1)
    run("frobnicate", expect=1)
    run("pipeline", "--image", img, expect=1)
    run("pipeline", "--image", img, "--attn", "magic", expect=1)
    run("pipeline", "--image", img, "--attn", "synthetic:1", "--policy", "no-such-model", expect=1)
    run("pipeline", "--image", img, "--attn", "synthetic:1", "--k-final", "-3", expect=1)
    run("analyze", "--image", img, "--patch-size", "28by28", expect=1)
    run("optimize", "--iterations", 5, expect=1)
    run("optimize", "--alpha", 1.5, expect=1)
    err = run("analyze", "--image", tmp / "missing.png", expect=2).stderr
    assert "missing.png" in err, err
    (tmp / "garbage.png").write_bytes(b"\x89PNG garbage")
    run("analyze", "--image", tmp / "garbage.png", expect=2)
    run("analyze", "--image", img, "--pad", "reject", "--patch-size", "28x28", "--out", tmp / "r")
    run("analyze", "--image", img, "--pad", "reject", "--patch-size", "30x30", expect=2)
    run("--help")


def case_optimize(tmp):
    run("optimize", "--seed", 7, "--out", tmp / "a")
    run("optimize", "--seed", 7, "--out", tmp / "b")
    assert (tmp / "a" / "trace.csv").read_bytes() == (tmp / "b" / "trace.csv").read_bytes()
    with open(tmp / "a" / "trace.csv") as f:
        trace = list(csv.DictReader(f))
    assert len(trace) == 100
    for row in trace:
        if row["failed"] == "1":
            continue
        eff = sum(float(row[f"c_{i}"]) * float(row[f"p_{i}"]) for i in range(1, 5))
        f_val = 0.65 * float(row["accuracy"]) + 0.35 * eff
        assert abs(f_val - float(row["objective"])) <= 1e-12, row
    best = load(tmp / "a" / "best_policy.json")
    assert len(best["thresholds"]) == 3 and len(best["prune_ratios"]) == 4
    assert all(a > b for a, b in zip(best["thresholds"], best["thresholds"][1:]))
    summary = load(tmp / "a" / "summary.json")
    top_acc = max(float(r["accuracy"]) for r in trace)
    assert summary["best_by_accuracy"]["accuracy"] == top_acc


def case_optimize_alpha0(tmp):
    run("optimize", "--alpha", 0, "--iterations", 30, "--bench-count", 12, "--seed", 3, "--out", tmp)
    with open(tmp / "trace.csv") as f:
        trace = [r for r in csv.DictReader(f) if r["failed"] == "0"]
    summary = load(tmp / "summary.json")
    top = max(float(r["efficiency_term"]) for r in trace)
    assert summary["best_by_objective"]["efficiency_term"] == top, (summary, top)
    assert summary["best_by_objective"]["objective"] == top


def case_report(tmp):
    run("report", "--sides", *range(512, 4097, 512), "--out", tmp / "r")
    with open(tmp / "r" / "scaling.csv") as f:
        rows = list(csv.DictReader(f))
    assert [int(r["width"]) for r in rows] == list(range(512, 4097, 512))
    for a, b in zip(rows, rows[1:]):
        for col in ("tokens", "base_kv_bytes", "kv_bytes", "base_prefill_flops", "prefill_flops"):
            assert float(b[col]) > float(a[col]), col
    for r in rows:
        assert int(r["tokens"]) == int(r["grid_cols"]) * int(r["grid_rows"])
        assert int(r["grid_cols"]) == round(int(r["width"]) / 28)
    ref = load(tmp / "r" / "report.json")["reference"]
    assert ref["published"]["base_mib"] == 891.27
    assert abs(ref["model"]["base_mib"] - 891.27) / 891.27 < 0.02

    # All-simple corpus: constant images classify at the lowest level.
    for i in range(3):
        img = write_pgm(tmp / f"flat{i}.pgm", np.full((112, 112), 40 * i))
        run("pipeline", "--image", img, "--attn", "synthetic:1", "--out", tmp / "flat" / str(i))
    out = run("report", "--results", tmp / "flat", "--out", tmp / "rf").stdout
    corpus = load(tmp / "rf" / "report.json")["corpus"]
    assert corpus["count"] == 3 and corpus["mean_stage2_layer"] == 2, (out, corpus)

    # Mixed corpus: the mean ratio lies within the policy's range.
    for i, levels in enumerate((1, 2, 4, 16, 64, 256)):
        img = noise_image(tmp / f"mix{i}.pgm", 224, 224, 10 + i, levels)
        run("pipeline", "--image", img, "--attn", "synthetic:1", "--out", tmp / "mix" / str(i))
    run("report", "--results", tmp / "mix", "--out", tmp / "rm")
    corpus = load(tmp / "rm" / "report.json")["corpus"]
    assert corpus["count"] == 6
    assert 0.1732 <= corpus["mean_stage1_prune_ratio"] <= 0.5966, corpus
    run("report", "--results", tmp / "nothing.json", "--out", tmp / "rx", expect=2)


def main():
    fn = globals().get(f"case_{CASE}")
    if fn is None:
        print(f"unknown case {CASE}", file=sys.stderr)
        return 1
    with tempfile.TemporaryDirectory(prefix="erase_cli_") as d:
        fn(pathlib.Path(d))
    print(f"{CASE}: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
