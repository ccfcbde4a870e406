"""Acceptance suite: one test per release criterion.

Each test prints a `[PASS]/[FAIL] <criterion>` line (visible with -s or on
failure). The desk-scale learning run is a session fixture shared by the
tests that need it; run this module with `pytest tests/test_acceptance.py -v`.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from qsla.autodiff import ops
from qsla.autodiff.gradcheck import layer_checks, model_check
from qsla.autodiff.recurrent import LstmParams, bilstm_forward
from qsla.autodiff.tensor import Tensor
from qsla.evaluation import build_eval_report, pr_curve_and_ap
from qsla.model import QslaConfig, build_model
from qsla.signal import generate_dataset
from qsla.signal.dataset import stratified_split_from_cells
from qsla.signal.frames import quad_views_batch
from qsla.training import PlateauState, TrainConfig, train

CLI = [sys.executable, "-m", "qsla"]

DESK_CLASSES = ["BPSK", "QPSK", "8PSK", "QAM16"]
DESK_SNRS = [0, 6, 12, 18]


def report_line(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}" + (f" -- {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared desk-scale run
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def desk_run():
    t0 = time.perf_counter()
    ds = generate_dataset(DESK_CLASSES, DESK_SNRS, 200, seed=42)
    config = QslaConfig(num_classes=4, width_scale=0.5)
    model = build_model("qsla", config, seed=1)

    # loss of the untrained network on one training batch (no step taken)
    idx = np.asarray(ds.split.train[:128], dtype=np.int64)
    views = quad_views_batch(ds.iq[idx].astype(np.float32))
    logits = model.forward_views(views, "train")
    ce, _ = ops.softmax_crossentropy(logits, ds.labels[idx].astype(np.int64))
    initial_loss = float(ce.data) + float(model.l2_penalty().data)

    tconfig = TrainConfig(batch_size=128, max_epochs=25, seed=1)
    records, _ = train(model, ds, tconfig)
    report = build_eval_report(model, ds,
                               epoch_seconds=[r.seconds for r in records])

    ref_model = build_model("refcnn", config, seed=1)
    ref_records, _ = train(ref_model, ds, tconfig)
    ref_report = build_eval_report(ref_model, ds)
    elapsed = time.perf_counter() - t0

    acc18 = next(r.accuracy for r in report.snr_accuracy if r.snr_db == 18)
    ref_acc18 = next(r.accuracy for r in ref_report.snr_accuracy
                     if r.snr_db == 18)
    print(f"\n[info] desk run: qsla overall {report.overall_accuracy:.3f}"
          f" (18 dB {acc18:.3f}) vs refcnn {ref_report.overall_accuracy:.3f}"
          f" (18 dB {ref_acc18:.3f}); qsla >= refcnn:"
          f" {report.overall_accuracy >= ref_report.overall_accuracy}")
    return {
        "initial_loss": initial_loss,
        "records": records,
        "report": report,
        "ref_report": ref_report,
        "elapsed": elapsed,
        "acc18": acc18,
    }


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_gradient_suite_within_tolerances_and_budget():
    t0 = time.perf_counter()
    failures = []
    for seed in range(20):
        failures += [r.line() for r in layer_checks(seed=seed) if not r.passed]
    full = model_check(seed=0)
    if not (full.passed and full.tolerance == 1e-3):
        failures.append(full.line())
    elapsed = time.perf_counter() - t0
    report_line(
        "gradient suite (all layer ops, 20 seeds + reduced-width end-to-end)",
        not failures and elapsed < 120.0,
        f"{elapsed:.1f}s, failures: {failures or 'none'}")


def test_parameter_count_oracle():
    totals = {
        v: build_model(v, QslaConfig()).count_params().total
        for v in ("qsla", "only-bilstm", "only-attention")
    }
    qsla_ok = 615_000 * 0.95 <= totals["qsla"] <= 615_000 * 1.05
    bi_ok = 993_000 * 0.90 <= totals["only-bilstm"] <= 993_000 * 1.10
    attn_ok = 302_000 * 0.90 <= totals["only-attention"] <= 302_000 * 1.10
    order_ok = totals["only-attention"] < totals["qsla"] < totals["only-bilstm"]
    report_line(
        "parameter-count oracle (615k/993k/302k windows + strict ordering)",
        qsla_ok and bi_ok and attn_ok and order_ok,
        f"qsla={totals['qsla']:,} only-bilstm={totals['only-bilstm']:,}"
        f" only-attention={totals['only-attention']:,}")


def test_memory_oracle():
    model = build_model("qsla", QslaConfig())
    total = model.count_params().total
    footprint = model.memory_footprint()
    per_param_ok = abs(footprint - 4 * total) <= 0.10 * 4 * total
    reference_ok = 0.90 <= footprint / 2_502_000 <= 1.10
    report_line(
        "memory oracle (manifest bytes ~ 4 B/param, ~2502 kB at full width)",
        per_param_ok and reference_ok,
        f"{footprint:,} bytes for {total:,} params")


def test_oracle_equivalence_suite():
    from test_conv_pool_norm import conv1d_direct
    from test_evaluation import ap_brute_force
    from test_recurrent_attention import naive_lstm_sequence, _params

    problems = []

    # conv1d vs direct summation, bit-exact in 64-bit
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.standard_normal((2, 3, 13))
        w = rng.standard_normal((4, 3, 3))
        b = rng.standard_normal(4)
        got = ops.conv1d(Tensor(x), Tensor(w), Tensor(b)).data
        if got.tobytes() != conv1d_direct(x, w, b).tobytes():
            problems.append("conv1d not bit-exact")
            break

    # bilstm vs naive recurrence within 1e-5
    z = rng.standard_normal((10, 8))
    fwd, bwd = _params(rng, 8, 6), _params(rng, 8, 6)
    out = bilstm_forward(Tensor(z), fwd, bwd).data
    ref = np.concatenate([
        naive_lstm_sequence(z, fwd.w_x.data, fwd.w_h.data, fwd.b.data),
        naive_lstm_sequence(z, bwd.w_x.data, bwd.w_h.data, bwd.b.data,
                            reverse=True),
    ], axis=1)
    if np.max(np.abs(out - ref)) > 1e-5:
        problems.append("bilstm deviates from naive recurrence")

    # AP vs exhaustive brute force, exact, all label patterns to n=12
    for n in range(1, 13):
        scores = np.round(np.random.default_rng(n).random(n) * 4) / 4
        for bits in range(1, 2**n):
            truths = np.array([(bits >> i) & 1 for i in range(n)])
            if pr_curve_and_ap(scores, truths, 1).ap != \
                    ap_brute_force(scores, truths, 1):
                problems.append(f"AP mismatch at n={n}")
                break
        if problems and problems[-1].startswith("AP"):
            break

    # softmax and attention normalization within 1e-6
    probs = ops.softmax(Tensor(rng.standard_normal((64, 10))), axis=1).data
    if np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-6:
        problems.append("softmax rows do not normalize")
    from qsla.autodiff.attention import AttentionParams, attention_weights

    params = AttentionParams(Tensor(rng.standard_normal(16)),
                             Tensor(np.asarray(0.1)))
    alpha = attention_weights(Tensor(rng.standard_normal((8, 20, 16))), params)
    if np.max(np.abs(alpha.sum(axis=1) - 1.0)) > 1e-6:
        problems.append("attention weights do not normalize")

    report_line("oracle-equivalence suite (conv/bilstm/AP/normalization)",
                not problems, "; ".join(problems) or "all equivalent")


def test_desk_scale_learning_run(desk_run):
    ln4 = float(np.log(4.0))
    initial_ok = abs(desk_run["initial_loss"] - ln4) / ln4 <= 0.10
    acc_ok = desk_run["acc18"] >= 0.90
    rho = desk_run["report"].spearman_snr_accuracy
    rho_ok = rho is not None and rho > 0.8
    time_ok = desk_run["elapsed"] < 30 * 60
    report_line(
        "desk-scale learning run (18 dB acc >= 0.90, Spearman > 0.8,"
        " initial loss ~ ln 4, < 30 min)",
        initial_ok and acc_ok and rho_ok and time_ok,
        f"initial={desk_run['initial_loss']:.4f} (ln4={ln4:.4f}),"
        f" acc18={desk_run['acc18']:.3f}, spearman={rho:.3f},"
        f" wall={desk_run['elapsed'] / 60:.1f} min")


def test_recipe_fidelity_lr_trace():
    state = PlateauState(lr=0.001)
    trace = [state.update(1.0) for _ in range(17)]
    expected = [0.001] * 8 + [0.0004] * 8 + [0.00016]
    ok = all(abs(a - b) < 1e-12 for a, b in zip(trace, expected))
    report_line("recipe fidelity: LR trace 0.001 -> 0.0004 -> 0.00016",
                ok, f"trace tail {trace[7:9] + trace[15:17]}")


def test_recipe_fidelity_full_scale_split():
    split = stratified_split_from_cells([2000] * 210, seed=0)
    sizes = (len(split.train), len(split.val), len(split.test))
    ok = sizes == (336_000, 42_000, 42_000)
    report_line("recipe fidelity: 420,000-frame split = 336k/42k/42k",
                ok, str(sizes))


def test_recipe_fidelity_early_stop_restores_best(tmp_path):
    ds = generate_dataset(["BPSK", "QPSK"], [0, 18], 20, seed=11)
    model = build_model("qsla", QslaConfig(num_classes=2, width_scale=1 / 16),
                        seed=2)
    config = TrainConfig(batch_size=16, max_epochs=10, seed=2,
                         early_stop_patience=3)
    records, _ = train(model, ds, config, run_dir=tmp_path)
    best_epoch = min(records, key=lambda r: r.val_loss).epoch
    ok = ((tmp_path / "final.qslaw").read_bytes()
          == (tmp_path / f"{best_epoch}.qslaw").read_bytes())
    report_line("recipe fidelity: early stop restores best epoch bit-exactly",
                ok, f"best epoch {best_epoch} of {len(records)}")


def test_determinism_of_gen_train_eval(tmp_path):
    def tree(root: Path) -> dict:
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "timings.jsonl"
        }

    ds_path = tmp_path / "d.sigds"
    commands = (
        ["gen", "--out", str(ds_path), "--classes", "BPSK,QPSK",
         "--snrs", "0,18", "--frames-per-cell", "16", "--seed", "9"],
        ["train", "--dataset", str(ds_path), "--out", str(tmp_path / "run"),
         "--width-scale", "0.0625", "--batch-size", "16",
         "--max-epochs", "2", "--seed", "9", "--threads", "1"],
        ["eval", "--manifest", str(tmp_path / "run" / "final.qslaw"),
         "--dataset", str(ds_path), "--out", str(tmp_path / "rep"),
         "--threads", "1"],
    )
    mismatches = []
    snapshots = []
    for attempt in range(2):  # identical commands, identical paths
        for cmd in commands:
            result = subprocess.run(CLI + cmd, capture_output=True, text=True)
            if result.returncode != 0:
                mismatches.append(f"{cmd[0]} failed: {result.stderr[-200:]}")
        snapshots.append(tree(tmp_path))
    if not mismatches:
        if snapshots[0].keys() != snapshots[1].keys():
            mismatches.append("file sets differ")
        else:
            mismatches += [name for name in snapshots[0]
                           if snapshots[0][name] != snapshots[1][name]]
    report_line("determinism: gen/train/eval byte-identical across reruns",
                not mismatches, "; ".join(mismatches) or
                f"{len(snapshots[0])} files identical")
