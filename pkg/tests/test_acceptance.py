"""End-to-end acceptance gates, one test per criterion, stated tolerances.

Each test prints a single PASS/FAIL line directly to the terminal (bypassing
capture) so a full run reads as a checklist. Criteria 1-5 are fast numeric
gates; 6-10 run the real benchmark drivers at desk scale on one CPU core,
which takes roughly an hour in total (the architecture comparison dominates).
"""

import itertools
import math
import time

import numpy as np
import pytest

from tomodenoise.denoiser import pack_cholesky
from tomodenoise.denoiser.network import backward, init_transformer, loss, tree
from tomodenoise.estimators import linear_inversion
from tomodenoise.linalg import cholesky_factor
from tomodenoise.measurement import born_values, pauli_basis, sic_povm
from tomodenoise.metrics import (
    bures_distance,
    hs_distance_sq,
    optimal_axis_qfi,
    qfi,
)
from tomodenoise.pipeline.config import (
    MixedBenchmarkConfig,
    OatStudyConfig,
    PstarConfig,
    SamplingTableConfig,
)
from tomodenoise.pipeline.datasets import make_basis
from tomodenoise.pipeline.experiments import (
    run_architecture_benchmark,
    run_mixed_benchmark,
    run_oat_study,
    run_pstar_analysis,
    run_sampling_noise_table,
)
from tomodenoise.seeding import make_rng
from tomodenoise.states import (
    collective_spin,
    haar_random_ket,
    hs_random_state,
    oat_state,
)


@pytest.fixture
def announce(capsys):
    def _print(num, name, ok, detail):
        with capsys.disabled():
            verdict = "PASS" if ok else "FAIL"
            print(f"\ncriterion {num:>2} {name:<28} {verdict} | {detail}", flush=True)

    return _print


def table_config() -> SamplingTableConfig:
    # LI row only: the table gate is a property of linear inversion alone
    return SamplingTableConfig(include_nn=False)


@pytest.fixture(scope="module")
def table_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("table_a")
    return out, run_sampling_noise_table(table_config(), out_dir=out)


def test_criterion_01_round_trip_exactness(announce):
    cases = (
        ("sqrt-9", make_basis("sqrt", 9, 7), 9),
        ("sic-16", sic_povm(4), 16),
        ("pauli-16", pauli_basis(4), 16),
    )
    worst = 0.0
    for b, (label, basis, d) in enumerate(cases):
        rng = make_rng(11, b)
        for _ in range(100):
            rho = hs_random_state(d, rng)
            rec = linear_inversion(born_values(rho, basis), basis).state
            worst = max(worst, hs_distance_sq(rec, rho))
    ok = worst < 1e-10
    announce(1, "round-trip exactness", ok, f"worst D2 {worst:.3e} over 3 bases x 100 states")
    assert ok


def test_criterion_02_cholesky_identity_suite(announce):
    start = time.perf_counter()
    rng = make_rng(12, 0)
    dims = (2, 9, 16)
    worst_gap = 0.0
    bures_ok = True
    for i in range(10**4):
        d = dims[i % 3]
        A, B = hs_random_state(d, rng), hs_random_state(d, rng)
        CA, CB = cholesky_factor(A, eps=0.0), cholesky_factor(B, eps=0.0)
        factor_d2 = float(np.linalg.norm(CA - CB) ** 2)
        mse = float(np.sum((pack_cholesky(CA) - pack_cholesky(CB)) ** 2))
        worst_gap = max(worst_gap, abs(mse - factor_d2))
        bures_ok = bures_ok and bures_distance(A, B) <= factor_d2 + 1e-12
    elapsed = time.perf_counter() - start
    ok = worst_gap < 1e-12 and bures_ok and elapsed < 60.0
    announce(
        2, "vectorization identities", ok,
        f"MSE-vs-factor gap {worst_gap:.2e}, Bures bound "
        f"{'held' if bures_ok else 'VIOLATED'}, {elapsed:.1f}s / 10^4 pairs",
    )
    assert ok


def test_criterion_03_qfi_anchors(announce):
    css = oat_state(4, 0.0)
    cat = oat_state(4, math.pi / 2)
    err_css = abs(optimal_axis_qfi(css).qfi - 4.0)
    err_cat = abs(optimal_axis_qfi(cat).qfi - 16.0)

    spin = collective_spin(4)
    rng = make_rng(13, 0)
    worst_var = 0.0
    for _ in range(100):
        psi = haar_random_ket(16, rng)
        v = rng.standard_normal(3)
        v /= np.linalg.norm(v)
        J = v[0] * spin.jx + v[1] * spin.jy + v[2] * spin.jz
        mean = (psi.conj() @ J @ psi).real
        var = (psi.conj() @ J @ J @ psi).real - mean**2
        worst_var = max(worst_var, abs(qfi(np.outer(psi, psi.conj()), J) - 4.0 * var))
    ok = err_css < 1e-8 and err_cat < 1e-8 and worst_var < 1e-8
    announce(
        3, "QFI anchors", ok,
        f"coherent err {err_css:.1e}, cat err {err_cat:.1e}, "
        f"4xVar err {worst_var:.1e} over 100 pure states",
    )
    assert ok


def test_criterion_04_fidelity_table(announce, table_run):
    _, result = table_run
    targets = {1000000: 98.1, 100000: 94.3, 10000: 86.5, 1000: 67.0}
    got = {
        agg["n_trial"]: 100.0 * agg["fidelity_mean"]
        for agg in result.aggregates
        if agg["method"] == "LI-OAT"
    }
    gaps = {n: got[n] - t for n, t in targets.items()}
    ok = all(abs(g) <= 3.0 for g in gaps.values())
    detail = ", ".join(
        f"10^{int(math.log10(n))}: {got[n]:.2f} ({gaps[n]:+.2f})" for n in sorted(targets)
    )
    announce(4, "fidelity table, LI row", ok, detail + " vs reference +-3")
    assert ok


def test_criterion_05_gradient_correctness(announce):
    # fourth-order central stencil so truncation sits well below the gate;
    # the 1e-6 floor compares sub-roundoff gradient entries absolutely
    worst = 0.0
    eps = 1e-4
    for i in range(10):
        rng = make_rng(14, i)
        params = init_transformer(2, kernels=2, kernel_width=3, heads=1, rng=rng)
        v_in = rng.standard_normal(4)
        v_target = rng.standard_normal(4)
        grads = backward(params, v_in, v_target)
        for (_name, arr), g in zip(tree(params), grads):
            flat, gflat = arr.reshape(-1), g.reshape(-1)
            for j in range(flat.size):
                keep = flat[j]
                stencil = []
                for mult in (-2, -1, 1, 2):
                    flat[j] = keep + mult * eps
                    stencil.append(loss(params, v_in, v_target))
                flat[j] = keep
                a, b, c, e = stencil
                num = (a - 8.0 * b + 8.0 * c - e) / (12.0 * eps)
                rel = abs(num - gflat[j]) / max(abs(num), abs(gflat[j]), 1e-6)
                worst = max(worst, rel)
    ok = worst < 1e-4
    announce(
        5, "gradient correctness", ok,
        f"worst relative error {worst:.2e} over 10 inputs, every parameter",
    )
    assert ok


def test_criterion_06_undersampled_improvement(announce):
    start = time.perf_counter()
    result = run_mixed_benchmark(MixedBenchmarkConfig())
    elapsed = time.perf_counter() - start
    d2 = {
        agg["method"]: agg["d2_mean"]
        for agg in result.aggregates
        if agg["n_trial"] == 1000
    }
    li_gain = d2["LI"] - d2["LI-NN"]
    mle_gain = d2["MLE"] - d2["MLE-NN"]
    ok = d2["LI-NN"] < d2["LI"] and d2["MLE-NN"] <= d2["MLE"] and elapsed <= 3600.0
    announce(
        6, "undersampled improvement", ok,
        f"LI {d2['LI']:.4f} -> {d2['LI-NN']:.4f} (-{li_gain:.4f}), "
        f"MLE {d2['MLE']:.6f} -> {d2['MLE-NN']:.6f} (-{mle_gain:.6f}), "
        f"{elapsed / 60:.1f} min",
    )
    assert ok


def test_criterion_07_ood_certification(announce):
    start = time.perf_counter()
    result = run_oat_study(OatStudyConfig())
    elapsed = time.perf_counter() - start
    window = 0.35

    fid, nn_cross, li_peak, nn_peak = {}, {}, {}, {}
    for r in (0, 1):
        rows = [row for row in result.rows if row["realization"] == r]
        for method in ("LI", "LI-NN"):
            vals = [row["fidelity"] for row in rows if row["method"] == method]
            fid[(r, method)] = 100.0 * float(np.mean(vals))
        near = [row for row in rows if abs(row["time"] - math.pi / 2) < window]
        nn_near = [row["qfi_normalized"] for row in near if row["method"] == "LI-NN"]
        li_near = [row["qfi_normalized"] for row in near if row["method"] == "LI"]
        nn_cross[r] = max(nn_near) > 2.0
        nn_peak[r], li_peak[r] = max(nn_near), max(li_near)

    gaps = [fid[(r, "LI-NN")] - fid[(r, "LI")] for r in (0, 1)]
    gap_ok = all(g >= 5.0 for g in gaps)
    qfi_ok = all(nn_cross[r] and li_peak[r] < nn_peak[r] for r in (0, 1))
    means = [fid[(0, "LI-NN")], fid[(1, "LI-NN")]]
    band_ok = any(
        abs(means[0] - a) <= 5.0 and abs(means[1] - b) <= 5.0
        for a, b in itertools.permutations((88.7, 91.0))
    )
    ok = gap_ok and qfi_ok and band_ok and elapsed <= 7200.0
    announce(
        7, "out-of-distribution gates", ok,
        f"NN means {means[0]:.2f}/{means[1]:.2f} (targets 88.7/91.0 +-5), "
        f"NN-LI gaps {gaps[0]:+.1f}/{gaps[1]:+.1f}, QFI/L peaks NN "
        f"{nn_peak[0]:.2f}/{nn_peak[1]:.2f} vs LI {li_peak[0]:.2f}/{li_peak[1]:.2f} "
        f"(bound 2), {elapsed / 60:.1f} min",
    )
    assert ok


def test_criterion_08_pstar_analysis(announce):
    start = time.perf_counter()
    result = run_pstar_analysis(PstarConfig())
    elapsed = time.perf_counter() - start
    step_ok = all(row["within_one_step"] for row in result.rows)
    envelope_ok = all(row["envelope_ok"] for row in result.rows)
    worst_identity = 0.0
    for row in result.rows:
        q_at_pstar = (
            row["d0_sq"]
            + (row["d1_sq"] - row["d0_sq"] - row["d01_sq"]) * row["p_star"]
            + row["d01_sq"] * row["p_star"] ** 2
        )
        worst_identity = max(worst_identity, abs(q_at_pstar - row["d_star_sq"]))
    ok = step_ok and envelope_ok and worst_identity < 1e-12 and elapsed <= 1800.0
    pstars = ", ".join(f"{row['p_star']:.3f}" for row in result.rows)
    announce(
        8, "optimal depolarization", ok,
        f"p* = [{pstars}] each within one grid step of its scan, "
        f"parabola identity {worst_identity:.1e}, {elapsed / 60:.1f} min",
    )
    assert ok


def test_criterion_09_architecture_benchmark(announce):
    start = time.perf_counter()
    result = run_architecture_benchmark()
    elapsed = time.perf_counter() - start
    budget = result.manifest["budget"]
    counts = result.manifest["parameter_counts"]
    budget_ok = all(abs(c - budget) <= 0.05 * budget for c in counts.values())
    fid = {agg["method"]: 100.0 * agg["fidelity_mean"] for agg in result.aggregates}
    margin = fid["LI-NN"] - max(fid["Cnn2"], fid["Cnn4"])
    ok = budget_ok and margin >= 3.0 and elapsed <= 3 * 3600.0
    announce(
        9, "architecture comparison", ok,
        f"params {counts} vs budget {budget} (+-5%), fidelity transformer "
        f"{fid['LI-NN']:.2f} vs CNN {fid['Cnn2']:.2f}/{fid['Cnn4']:.2f} "
        f"(margin {margin:+.2f}, bar 3), {elapsed / 60:.1f} min",
    )
    assert ok


def test_criterion_10_byte_determinism(announce, table_run, tmp_path):
    out_a, _ = table_run
    run_sampling_noise_table(table_config(), out_dir=tmp_path)
    names = ("sampling_noise_table.csv", "sampling_noise_table_aggregates.csv")
    same = {
        name: (out_a / name).read_bytes() == (tmp_path / name).read_bytes()
        for name in names
    }
    ok = all(same.values())
    announce(
        10, "byte-identical re-run", ok,
        ", ".join(f"{n}: {'identical' if v else 'DIFFERS'}" for n, v in same.items()),
    )
    assert ok
