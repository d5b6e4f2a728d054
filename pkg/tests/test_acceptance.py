"""Acceptance suite: one test per release criterion, each printing a
pass/fail line.  Run with `pytest tests/test_acceptance.py -v -s`.
"""

import time

from xtok.cli import main
from xtok.codec import encoding
from xtok.convert_up import collect_leaves, expand_signed_leaves
from xtok.cover import relative_cover_search
from xtok.verify import (
    CONVERT_UP_TOL,
    APPROX_TOL,
    CHAIN_TOL,
    LEMMA1_TOL,
    run_convert_up_suite,
    run_approx_suite,
    run_lemma1_suite,
    run_losses_suite,
    run_rejection_suite,
    run_sampling_suite,
)

from conftest import make_toy_vocab

A, B, AB, ABA = 1, 2, 3, 4


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {name}: {status}" + (f" ({detail})" if detail else ""))


def test_worked_example_fidelity():
    # cover_{1->2}([a, ab]) and the two-leaf collection of P_{V2}([a, ab]),
    # exact set/multiset equality, under one second.
    t0 = time.monotonic()
    vocab = make_toy_vocab()
    covers = relative_cover_search(encoding([A, AB], 1), vocab.full_view()).id_sets()
    cover_ok = covers == {(A, AB), (A, ABA)}
    leaves = expand_signed_leaves(vocab, encoding([A, AB], 2), 0)
    collected = collect_leaves(leaves, [A, B])
    leaves_ok = collected == {(A, A, B): 1, (A, A, B, A, A): -1}
    elapsed = time.monotonic() - t0
    ok = cover_ok and leaves_ok and elapsed < 1.0
    report("worked-example-fidelity", ok, f"elapsed={elapsed:.3f}s")
    assert cover_ok, covers
    assert leaves_ok, collected
    assert elapsed < 1.0


def test_lemma1_oracle_equivalence():
    t0 = time.monotonic()
    res = run_lemma1_suite(trials=500, seed=7)
    elapsed = time.monotonic() - t0
    ok = res.passed and elapsed < 120.0
    report("lemma1-oracle-equivalence", ok, f"max_err={res.max_err:.3e} elapsed={elapsed:.1f}s")
    assert res.passed, res.line()
    assert res.max_err <= LEMMA1_TOL
    assert elapsed < 120.0


def test_signed_recursion_oracle_equivalence():
    t0 = time.monotonic()
    res = run_convert_up_suite(trials=200, seed=11, enumerable_trials=40)
    elapsed = time.monotonic() - t0
    ok = res.passed and elapsed < 300.0
    report("signed-recursion-oracle-equivalence", ok, f"max_err={res.max_err:.3e} elapsed={elapsed:.1f}s")
    assert res.passed, res.line()
    assert res.max_err <= CONVERT_UP_TOL
    assert elapsed < 300.0


def test_o1_sampling_budget_and_chain_rule():
    res = run_sampling_suite(tokens=10_000, seed=17, chain_checks=200)
    ok = res.passed and res.trials >= 10_000
    report(
        "o1-sampling-budget",
        ok,
        f"advances={res.trials} chain_err={res.max_err:.3e} ({res.detail})",
    )
    assert res.passed, res.line()
    assert res.trials >= 10_000  # one model call per advance held throughout
    assert res.max_err <= CHAIN_TOL


def test_approximation_convergence(tmp_path):
    res = run_approx_suite(trials=20, seed=19)
    scatter = tmp_path / "scatter.tsv"
    code = main(
        [
            "convert-up", "--vocab", str(_vocab_file(tmp_path)), "--backend", "uniform",
            "--scatter", str(scatter), "--points", "20", "--beams", "64", "--max-len", "8",
        ]
    )
    rows = scatter.read_text().strip().splitlines()
    scatter_ok = code == 0 and rows[0] == "exact\tapprox" and len(rows) == 21
    ok = res.passed and scatter_ok
    report("approximation-convergence", ok, f"max_err={res.max_err:.3e} scatter_rows={len(rows) - 1}")
    assert res.passed, res.line()
    assert res.max_err <= APPROX_TOL
    assert scatter_ok


def test_rejection_sampling_consistency():
    res = run_rejection_suite(draws=100_000, seed=23)
    report("rejection-sampling-consistency", res.passed, f"worst_sigma={res.max_err:.2f}")
    assert res.passed, res.line()
    assert res.max_err <= 3.0


def test_loss_correctness():
    res = run_losses_suite(trials=1000, seed=29)
    report("loss-correctness", res.passed, f"max_err={res.max_err:.3e}")
    assert res.passed, res.line()


def _vocab_file(tmp_path):
    from xtok.vocab import export_merges

    p = tmp_path / "v.vocab"
    p.write_text(export_merges(make_toy_vocab()))
    return p
