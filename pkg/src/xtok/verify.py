"""Oracle-equivalence suites: randomized end-to-end checks of every
conversion operation against the brute-force engine.

Each suite returns a SuiteResult with the worst observed error; the CLI
``verify`` subcommand prints one line per suite and fails the process when
any suite fails.  The acceptance tests call these functions directly with
the tolerances pinned below.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .codec import encode, encoding, is_valid
from .convert_down import (
    advance,
    init_sampler,
    next_subtoken_dist,
    next_subtoken_masses,
    score_subset,
)
from .convert_up import StopSet, convert_prob_approx, convert_prob_exact, sample_token_rejection
from .cover import relative_cover_search
from .errors import XtokError
from .lm import draw_index, random_ngram_byte_lm, random_table_lm
from .losses import SoftLabelStep, kl_loss, pkl_grad, pkl_loss
from .oracle import EnumerationBudget, oracle_conversion_prob, oracle_cover_set
from .vocab import EOS, EOS_ID, BpeVocab, build_vocab

LEMMA1_TOL = 1e-9
CONVERT_UP_TOL = 1e-9
CHAIN_TOL = 1e-10
APPROX_TOL = 1e-9
GRID_TOL = 1e-4
GRAD_TOL = 1e-6


@dataclass
class SuiteResult:
    name: str
    trials: int
    max_err: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extra = f" {self.detail}" if self.detail else ""
        return f"{self.name}: {status} trials={self.trials} max_err={self.max_err:.3e}{extra}"


def _random_vocab(rng: np.random.Generator, max_symbols: int = 3, max_merges: int = 6) -> BpeVocab:
    n_sym = int(rng.integers(1, max_symbols + 1))
    n_merges = int(rng.integers(1, max_merges + 1))
    symbols = [bytes([c]) for c in b"abc"[:n_sym]]
    pairs: list[tuple[int, int]] = []
    seen = set(symbols)
    data_of = {i + 1: s for i, s in enumerate(symbols)}
    next_id = 1 + n_sym
    for _ in range(n_merges):
        for _ in range(60):
            left = int(rng.integers(1, next_id))
            right = int(rng.integers(1, next_id))
            data = data_of[left] + data_of[right]
            if data not in seen:
                break
        else:
            break
        seen.add(data)
        data_of[next_id] = data
        pairs.append((left, right))
        next_id += 1
    return build_vocab([EOS, *symbols], pairs)


def _random_string(rng: np.random.Generator, vocab: BpeVocab, max_len: int, min_len: int = 0) -> bytes:
    data = [tok.data for tok in vocab.alphabet[1:]]
    n = int(rng.integers(min_len, max_len + 1))
    return b"".join(data[int(rng.integers(0, len(data)))] for _ in range(n))


def run_lemma1_suite(trials: int = 500, seed: int = 7) -> SuiteResult:
    """score_subset against exhaustive enumeration on terminating table models."""
    rng = np.random.default_rng(seed)
    max_err = 0.0
    done = 0
    while done < trials:
        vocab = _random_vocab(rng)
        full = vocab.full_view()
        sub_bound = int(rng.integers(0, vocab.num_merges + 1))
        lm = random_table_lm(full, rng, max_tokens=3, row_depth=2)
        enc = encode(_random_string(rng, vocab, 6), vocab.view(sub_bound))
        got = score_subset(lm, enc)
        budget = EnumerationBudget(max_string_len=min(64, 3 * vocab.max_token_len()))
        res = oracle_conversion_prob(lm, enc, vocab.view(sub_bound), budget)
        if res.residual > 1e-12:
            return SuiteResult("lemma1", done, math.inf, False, "oracle not exhaustive")
        max_err = max(max_err, abs(got - res.value))
        done += 1
    return SuiteResult("lemma1", done, max_err, max_err <= LEMMA1_TOL)


def run_convert_up_suite(trials: int = 200, seed: int = 11, enumerable_trials: int = 40) -> SuiteResult:
    """convert_prob_exact: containment in n-gram oracle intervals, exact match
    on fully enumerable depth-limited fixtures."""
    rng = np.random.default_rng(seed)
    max_err = 0.0
    done = 0
    while done < trials:
        vocab = _random_vocab(rng, max_symbols=3, max_merges=5)
        lm = random_ngram_byte_lm(vocab.view(0), rng, order=2, eos_floor=0.25)
        enc = encode(_random_string(rng, vocab, 5, min_len=1), vocab.full_view())
        if not enc.ids:
            continue
        try:
            got = convert_prob_exact(lm, enc)
        except XtokError as exc:
            return SuiteResult("convert-up", done, math.inf, False, f"exact path failed: {exc}")
        res = oracle_conversion_prob(
            lm, enc, vocab.full_view(), EnumerationBudget(max_string_len=10)
        )
        if not res.contains(got, slack=CONVERT_UP_TOL):
            return SuiteResult(
                "convert-up", done, math.inf, False,
                f"value {got} outside [{res.lo}, {res.hi}]",
            )
        done += 1
    done_exact = 0
    while done_exact < enumerable_trials:
        vocab = _random_vocab(rng, max_symbols=2, max_merges=5)
        lm = random_table_lm(vocab.view(0), rng, max_tokens=7, row_depth=2)
        enc = encode(_random_string(rng, vocab, 4, min_len=1), vocab.full_view())
        if not enc.ids:
            continue
        got = convert_prob_exact(lm, enc)
        res = oracle_conversion_prob(
            lm, enc, vocab.full_view(), EnumerationBudget(max_string_len=8)
        )
        if res.residual > 1e-12:
            continue
        max_err = max(max_err, abs(got - res.value))
        done_exact += 1
    return SuiteResult(
        "convert-up", done + done_exact, max_err, max_err <= CONVERT_UP_TOL,
        f"containment={done} enumerable={done_exact}",
    )


def run_cover_suite(trials: int = 1000, seed: int = 13) -> SuiteResult:
    rng = np.random.default_rng(seed)
    done = 0
    while done < trials:
        vocab = _random_vocab(rng, max_symbols=3, max_merges=5)
        full = vocab.full_view()
        sub_bound = int(rng.integers(0, vocab.num_merges + 1))
        enc = encode(_random_string(rng, vocab, 6), vocab.view(sub_bound))
        got = relative_cover_search(enc, full).id_sets()
        want = oracle_cover_set(enc, full)
        if got != want:
            return SuiteResult(
                "cover", done, math.inf, False, f"mismatch on {enc.ids} over {vocab.merges}"
            )
        done += 1
    return SuiteResult("cover", done, 0.0, True)


def run_sampling_suite(
    tokens: int = 10_000, seed: int = 17, chain_checks: int = 200
) -> SuiteResult:
    """O(1) call budget per advance plus the chain-rule identity, at three bounds."""
    rng = np.random.default_rng(seed)
    vocab = build_vocab(
        [EOS, b"a", b"b"], [(1, 2), (3, 1), (2, 1), (3, 3)]
    )  # ab, aba, ba, abab
    full = vocab.full_view()
    max_err = 0.0
    total_advances = 0
    checks_left = chain_checks
    for sub_bound in (0, 1, 3):
        lm = random_table_lm(full, rng, max_tokens=8, row_depth=2)
        per_bound = tokens
        while per_bound > 0:
            state = init_sampler(lm, encoding([], sub_bound))
            for _ in range(64):
                dist = next_subtoken_dist(state)
                chosen = draw_index(rng, dist)
                per_bound -= 1
                if chosen == EOS_ID or per_bound <= 0:
                    break
                if checks_left > 0 and rng.random() < 0.02:
                    masses = next_subtoken_masses(state)
                    direct = score_subset(lm, state.basis.append(chosen))
                    max_err = max(max_err, abs(masses[chosen] - direct))
                    checks_left -= 1
                before = lm.calls
                state = advance(state, chosen, lm)
                total_advances += 1
                if lm.calls != before + 1:
                    return SuiteResult(
                        "sampling", total_advances, math.inf, False,
                        f"{lm.calls - before} model calls in one advance",
                    )
    return SuiteResult(
        "sampling", total_advances, max_err, max_err <= CHAIN_TOL,
        f"chain_checks={chain_checks - checks_left}",
    )


def run_approx_suite(trials: int = 20, seed: int = 19, max_beams: int = 4096) -> SuiteResult:
    """Monotone convergence of the beam approximation to the exact value."""
    rng = np.random.default_rng(seed)
    max_err = 0.0
    done = 0
    while done < trials:
        vocab = _random_vocab(rng, max_symbols=2, max_merges=4)
        lm = random_table_lm(vocab.view(0), rng, max_tokens=6, row_depth=2)
        enc = encode(_random_string(rng, vocab, 4, min_len=1), vocab.full_view())
        if not enc.ids:
            continue
        exact = convert_prob_exact(lm, enc)
        prev = math.inf
        value = math.inf
        beams = 1
        while beams <= max_beams:
            value = convert_prob_approx(
                lm, enc, n_beams=beams, stop=StopSet.eos_only(), max_len=8
            )
            if value > prev + 1e-12:
                return SuiteResult(
                    "approx", done, math.inf, False,
                    f"non-monotone at beams={beams}: {prev} -> {value}",
                )
            prev = value
            beams *= 2
        max_err = max(max_err, abs(value - exact))
        done += 1
    return SuiteResult("approx", done, max_err, max_err <= APPROX_TOL)


def approx_scatter_points(
    n_points: int = 40, seed: int = 19, n_beams: int = 6, max_len: int = 8
) -> list[tuple[float, float]]:
    """(exact, approximate) pairs on toy fixtures, for the scatter plot mode."""
    rng = np.random.default_rng(seed)
    points: list[tuple[float, float]] = []
    while len(points) < n_points:
        vocab = _random_vocab(rng, max_symbols=2, max_merges=4)
        lm = random_table_lm(vocab.view(0), rng, max_tokens=6, row_depth=2)
        enc = encode(_random_string(rng, vocab, 4, min_len=1), vocab.full_view())
        if not enc.ids:
            continue
        exact = convert_prob_exact(lm, enc)
        if exact <= 0.0:
            continue
        approx = convert_prob_approx(lm, enc, n_beams=n_beams, stop=StopSet.eos_only(), max_len=max_len)
        points.append((exact, approx))
    return points


def run_rejection_suite(draws: int = 100_000, seed: int = 23) -> SuiteResult:
    """Empirical next-token frequencies against exact conversion ratios."""
    rng = np.random.default_rng(seed)
    vocab = build_vocab([EOS, b"a", b"b"], [(1, 2), (3, 1)])
    full = vocab.full_view()
    lm = random_table_lm(vocab.view(0), rng, max_tokens=5, row_depth=2)
    enc = encoding([1], 2)
    ratios = {}
    for tid in full.token_ids():
        ext = enc.append(tid)
        if is_valid(ext, full):
            p = convert_prob_exact(lm, ext)
            if p > 0.0:
                ratios[tid] = p
    total = sum(ratios.values())
    counts = {tid: 0 for tid in ratios}
    draw_rng = np.random.default_rng(seed + 1)
    for _ in range(draws):
        tid = sample_token_rejection(lm, enc, draw_rng, stop=StopSet.eos_only(), max_len=8)
        counts[tid] += 1
    worst_sigma = 0.0
    for tid, p in ratios.items():
        expect = p / total
        sigma = math.sqrt(max(expect * (1 - expect) / draws, 1e-300))
        worst_sigma = max(worst_sigma, abs(counts[tid] / draws - expect) / sigma)
    return SuiteResult(
        "rejection", draws, worst_sigma, worst_sigma <= 3.0, "worst deviation in sigmas"
    )


def run_losses_suite(trials: int = 1000, seed: int = 29) -> SuiteResult:
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 8))
        d = rng.random(n) + 1e-3
        d = d / d.sum()
        res = kl_loss([d], [d])
        if abs(res.value) > 1e-12:
            return SuiteResult("losses", trials, abs(res.value), False, "KL not zero at equality")
        e = rng.random(n) + 1e-3
        e = e / e.sum()
        if kl_loss([d], [e]).value < -1e-15:
            return SuiteResult("losses", trials, math.inf, False, "KL negative")
    # grid-search the PKL minimizer on a 2-bin fixture via iterative refinement
    q = np.array([0.4, 0.25])
    lo = np.array([0.01, 0.01])
    hi = np.array([0.97, 0.97])
    best = None
    for _ in range(5):
        g1 = np.linspace(lo[0], hi[0], 21)
        g2 = np.linspace(lo[1], hi[1], 21)
        best_val = math.inf
        for p1, p2 in itertools.product(g1, g2):
            if p1 + p2 >= 1.0 - 1e-9:
                continue
            val = pkl_loss([SoftLabelStep((0, 1), q, np.array([p1, p2]))])
            if val < best_val:
                best_val, best = val, (p1, p2)
        span1 = (hi[0] - lo[0]) / 10
        span2 = (hi[1] - lo[1]) / 10
        lo = np.array([max(best[0] - span1, 1e-6), max(best[1] - span2, 1e-6)])
        hi = np.array([best[0] + span1, best[1] + span2])
    grid_err = max(abs(best[0] - q[0]), abs(best[1] - q[1]))
    max_err = max(max_err, grid_err)
    if grid_err > GRID_TOL:
        return SuiteResult("losses", trials, grid_err, False, "grid minimizer off teacher probs")
    # analytic gradient vs finite differences
    fd_rng = np.random.default_rng(seed + 1)
    for _ in range(50):
        n = int(fd_rng.integers(1, 4))
        q = fd_rng.random(n) * (0.9 / n)
        p = fd_rng.random(n) * (0.8 / n) + 0.01
        step = SoftLabelStep(tuple(range(n)), q, p)
        grad = pkl_grad([step])[0]
        eps = 1e-7
        for i in range(n):
            hi_p, lo_p = p.copy(), p.copy()
            hi_p[i] += eps
            lo_p[i] -= eps
            fd = (
                pkl_loss([SoftLabelStep(tuple(range(n)), q, hi_p)])
                - pkl_loss([SoftLabelStep(tuple(range(n)), q, lo_p)])
            ) / (2 * eps)
            rel = abs(grad[i] - fd) / max(1.0, abs(fd))
            if rel > GRAD_TOL:
                return SuiteResult("losses", trials, rel, False, "gradient mismatch")
    return SuiteResult("losses", trials, max_err, True)


SUITES = {
    "lemma1": run_lemma1_suite,
    "convert-up": run_convert_up_suite,
    "cover": run_cover_suite,
    "sampling": run_sampling_suite,
    "approx": run_approx_suite,
    "rejection": run_rejection_suite,
    "losses": run_losses_suite,
}


def run_suites(names: list[str], trials: int | None = None, seed: int | None = None):
    results = []
    for name in names:
        fn = SUITES[name]
        kwargs = {}
        if seed is not None:
            kwargs["seed"] = seed
        if trials is not None:
            if name == "sampling":
                kwargs["tokens"] = trials
            elif name == "rejection":
                kwargs["draws"] = trials
            else:
                kwargs["trials"] = trials
        results.append(fn(**kwargs))
    return results
