"""Subset-to-Full conversion.

The exact path expands the adjacency recursion symbolically into a signed
multiset of base-level leaves (memoized, so nodes reached along multiple
paths cancel before any model evaluation), then evaluates the positive and
negative sides with log-sum-exp and one stable log-domain subtraction.

Every recursion node is checked for canonicity and contributes zero when it
fails: a non-canonical prefix has no probability mass, and skipping the
check provably overcounts (e.g. rules a.a->aa, a.aa->aaa on the prefix [a]
would subtract the never-occurring branch [a,aa]).

The approximate path enumerates stop-terminated continuations best-first,
subtracting the mass of those whose re-encoding diverges from the target;
rejection sampling draws bytes until a stop and emits the follow-on token
when the re-encoding commits to one.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .codec import Encoding, decode, demerge_step, encode, is_valid
from .errors import BoundOutOfRange, BudgetExceeded, MaxRejections, NegativeResult
from .lm import NEG_INF, LmBackend, draw_index
from .vocab import EOS_ID, BpeVocab

ZERO_CLAMP = 1e-12
NEGATIVE_TOL = 1e-9


@dataclass(frozen=True)
class StopSet:
    """Terminator predicate over continuation bytes; EOS always terminates."""

    stop_bytes: frozenset[int] = frozenset({0x20})

    @classmethod
    def eos_only(cls) -> "StopSet":
        return cls(frozenset())

    def hits(self, byte: int) -> bool:
        return byte in self.stop_bytes


def log_diff_exp(log_a: float, log_b: float) -> float:
    """log(exp(a) - exp(b)) with the documented clamp.

    Differences within 1e-12 of zero collapse to exactly 0 (-inf in log
    space); more than 1e-9 negative raises NegativeResult.  Subtraction of
    near-equal masses is the numerically dangerous site of the recursion,
    so the clamp absorbs cancellation noise instead of returning it.
    """
    if log_b == NEG_INF:
        return log_a
    if log_a > log_b:
        out = log_a + math.log(-math.expm1(log_b - log_a))
        return NEG_INF if out <= math.log(ZERO_CLAMP) else out
    # a <= b: the difference is <= 0; measure its magnitude linearly
    magnitude = math.exp(log_b) * -math.expm1(log_a - log_b) if log_a > NEG_INF else math.exp(log_b)
    if magnitude > NEGATIVE_TOL:
        raise NegativeResult(f"probability difference -{magnitude} below -{NEGATIVE_TOL}")
    return NEG_INF  # clamped: within tolerance of zero


def expand_signed_leaves(
    vocab: BpeVocab,
    enc: Encoding,
    base_bound: int,
    max_nodes: int | None = None,
) -> dict[tuple[int, ...], int]:
    """Signed leaf multiset of the conversion recursion at ``base_bound``.

    Keys are base-level id tuples, values are signed integer coefficients.
    Identical nodes met along different recursion paths are merged by the
    memo, performing the cancellation before evaluation.
    """
    if enc.level < base_bound:
        raise BoundOutOfRange(f"encoding level {enc.level} below base bound {base_bound}")
    memo: dict[tuple[tuple[int, ...], int], dict[tuple[int, ...], int]] = {}
    nodes = 0

    def go(ids: tuple[int, ...], level: int) -> dict[tuple[int, ...], int]:
        nonlocal nodes
        key = (ids, level)
        hit = memo.get(key)
        if hit is not None:
            return hit
        nodes += 1
        if max_nodes is not None and nodes > max_nodes:
            raise BudgetExceeded(f"conversion recursion exceeded {max_nodes} nodes")
        view = vocab.view(level)
        node = Encoding(ids, level)
        if not is_valid(node, view):
            result: dict[tuple[int, ...], int] = {}
        elif level == base_bound:
            result = {ids: 1}
        else:
            rule = vocab.rule(level)
            dec = demerge_step(node, rule)
            result = dict(go(dec.ids, level - 1))
            if ids and ids[-1] == rule.left:
                alt = go(dec.ids + (rule.right,), level - 1)
                for leaf, coeff in alt.items():
                    new = result.get(leaf, 0) - coeff
                    if new:
                        result[leaf] = new
                    else:
                        result.pop(leaf, None)
        memo[key] = result
        return result

    return dict(go(enc.ids, enc.level))


def collect_leaves(
    leaves: dict[tuple[int, ...], int],
    continuation_ids: Iterable[int],
) -> dict[tuple[int, ...], int]:
    """Collapse complementary leaf pairs using the prefix-measure identity
    P(e) = sum over continuations of P(e.x).

    ``continuation_ids`` must list every base-level symbol with nonzero
    continuation mass under the model at hand; in an EOS-free two-letter
    setting a (+e, -e.x) pair collapses to the single opposite-letter leaf.
    Only applied while it shrinks the expansion, so it is a
    display/verification aid, not a numeric step.
    """
    symbols = tuple(dict.fromkeys(continuation_ids))
    if len(symbols) > 2:
        return dict(leaves)
    out = {k: v for k, v in leaves.items() if v}
    changed = True
    while changed:
        changed = False
        # deepest parent first: inner correction terms collapse before outer ones
        for leaf, coeff in sorted(out.items(), key=lambda kv: (-len(kv[0]), kv[0])):
            if not coeff:
                continue
            for x in symbols:
                child = leaf + (x,)
                child_coeff = out.get(child, 0)
                if child_coeff == 0 or (coeff > 0) == (child_coeff > 0):
                    continue
                step = 1 if coeff > 0 else -1
                for sym in symbols:
                    if sym != x:
                        out[leaf + (sym,)] = out.get(leaf + (sym,), 0) + step
                out[leaf] = coeff - step
                out[child] = child_coeff + step
                out = {k: v for k, v in out.items() if v}
                changed = True
                break
            if changed:
                break
    return out


def evaluate_leaves(
    backend: LmBackend, leaves: dict[tuple[int, ...], int], base_bound: int
) -> float:
    """Signed evaluation in log space with a single clamped subtraction."""
    pos: list[float] = []
    neg: list[float] = []
    for ids, coeff in leaves.items():
        if coeff == 0:
            continue
        lp = backend.joint_logprob(Encoding(ids, base_bound))
        if lp == NEG_INF:
            continue
        (pos if coeff > 0 else neg).append(lp + math.log(abs(coeff)))
    log_pos = float(np.logaddexp.reduce(pos)) if pos else NEG_INF
    log_neg = float(np.logaddexp.reduce(neg)) if neg else NEG_INF
    return math.exp(log_diff_exp(log_pos, log_neg))


def convert_prob_exact(
    backend: LmBackend,
    enc: Encoding,
    max_nodes: int | None = None,
) -> float:
    """Probability of ``enc`` under a model at a lower bound (signed recursion).

    Returns 0 for invalid encodings.  ``max_nodes`` caps the recursion
    against the worst-case exponential blowup.
    """
    vocab = backend.view.base
    base = backend.view.bound
    if enc.level < base:
        raise BoundOutOfRange(f"encoding level {enc.level} below backend bound {base}")
    if not is_valid(enc, vocab.view(enc.level)):
        return 0.0
    leaves = expand_signed_leaves(vocab, enc, base, max_nodes)
    return evaluate_leaves(backend, leaves, base)


# --- beam-search approximation ------------------------------------------------


@dataclass(order=True)
class _Beam:
    neg_logp: float
    tiebreak: tuple[int, ...] = field(compare=True)
    data: bytes = field(compare=False)
    terminated: bool = field(compare=False, default=False)


def _terminated_continuations(
    backend: LmBackend,
    start: bytes,
    stop: StopSet,
    n_beams: int,
    max_len: int,
):
    """Best-first enumeration of stop-terminated continuations of ``start``.

    Yields (bytes-with-terminator, conditional logprob given ``start``,
    ends_with_eos) in non-increasing probability order; nested in n_beams,
    which makes the approximation monotone in the beam budget.
    """
    view = backend.view
    vocab = view.base
    start_ids = encode(start, view).ids
    heap: list[_Beam] = [_Beam(0.0, (), b"")]
    emitted = 0
    while heap and emitted < n_beams:
        beam = heapq.heappop(heap)
        if beam.terminated:
            emitted += 1
            yield start + beam.data, -beam.neg_logp, beam.data.endswith(vocab.eos.data)
            continue
        if len(beam.data) >= max_len:
            continue
        dist = backend.next_dist(Encoding(start_ids + encode(beam.data, view).ids, view.bound))
        with np.errstate(divide="ignore"):
            log_dist = np.log(dist)
        for tid in view.token_ids():
            lp = float(log_dist[tid])
            if lp == NEG_INF:
                continue
            tok = vocab.token_bytes(tid)
            child = _Beam(
                beam.neg_logp - lp,
                beam.tiebreak + (tid,),
                beam.data + tok,
                terminated=(tid == EOS_ID) or any(stop.hits(b) for b in tok),
            )
            heapq.heappush(heap, child)


def convert_prob_approx(
    backend: LmBackend,
    enc: Encoding,
    n_beams: int = 6,
    stop: StopSet = StopSet(),
    max_len: int = 32,
) -> float:
    """Byte-level beam approximation: P0(s) minus the mass of stop-terminated
    continuations whose re-encoding prefix diverges from ``enc``.

    The terminating byte is included in the re-encoded string (it blocks
    merges across the boundary).  Clamped to [0, 1].
    """
    if backend.view.bound != 0:
        raise BoundOutOfRange("approximation consumes a byte-level backend")
    vocab = backend.view.base
    view = vocab.view(enc.level)
    if not is_valid(enc, view):
        return 0.0
    s = decode(enc, view)
    log_p0 = backend.joint_logprob(Encoding(encode(s, backend.view).ids, 0))
    if log_p0 == NEG_INF:
        return 0.0
    correction: list[float] = []
    for full, cond_logp, has_eos in _terminated_continuations(backend, s, stop, n_beams, max_len):
        data = full[: -len(vocab.eos.data)] if has_eos else full
        seq = encode(data, view).ids
        if has_eos:
            seq = seq + (EOS_ID,) * len(enc)
        if seq[: len(enc)] != enc.ids:
            correction.append(log_p0 + cond_logp)  # joint P0 of the continuation
    log_corr = float(np.logaddexp.reduce(correction)) if correction else NEG_INF
    try:
        value = math.exp(log_diff_exp(log_p0, log_corr))
    except NegativeResult:
        value = 0.0  # best-effort path: over-subtraction clamps to the floor
    return min(max(value, 0.0), 1.0)


def sample_token_rejection(
    backend: LmBackend,
    enc: Encoding,
    rng: np.random.Generator,
    stop: StopSet = StopSet(),
    max_len: int = 32,
    max_rejections: int = 1000,
) -> int:
    """Sample bytes until a stop; emit the token the re-encoding commits to
    after ``enc``, rejecting paths that diverge (without recommitting)."""
    if backend.view.bound != 0:
        raise BoundOutOfRange("rejection sampling consumes a byte-level backend")
    vocab = backend.view.base
    view = vocab.view(enc.level)
    s = decode(enc, view)
    base_ids = encode(s, backend.view).ids
    for _ in range(max_rejections):
        tail: list[int] = []
        terminated_eos = False
        while len(tail) < max_len:
            dist = backend.next_dist(Encoding(base_ids + tuple(tail), 0))
            tid = draw_index(rng, dist)
            if tid == EOS_ID:
                terminated_eos = True
                break
            tail.append(tid)
            if any(stop.hits(b) for b in vocab.token_bytes(tid)):
                break
        data = s + b"".join(vocab.token_bytes(t) for t in tail)
        seq = encode(data, view).ids
        if terminated_eos:
            seq = seq + (EOS_ID,)
        if len(seq) > len(enc) and seq[: len(enc)] == enc.ids:
            return seq[len(enc)]
    raise MaxRejections(f"no accepted continuation in {max_rejections} attempts")
