"""Brute-force ground truth for small instances.

Everything here re-derives results from definitions with its own encode
path (repeated leftmost single-pair merging rather than the codec's
skip-2 passes), so agreement between this module and the main ones is a
meaningful check rather than a shared-bug tautology.  Only the vocab type
and the backend under measurement are shared.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codec import Encoding
from .errors import BudgetIntractable
from .lm import LmBackend
from .vocab import EOS_ID, BpeVocab, SubsetView


@dataclass(frozen=True)
class EnumerationBudget:
    max_string_len: int = 12
    require_eos: bool = False

    def __post_init__(self) -> None:
        if self.max_string_len > 64:
            raise BudgetIntractable(f"max_string_len {self.max_string_len} is not desk-scale")


@dataclass(frozen=True)
class OracleResult:
    """Matched mass plus a rigorous half-width for the unexplored remainder.

    ``explored`` is the terminated mass enumerated (matched or not); with
    pruning disabled, explored + residual accounts for the whole measure.
    """

    value: float
    residual: float
    explored: float = 0.0

    @property
    def lo(self) -> float:
        return self.value

    @property
    def hi(self) -> float:
        return self.value + self.residual

    def contains(self, x: float, slack: float = 1e-9) -> bool:
        return self.lo - slack <= x <= self.hi + slack


def oracle_encode(vocab: BpeVocab, ids: tuple[int, ...], bound: int) -> tuple[int, ...]:
    """Encode by merging the leftmost pair occurrence, one at a time, per rank."""
    out = list(ids)
    for rule in vocab.merges[:bound]:
        while True:
            for i in range(len(out) - 1):
                if out[i] == rule.left and out[i + 1] == rule.right:
                    out[i : i + 2] = [rule.result]
                    break
            else:
                break
    return tuple(out)


def oracle_bytes_to_ids(vocab: BpeVocab, data: bytes) -> tuple[int, ...]:
    out: list[int] = []
    pos = 0
    symbols = sorted(vocab.alphabet, key=lambda t: -len(t.data))
    while pos < len(data):
        for tok in symbols:
            if data.startswith(tok.data, pos):
                out.append(tok.id)
                pos += len(tok.data)
                break
        else:
            raise ValueError(f"byte {pos} matches no symbol")
    return tuple(out)


def oracle_encode_bytes(vocab: BpeVocab, data: bytes, bound: int) -> tuple[int, ...]:
    return oracle_encode(vocab, oracle_bytes_to_ids(vocab, data), bound)


def oracle_expand(vocab: BpeVocab, token_id: int, bound: int) -> tuple[int, ...]:
    """Recursive decomposition of one token down to ``bound``."""
    if token_id < len(vocab.alphabet) + bound:
        return (token_id,)
    rule = vocab.merges[token_id - len(vocab.alphabet)]
    return oracle_expand(vocab, rule.left, bound) + oracle_expand(vocab, rule.right, bound)


def oracle_relative_decode(vocab: BpeVocab, ids: tuple[int, ...], bound: int) -> tuple[int, ...]:
    out: tuple[int, ...] = ()
    for tid in ids:
        out += oracle_expand(vocab, tid, bound)
    return out


def oracle_decode(vocab: BpeVocab, ids: tuple[int, ...]) -> bytes:
    return b"".join(vocab.token_bytes(t) for t in oracle_relative_decode(vocab, ids, 0))


def oracle_is_valid(vocab: BpeVocab, ids: tuple[int, ...], bound: int) -> bool:
    return oracle_encode_bytes(vocab, oracle_decode(vocab, ids), bound) == ids


def oracle_cover_set(
    enc: Encoding, full: SubsetView
) -> set[tuple[int, ...]]:
    """Definition-level cover search: every (prefix lift, token) candidate is
    filtered by the two cover conditions directly, with no shortcuts."""
    vocab = full.base
    sub_bound = enc.level
    if len(enc) == 0:
        return {()}
    covers: set[tuple[int, ...]] = set()
    for j in range(len(enc)):  # candidate last token starts at sub-token j
        left = oracle_encode(
            vocab, oracle_relative_decode(vocab, enc.ids[:j], 0), full.bound
        )
        for tid in range(full.size):
            cand = left + (tid,)
            # condition 1: a valid encoding (prefix of the encoding of some sequence)
            if not oracle_is_valid(vocab, cand, full.bound):
                continue
            # condition 2: the demerged prefix is exact and the basis remainder
            # is a prefix of the last token's expansion
            if oracle_relative_decode(vocab, cand[:-1], sub_bound) != enc.ids[:j]:
                continue
            expansion = oracle_expand(vocab, tid, sub_bound)
            remainder = enc.ids[j:]
            if expansion[: len(remainder)] != remainder:
                continue
            covers.add(cand)
    return covers


def oracle_conversion_prob(
    backend: LmBackend,
    enc: Encoding,
    target: SubsetView,
    budget: EnumerationBudget = EnumerationBudget(),
    prune: bool = True,
) -> OracleResult:
    """Enumerate the backend's sequence tree and bin terminated sequences by
    whether their re-encoding under the target view begins with ``enc``.

    Subtrees whose bytes already diverge from the target's decoded bytes are
    pruned (an encoding-prefix match forces a byte-prefix match).  Matched
    open-tail classes are credited without termination only when the target
    is the alphabet itself, where the match is decided by bytes alone;
    ``require_eos`` forces terminated-only accounting everywhere.  With
    ``prune=False`` no subtree is discarded and explored + residual sums to 1.
    """
    vocab = target.base
    want = enc.ids
    if len(want) == 0:
        return OracleResult(1.0, 0.0)
    want_data = want
    trailing_eos = 0
    while want_data and want_data[-1] == EOS_ID:
        want_data = want_data[:-1]
        trailing_eos += 1
    if EOS_ID in want_data or trailing_eos > 1:
        return OracleResult(0.0, 0.0)  # interior EOS never occurs
    want_bytes = oracle_decode(vocab, want_data)
    byte_target = target.bound == 0 and not budget.require_eos and trailing_eos == 0

    def matches_terminated(data: bytes) -> bool:
        seq = oracle_encode_bytes(vocab, data, target.bound) + (EOS_ID,) * len(want)
        return seq[: len(want)] == want

    value = 0.0
    residual = 0.0
    explored = 0.0
    view = backend.view

    def walk(prefix_ids: tuple[int, ...], data: bytes, p: float) -> None:
        nonlocal value, residual, explored
        if p <= 0.0:
            return
        if byte_target and prune and len(data) >= len(want_bytes):
            value += p  # bytes match (guaranteed by pruning); every completion matches
            return
        dist = backend.next_dist(Encoding(prefix_ids, view.bound))
        p_eos = p * float(dist[EOS_ID])
        if p_eos > 0.0:
            explored += p_eos
            if matches_terminated(data):
                value += p_eos
        for tid in view.token_ids():
            if tid == EOS_ID:
                continue
            q = p * float(dist[tid])
            if q <= 0.0:
                continue
            child_data = data + vocab.token_bytes(tid)
            if prune:
                k = min(len(child_data), len(want_bytes))
                if child_data[:k] != want_bytes[:k]:
                    continue  # decided mismatch: no completion can match
                if target.bound == 0 and trailing_eos == 1 and len(child_data) > len(want_bytes):
                    continue  # exact termination required; longer strings can't match
            if len(child_data) > budget.max_string_len:
                residual += q
                continue
            walk(prefix_ids + (tid,), child_data, q)

    walk((), b"", 1.0)
    return OracleResult(value, residual, explored)
