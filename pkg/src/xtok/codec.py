"""Sequential BPE encode/decode as merge and demerge passes.

Encoding is the composition of one left-to-right merge pass per rule, in
rank order; decoding is the demerge composition back down to the alphabet.
A pass scans pairs and skips two positions after a replacement.  The
trailing element is always appended when the scan ends without a match.
All operations are pure; results are cached per (vocab, ids, bound) since
validity checks re-encode heavily.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

from .errors import BoundOutOfRange, InvalidEncoding, LevelMismatch, UnknownSymbol
from .vocab import BpeVocab, MergeRule, SubsetView


@dataclass(frozen=True)
class Encoding:
    """A token-id sequence tagged with the vocabulary bound it lives at."""

    ids: tuple[int, ...]
    level: int

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids)

    def __getitem__(self, idx):
        return self.ids[idx]

    def append(self, token_id: int) -> "Encoding":
        return Encoding(self.ids + (token_id,), self.level)


def encoding(ids, level: int) -> Encoding:
    return Encoding(tuple(ids), level)


def check_encoding(enc: Encoding, view: SubsetView) -> None:
    """Raise unless every id fits the view and the levels agree."""
    if enc.level != view.bound:
        raise LevelMismatch(f"encoding level {enc.level} != view bound {view.bound}")
    for tid in enc.ids:
        if not view.contains_id(tid):
            raise InvalidEncoding(f"token id {tid} outside vocabulary of size {view.size}")


def _merge_pass(ids: tuple[int, ...], rule: MergeRule) -> tuple[int, ...]:
    out: list[int] = []
    i, n = 0, len(ids)
    while i < n:
        if i + 1 < n and ids[i] == rule.left and ids[i + 1] == rule.right:
            out.append(rule.result)
            i += 2
        else:
            out.append(ids[i])
            i += 1
    return tuple(out)


def _demerge_pass(ids: tuple[int, ...], rule: MergeRule) -> tuple[int, ...]:
    out: list[int] = []
    for tid in ids:
        if tid == rule.result:
            out.append(rule.left)
            out.append(rule.right)
        else:
            out.append(tid)
    return tuple(out)


def merge_step(enc: Encoding, rule: MergeRule) -> Encoding:
    """Apply the rank-i merge rule to a level i-1 encoding."""
    if enc.level != rule.rank - 1:
        raise LevelMismatch(f"merge rank {rule.rank} expects level {rule.rank - 1}, got {enc.level}")
    return Encoding(_merge_pass(enc.ids, rule), rule.rank)


def demerge_step(enc: Encoding, rule: MergeRule) -> Encoding:
    """Expand every occurrence of the rank-i token in a level-i encoding."""
    if enc.level != rule.rank:
        raise LevelMismatch(f"demerge rank {rule.rank} expects level {rule.rank}, got {enc.level}")
    return Encoding(_demerge_pass(enc.ids, rule), rule.rank - 1)


def _symbol_ids(vocab: BpeVocab, data: bytes) -> tuple[int, ...]:
    """Map bytes to alphabet ids by greedy longest match (EOS sentinel included)."""
    by_len = sorted(vocab.alphabet, key=lambda t: -len(t.data))
    out: list[int] = []
    pos = 0
    while pos < len(data):
        for tok in by_len:
            if data.startswith(tok.data, pos):
                out.append(tok.id)
                pos += len(tok.data)
                break
        else:
            raise UnknownSymbol(f"no alphabet symbol matches input at byte {pos}")
    return tuple(out)


@lru_cache(maxsize=1 << 16)
def _encode_ids(vocab: BpeVocab, data: bytes, bound: int) -> tuple[int, ...]:
    ids = _symbol_ids(vocab, data)
    for rule in vocab.merges[:bound]:
        ids = _merge_pass(ids, rule)
    return ids


def encode(data: bytes, target: SubsetView) -> Encoding:
    """Encode bytes by applying every merge up to the view's bound, in order."""
    return Encoding(_encode_ids(target.base, bytes(data), target.bound), target.bound)


def decode(enc: Encoding, source: SubsetView) -> bytes:
    """Demerge down to the alphabet and map symbols back to bytes."""
    check_encoding(enc, source)
    ids = enc.ids
    for rule in reversed(source.base.merges[: source.bound]):
        ids = _demerge_pass(ids, rule)
    return b"".join(source.base.token_bytes(tid) for tid in ids)


def relative_encode(enc: Encoding, target: SubsetView) -> Encoding:
    """Continue the merge passes from the encoding's level up to the target bound."""
    if enc.level > target.bound:
        raise BoundOutOfRange(f"cannot relative-encode level {enc.level} up to bound {target.bound}")
    ids = enc.ids
    for rule in target.base.merges[enc.level : target.bound]:
        ids = _merge_pass(ids, rule)
    return Encoding(ids, target.bound)


def relative_decode(enc: Encoding, target: SubsetView) -> Encoding:
    """Demerge from the encoding's level down to the target bound."""
    if target.bound > enc.level:
        raise BoundOutOfRange(f"cannot relative-decode level {enc.level} down to bound {target.bound}")
    ids = enc.ids
    for rule in reversed(target.base.merges[target.bound : enc.level]):
        ids = _demerge_pass(ids, rule)
    return Encoding(ids, target.bound)


@lru_cache(maxsize=1 << 17)
def _is_valid_ids(vocab: BpeVocab, ids: tuple[int, ...], bound: int) -> bool:
    data = b"".join(vocab.token_bytes(tid) for tid in ids)
    return _encode_ids(vocab, data, bound) == ids


def is_valid(enc: Encoding, view: SubsetView) -> bool:
    """Canonicity check: an encoding is valid iff it re-encodes to itself."""
    check_encoding(enc, view)
    return _is_valid_ids(view.base, enc.ids, view.bound)


@lru_cache(maxsize=1 << 16)
def _token_expansion(vocab: BpeVocab, token_id: int, bound: int) -> tuple[int, ...]:
    """Relative decoding of a single token down to ``bound`` (per-token demerge)."""
    if token_id < len(vocab.alphabet) + bound:
        return (token_id,)
    rule = vocab.merges[token_id - len(vocab.alphabet)]
    return _token_expansion(vocab, rule.left, bound) + _token_expansion(vocab, rule.right, bound)


def token_expansion(vocab: BpeVocab, token_id: int, bound: int) -> tuple[int, ...]:
    """Sub-token decomposition of one token at a lower bound.

    Equals ``relative_decode`` of the singleton encoding: demerging replaces
    tokens independently, so the composition acts per token.
    """
    return _token_expansion(vocab, token_id, bound)
