"""Relative cover-encoding search.

A cover of a basis encoding (at bound M') is a full-vocabulary encoding
whose demerged form begins with the basis, with its last token starting
inside the basis.  The search walks split positions of the decoded string,
proposes every full token whose bytes extend the suffix from that split,
and keeps candidates passing both the canonicity check and the sub-level
re-encode prefix check.

Only split positions within the longest token's reach of the string tail
are scanned: a token of byte-length L cannot start more than L-1 bytes
before the end, so earlier splits can never host a covering last token.
The oracle suite checks this restriction exhaustively against the
unrestricted definition-level search.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codec import (
    Encoding,
    decode,
    encode,
    is_valid,
    relative_encode,
    token_expansion,
)
from .errors import InvalidBasis
from .vocab import EOS_ID, BpeVocab, SubsetView


@dataclass(frozen=True)
class CoverEntry:
    """One cover encoding plus its pending sub-token tail beyond the basis.

    ``logp`` is attached by the scoring layer; the search leaves it None.
    """

    ids: tuple[int, ...]
    tail: tuple[int, ...]
    logp: float | None = None


@dataclass(frozen=True)
class CoverSet:
    basis: Encoding
    level: int  # the full bound M the entries live at
    entries: tuple[CoverEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def id_sets(self) -> set[tuple[int, ...]]:
        return {e.ids for e in self.entries}


def token_prefix_index(full: BpeVocab) -> dict[bytes, set[int]]:
    """Map every byte string to the tokens having it as a prefix."""
    index: dict[bytes, set[int]] = {}
    for tok in full.tokens:
        for i in range(1, len(tok.data) + 1):
            index.setdefault(tok.data[:i], set()).add(tok.id)
    return index


def relative_cover_search(
    enc: Encoding,
    full: SubsetView,
    prefix_index: dict[bytes, set[int]] | None = None,
    restrict_splits: bool = True,
) -> CoverSet:
    """All relative cover encodings of ``enc`` within the full view.

    ``restrict_splits=False`` scans every split position (the printed form
    of the search); the default restricts to the provably reachable window.
    """
    vocab = full.base
    sub = vocab.view(enc.level)
    if enc.level > full.bound:
        raise InvalidBasis(f"basis level {enc.level} exceeds full bound {full.bound}")
    if not is_valid(enc, sub):
        raise InvalidBasis(f"basis {enc.ids} is not canonical at bound {enc.level}")

    if len(enc) == 0:
        return CoverSet(enc, full.bound, (CoverEntry((), ()),))
    if enc.ids[-1] == EOS_ID:
        # EOS participates in no merge: the only cover is the basis itself.
        lifted = relative_encode(Encoding(enc.ids[:-1], enc.level), full)
        return CoverSet(enc, full.bound, (CoverEntry(lifted.ids + (EOS_ID,), ()),))

    if prefix_index is None:
        prefix_index = token_prefix_index(vocab)
    s = decode(enc, sub)
    start = max(1, len(s) - full.base.max_token_len(full.bound) + 1) if restrict_splits else 1

    # Sub-token start offsets (in bytes) let us recover how many sub-tokens
    # of the basis a candidate's last token covers.
    sub_start_at: dict[int, int] = {}
    pos = 0
    for j, tid in enumerate(enc.ids):
        sub_start_at[pos] = j
        pos += len(vocab.token_bytes(tid))

    entries: list[CoverEntry] = []
    seen: set[tuple[int, ...]] = set()
    for i in range(start, len(s) + 1):  # 1-based split: last token covers s[i-1:]
        suffix = s[i - 1 :]
        candidates = prefix_index.get(suffix)
        if not candidates:
            continue
        j = sub_start_at.get(i - 1)
        if j is None:
            continue  # split must land on a sub-token boundary to cover exactly
        left = encode(s[: i - 1], full)
        for tid in sorted(candidates):
            cand = Encoding(left.ids + (tid,), full.bound)
            if cand.ids in seen:
                continue
            if not is_valid(cand, full):
                continue
            re_sub = encode(decode(cand, full), sub)
            if re_sub.ids[: len(enc)] != enc.ids:
                continue
            expansion = token_expansion(vocab, tid, enc.level)
            covered = len(enc) - j
            if expansion[:covered] != enc.ids[j:]:
                continue
            seen.add(cand.ids)
            entries.append(CoverEntry(cand.ids, expansion[covered:]))
    entries.sort(key=lambda e: e.ids)
    return CoverSet(enc, full.bound, tuple(entries))
