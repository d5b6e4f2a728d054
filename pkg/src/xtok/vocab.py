"""BPE vocabularies: ordered alphabet plus ordered merge rules.

A vocabulary is immutable after construction.  Token id 0 is always EOS,
carrying a sentinel byte that never occurs inside any data token, so
byte-level predicates can never confuse EOS with data.  Merge results get
ids sequentially after the alphabet; rank i (1-based) produces id
``len(alphabet) + i - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    BoundOutOfRange,
    DuplicateToken,
    MergeOrderViolation,
    ParseError,
)


class _EosMarker:
    """Singleton placeholder for the EOS slot in a build_vocab alphabet."""

    def __repr__(self) -> str:
        return "EOS"


EOS = _EosMarker()
EOS_ID = 0


@dataclass(frozen=True)
class Token:
    id: int
    data: bytes

    def __post_init__(self) -> None:
        if not self.data:
            raise ValueError("token byte sequence must be non-empty")


@dataclass(frozen=True)
class MergeRule:
    rank: int  # 1-based merge index
    left: int
    right: int
    result: int


@dataclass(frozen=True, eq=False)
class BpeVocab:
    """Ordered alphabet (EOS first) plus ordered merge rules.

    Equality and hashing are by identity: a vocab is built once and shared.
    """

    alphabet: tuple[Token, ...]
    merges: tuple[MergeRule, ...]
    tokens: tuple[Token, ...] = field(repr=False)

    @property
    def num_merges(self) -> int:
        return len(self.merges)

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def eos(self) -> Token:
        return self.alphabet[0]

    def token_bytes(self, token_id: int) -> bytes:
        return self.tokens[token_id].data

    def rule(self, rank: int) -> MergeRule:
        if not 1 <= rank <= self.num_merges:
            raise BoundOutOfRange(f"merge rank {rank} outside [1, {self.num_merges}]")
        return self.merges[rank - 1]

    def view(self, bound: int) -> "SubsetView":
        return subset_view(self, bound)

    def full_view(self) -> "SubsetView":
        return subset_view(self, self.num_merges)

    def max_token_len(self, bound: int | None = None) -> int:
        """Longest token byte-length among tokens visible at ``bound``."""
        limit = self.size if bound is None else len(self.alphabet) + bound
        return max(len(t.data) for t in self.tokens[:limit])


@dataclass(frozen=True, eq=False)
class SubsetView:
    """The truncated vocabulary holding the first ``bound`` merges.

    Shares storage with the base vocab; never copies merges.  bound = 0 is
    the raw alphabet.
    """

    base: BpeVocab
    bound: int

    @property
    def size(self) -> int:
        return len(self.base.alphabet) + self.bound

    def contains_id(self, token_id: int) -> bool:
        return 0 <= token_id < self.size

    def token_ids(self) -> range:
        return range(self.size)

    def token_bytes(self, token_id: int) -> bytes:
        if not self.contains_id(token_id):
            raise BoundOutOfRange(f"token id {token_id} outside view of size {self.size}")
        return self.base.token_bytes(token_id)


def _pick_sentinel(data_symbols: Sequence[bytes]) -> bytes:
    used = set(b"".join(data_symbols))
    for candidate in (0x00, 0xFF, *range(0xFE, -1, -1)):
        if candidate not in used:
            return bytes([candidate])
    raise DuplicateToken("no free byte value left for the EOS sentinel")


def build_vocab(
    alphabet: Sequence[bytes | _EosMarker],
    merge_pairs: Iterable[tuple[int, int]],
) -> BpeVocab:
    """Construct and validate a vocabulary.

    ``alphabet[0]`` must be the EOS slot: either the ``EOS`` marker (a
    sentinel byte is chosen automatically, outside the data alphabet) or an
    explicit sentinel byte string.  Remaining entries are data symbols.
    ``merge_pairs`` lists (left id, right id) in merge order; result ids are
    assigned sequentially after the alphabet.
    """
    if not alphabet:
        raise MergeOrderViolation("alphabet must be non-empty")
    data_symbols = []
    for sym in alphabet[1:]:
        if isinstance(sym, _EosMarker):
            raise MergeOrderViolation("EOS marker may only appear at alphabet[0]")
        data_symbols.append(bytes(sym))

    head = alphabet[0]
    eos_bytes = _pick_sentinel(data_symbols) if isinstance(head, _EosMarker) else bytes(head)
    for val in eos_bytes:
        if any(val in sym for sym in data_symbols):
            raise DuplicateToken("EOS sentinel byte occurs inside a data symbol")

    tokens: list[Token] = [Token(0, eos_bytes)]
    seen: dict[bytes, int] = {eos_bytes: 0}
    for i, sym in enumerate(data_symbols, start=1):
        if sym in seen:
            raise DuplicateToken(f"alphabet symbol {sym!r} duplicates token {seen[sym]}")
        tokens.append(Token(i, sym))
        seen[sym] = i

    rules: list[MergeRule] = []
    base = len(tokens)
    for rank, (left, right) in enumerate(merge_pairs, start=1):
        result = base + rank - 1
        for part in (left, right):
            if part == EOS_ID:
                raise MergeOrderViolation(f"merge {rank} references EOS")
            if not 0 <= part < result:
                raise MergeOrderViolation(
                    f"merge {rank} references token {part}, not yet defined"
                )
        data = tokens[left].data + tokens[right].data
        if data in seen:
            raise DuplicateToken(
                f"merge {rank} produces bytes {data!r} already held by token {seen[data]}"
            )
        tokens.append(Token(result, data))
        seen[data] = result
        rules.append(MergeRule(rank=rank, left=left, right=right, result=result))

    alpha = tuple(tokens[:base])
    return BpeVocab(alphabet=alpha, merges=tuple(rules), tokens=tuple(tokens))


def subset_view(vocab: BpeVocab, bound: int) -> SubsetView:
    if not 0 <= bound <= vocab.num_merges:
        raise BoundOutOfRange(f"bound {bound} outside [0, {vocab.num_merges}]")
    return SubsetView(base=vocab, bound=bound)


# --- vocab file format -------------------------------------------------------
#
# Line-oriented text, normative for round-trip tests:
#   header  : "xtok-vocab v1 |A|=<n> M=<m>"
#   n lines : one alphabet symbol per line, lowercase hex bytes (EOS first)
#   m lines : "<left_id> <right_id>" per merge, in rank order

_HEADER_PREFIX = "xtok-vocab v1 "


def export_merges(vocab: BpeVocab) -> str:
    lines = [f"xtok-vocab v1 |A|={len(vocab.alphabet)} M={vocab.num_merges}"]
    lines.extend(tok.data.hex() for tok in vocab.alphabet)
    lines.extend(f"{r.left} {r.right}" for r in vocab.merges)
    return "\n".join(lines) + "\n"


def import_merges(source: str | Path) -> BpeVocab:
    """Parse a vocab file. ``source`` is a path, or raw text if it contains a newline."""
    text = str(source)
    if "\n" not in text:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read vocab file: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise ParseError("missing 'xtok-vocab v1' header")
    try:
        fields = dict(part.split("=") for part in lines[0][len(_HEADER_PREFIX):].split())
        n, m = int(fields["|A|"]), int(fields["M"])
    except (ValueError, KeyError) as exc:
        raise ParseError(f"malformed header: {lines[0]!r}") from exc
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n + m:
        raise ParseError(f"expected {n} symbol and {m} merge lines, found {len(body)}")
    try:
        symbols = [bytes.fromhex(ln.strip()) for ln in body[:n]]
    except ValueError as exc:
        raise ParseError(f"bad hex in alphabet: {exc}") from exc
    pairs = []
    for ln in body[n:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ParseError(f"malformed merge line: {ln!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ParseError(f"malformed merge line: {ln!r}") from exc
    if not symbols:
        raise ParseError("empty alphabet")
    return build_vocab([symbols[0], *symbols[1:]], pairs)


def write_vocab(vocab: BpeVocab, path: str | Path) -> None:
    Path(path).write_text(export_merges(vocab))
