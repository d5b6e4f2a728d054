"""Language-model backends: next-token distributions and joint prefix probabilities.

A backend emits tokens at a fixed vocabulary bound.  Probabilities are
combined in log space; ``joint_prob`` exposes the linear value at the API
boundary.  Toy token-level backends enforce the canonical-output assumption
by masking invalid continuations and renormalizing, which makes every
scoring identity in this library constructively testable.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .codec import Encoding, check_encoding, is_valid
from .errors import BackendUnavailable, DeadEnd, ParseError, PrefixContainsEos
from .vocab import EOS_ID, SubsetView

NEG_INF = float("-inf")


class LmBackend:
    """Base class: subclasses implement ``_dist(prefix) -> np.ndarray``.

    ``calls`` counts model evaluations (next_dist invocations); the O(1)
    sampling guarantee is asserted against it.
    """

    def __init__(self, view: SubsetView):
        self.view = view
        self.calls = 0

    @property
    def vocab_bound(self) -> int:
        return self.view.bound

    def _dist(self, prefix: Encoding) -> np.ndarray:
        raise NotImplementedError

    def next_dist(self, prefix: Encoding) -> np.ndarray:
        """Normalized next-token distribution after ``prefix`` (EOS-free prefix)."""
        check_encoding(prefix, self.view)
        if EOS_ID in prefix.ids:
            raise PrefixContainsEos("next_dist prefix must not contain EOS")
        self.calls += 1
        dist = self._dist(prefix)
        assert abs(float(dist.sum()) - 1.0) < 1e-9, "backend row not normalized"
        return dist

    def joint_logprob(self, enc: Encoding) -> float:
        """log P(sequence begins with enc); -inf for invalid or post-EOS content."""
        check_encoding(enc, self.view)
        ids = enc.ids
        if EOS_ID in ids:
            cut = ids.index(EOS_ID) + 1
            if any(t != EOS_ID for t in ids[cut:]):
                return NEG_INF  # EOS is absorbing
            ids = ids[:cut]
        effective = Encoding(ids, enc.level)
        if not is_valid(effective, self.view):
            return NEG_INF
        logp = 0.0
        for k, tid in enumerate(ids):
            p = float(self.next_dist(Encoding(ids[:k], enc.level))[tid])
            if p <= 0.0:
                return NEG_INF
            logp += math.log(p)
        return logp

    def joint_prob(self, enc: Encoding) -> float:
        return math.exp(self.joint_logprob(enc))


def _eos_onehot(size: int) -> np.ndarray:
    row = np.zeros(size)
    row[EOS_ID] = 1.0
    return row


def draw_index(rng: np.random.Generator, dist: np.ndarray) -> int:
    """Draw a category by inverse CDF; deterministic given the generator state."""
    r = rng.random()
    return min(int(np.searchsorted(np.cumsum(dist), r, side="right")), len(dist) - 1)


def _normalize(row: np.ndarray) -> np.ndarray:
    """Divide by the sum unless already normalized: keeps file round-trips
    bit-identical (renormalizing an already-normalized row moves the ulp)."""
    total = float(row.sum())
    return row if abs(total - 1.0) <= 1e-12 else row / total


class TableLm(LmBackend):
    """Explicit conditional tables keyed by full prefix, uniform elsewhere.

    With ``masking`` (the default for token-level bounds), each raw row is
    zeroed on continuations t where prefix·t is non-canonical and then
    renormalized, so emitted sequences are always valid encodings.
    ``force_eos_depth`` pins EOS probability 1 once a prefix reaches that
    many tokens, giving structurally terminating toy processes.
    """

    def __init__(
        self,
        view: SubsetView,
        rows: dict[tuple[int, ...], np.ndarray] | None = None,
        masking: bool = True,
        force_eos_depth: int | None = None,
    ):
        super().__init__(view)
        self.rows: dict[tuple[int, ...], np.ndarray] = {}
        for key, row in (rows or {}).items():
            arr = np.asarray(row, dtype=float)
            if arr.shape != (view.size,):
                raise ParseError(f"row for prefix {key} has shape {arr.shape}, want ({view.size},)")
            self.rows[tuple(key)] = _normalize(arr)
        self.masking = masking
        self.force_eos_depth = force_eos_depth
        self._masked_cache: dict[tuple[int, ...], np.ndarray] = {}

    def _raw_row(self, key: tuple[int, ...]) -> np.ndarray:
        row = self.rows.get(key)
        if row is None:
            row = np.full(self.view.size, 1.0 / self.view.size)
        return row

    def _dist(self, prefix: Encoding) -> np.ndarray:
        key = prefix.ids
        if self.force_eos_depth is not None and len(key) >= self.force_eos_depth:
            return _eos_onehot(self.view.size)
        cached = self._masked_cache.get(key)
        if cached is not None:
            return cached
        row = self._raw_row(key)
        if self.masking and self.view.bound > 0:
            mask = np.zeros(self.view.size)
            for tid in self.view.token_ids():
                if is_valid(prefix.append(tid), self.view):
                    mask[tid] = 1.0
            row = row * mask
            total = row.sum()
            if total <= 0.0:
                raise DeadEnd(f"no valid continuation mass after prefix {key}")
            row = row / total
        self._masked_cache[key] = row
        return row


class NgramByteLm(LmBackend):
    """Byte-level (bound 0) n-gram model with explicit conditional rows.

    Rows are keyed by the last (order-1) byte ids and include EOS mass.
    Unlisted contexts fall back to the uniform distribution.
    """

    def __init__(self, view: SubsetView, order: int, rows: dict[tuple[int, ...], np.ndarray]):
        if view.bound != 0:
            raise ParseError("NgramByteLm operates at bound 0")
        super().__init__(view)
        self.order = order
        self.rows = {tuple(k): _normalize(np.asarray(v, dtype=float)) for k, v in rows.items()}

    def _dist(self, prefix: Encoding) -> np.ndarray:
        ctx = prefix.ids[-(self.order - 1):] if self.order > 1 else ()
        row = self.rows.get(ctx)
        if row is None:
            row = np.full(self.view.size, 1.0 / self.view.size)
        return row


def uniform_byte_lm(view: SubsetView) -> TableLm:
    """Uniform next-byte model over the alphabet (EOS included)."""
    return TableLm(view.base.view(0), rows={}, masking=False)


class ExternalLogitsLm(LmBackend):
    """Backend answering from a logits exchange stream or a replay file.

    Line protocol: request ``Q <space-separated token ids>``; response
    ``A <id>:<logprob> ...`` listing the full vocabulary or top-K plus a
    ``REST:<logprob>`` aggregate (spread uniformly over unlisted ids).
    Identical prefixes replay identical answers via the cache.  Validity
    masking is NOT applied: scoring guarantees hold only as far as the
    external model already concentrates its mass on valid encodings.
    """

    def __init__(
        self,
        view: SubsetView,
        reader: IO[str] | None = None,
        writer: IO[str] | None = None,
        replay: dict[tuple[int, ...], np.ndarray] | None = None,
    ):
        super().__init__(view)
        self.reader = reader
        self.writer = writer
        self.cache: dict[tuple[int, ...], np.ndarray] = dict(replay or {})

    @classmethod
    def from_replay(cls, path: str | Path, view: SubsetView) -> "ExternalLogitsLm":
        text = Path(path).read_text()
        cache: dict[tuple[int, ...], np.ndarray] = {}
        pending: tuple[int, ...] | None = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("Q"):
                pending = _parse_request(line, lineno)
            elif line.startswith("A"):
                if pending is None:
                    raise ParseError(f"line {lineno}: answer without a pending request")
                cache[pending] = _parse_answer(line, view.size, lineno)
                pending = None
            else:
                raise ParseError(f"line {lineno}: expected Q or A record")
        return cls(view, replay=cache)

    def _dist(self, prefix: Encoding) -> np.ndarray:
        key = prefix.ids
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self.writer is None or self.reader is None:
            raise BackendUnavailable(f"no replay answer for prefix {key} and no stream attached")
        self.writer.write(format_request(key) + "\n")
        self.writer.flush()
        line = self.reader.readline()
        if not line:
            raise BackendUnavailable("logits stream closed")
        dist = _parse_answer(line.strip(), self.view.size, lineno=0)
        self.cache[key] = dist
        return dist


def format_request(ids: tuple[int, ...]) -> str:
    return "Q " + " ".join(str(t) for t in ids) if ids else "Q"


def format_answer(dist: np.ndarray) -> str:
    with np.errstate(divide="ignore"):
        logs = np.log(dist)
    return "A " + " ".join(f"{i}:{lp!r}" for i, lp in enumerate(logs.tolist()))


def _parse_request(line: str, lineno: int) -> tuple[int, ...]:
    parts = line.split()
    if parts[0] != "Q":
        raise ParseError(f"line {lineno}: malformed request")
    try:
        return tuple(int(p) for p in parts[1:])
    except ValueError as exc:
        raise ParseError(f"line {lineno}: bad token id in request") from exc

def _parse_answer(line: str, size: int, lineno: int) -> np.ndarray:
    parts = line.split()
    if not parts or parts[0] != "A":
        raise ParseError(f"line {lineno}: malformed answer")
    logp = np.full(size, NEG_INF)
    listed = np.zeros(size, dtype=bool)
    rest: float | None = None
    for item in parts[1:]:
        name, _, val = item.partition(":")
        if not val:
            raise ParseError(f"line {lineno}: malformed entry {item!r}")
        try:
            lp = float(val)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad logprob in {item!r}") from exc
        if name == "REST":
            rest = lp
            continue
        try:
            tid = int(name)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad token id in {item!r}") from exc
        if not 0 <= tid < size:
            raise ParseError(f"line {lineno}: token id {tid} out of range")
        logp[tid] = lp
        listed[tid] = True
    if rest is not None and (~listed).any():
        logp[~listed] = rest - math.log(int((~listed).sum()))
    with np.errstate(over="ignore"):
        dist = np.exp(logp)
    total = dist.sum()
    if not math.isfinite(total) or total <= 0.0:
        raise ParseError(f"line {lineno}: answer carries no probability mass")
    return dist / total


def record_replay(backend: LmBackend, prefixes: Iterable[Encoding], path: str | Path) -> None:
    """Write a deterministic replay file answering the given prefixes."""
    lines = []
    for prefix in prefixes:
        dist = backend.next_dist(prefix)
        lines.append(format_request(prefix.ids))
        lines.append(format_answer(dist))
    Path(path).write_text("\n".join(lines) + "\n")


# --- backend files ------------------------------------------------------------
#
# Table/ngram backends serialize as JSON: {"kind", "bound"/"order", "rows":
# {"<space-separated prefix ids>": [probs...]}, ...}.  Row values round-trip
# exactly via repr floats.

def save_table_lm(lm: TableLm, path: str | Path) -> None:
    import json

    doc = {
        "kind": "table",
        "bound": lm.view.bound,
        "masking": lm.masking,
        "force_eos_depth": lm.force_eos_depth,
        "rows": {" ".join(map(str, k)): [float(x) for x in v] for k, v in lm.rows.items()},
    }
    Path(path).write_text(json.dumps(doc))


def load_table_lm(path: str | Path, view_of_bound) -> TableLm:
    import json

    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot load table backend: {exc}") from exc
    if doc.get("kind") != "table":
        raise ParseError("not a table backend file")
    rows = {
        tuple(int(t) for t in key.split()): np.array(vals, dtype=float)
        for key, vals in doc.get("rows", {}).items()
    }
    return TableLm(
        view_of_bound(int(doc["bound"])),
        rows=rows,
        masking=bool(doc.get("masking", True)),
        force_eos_depth=doc.get("force_eos_depth"),
    )


def save_ngram_lm(lm: NgramByteLm, path: str | Path) -> None:
    import json

    doc = {
        "kind": "ngram",
        "order": lm.order,
        "rows": {" ".join(map(str, k)): [float(x) for x in v] for k, v in lm.rows.items()},
    }
    Path(path).write_text(json.dumps(doc))


def load_ngram_lm(path: str | Path, byte_view: SubsetView) -> NgramByteLm:
    import json

    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot load ngram backend: {exc}") from exc
    if doc.get("kind") != "ngram":
        raise ParseError("not an ngram backend file")
    rows = {
        tuple(int(t) for t in key.split()): np.array(vals, dtype=float)
        for key, vals in doc.get("rows", {}).items()
    }
    return NgramByteLm(byte_view, int(doc["order"]), rows)


# --- deterministic random model builders (fixtures and the verify suites) ----

def random_table_lm(
    view: SubsetView,
    rng: np.random.Generator,
    max_tokens: int,
    row_depth: int | None = None,
) -> TableLm:
    """Random terminating TableLm: explicit rows along the valid-prefix tree
    up to ``row_depth`` tokens, EOS forced at ``max_tokens``."""
    if row_depth is None:
        row_depth = max_tokens
    rows: dict[tuple[int, ...], np.ndarray] = {}

    def fill(prefix: Encoding, depth: int) -> None:
        rows[prefix.ids] = rng.random(view.size) + 0.05
        if depth + 1 >= row_depth:
            return
        for tid in view.token_ids():
            if tid != EOS_ID and is_valid(prefix.append(tid), view):
                fill(prefix.append(tid), depth + 1)

    fill(Encoding((), view.bound), 0)
    return TableLm(view, rows=rows, masking=True, force_eos_depth=max_tokens)


def random_ngram_byte_lm(
    view: SubsetView,
    rng: np.random.Generator,
    order: int = 2,
    eos_floor: float = 0.0,
) -> NgramByteLm:
    """Random byte n-gram over the view's alphabet; EOS mass at least ``eos_floor``."""
    byte_view = view.base.view(0)
    data_ids = [t for t in byte_view.token_ids() if t != EOS_ID]
    contexts: list[tuple[int, ...]] = []
    frontier: list[tuple[int, ...]] = [()]
    for _ in range(order):  # context lengths 0 .. order-1
        contexts.extend(frontier)
        frontier = [c + (d,) for c in frontier for d in data_ids]
    rows = {}
    for ctx in contexts:
        row = rng.random(byte_view.size) + 0.02
        row = row / row.sum()
        if eos_floor > 0.0:
            row = row * (1.0 - eos_floor)
            row[EOS_ID] += eos_floor
        rows[ctx] = row
    return NgramByteLm(byte_view, order, rows)


def eos_free_ngram_byte_lm(
    view: SubsetView, rng: np.random.Generator, order: int = 2
) -> NgramByteLm:
    """Byte n-gram with zero EOS mass: a process that never terminates,
    matching toy settings where prefix measures are compared without EOS."""
    byte_view = view.base.view(0)
    model = random_ngram_byte_lm(byte_view, rng, order)
    for ctx, row in model.rows.items():
        row = row.copy()
        row[EOS_ID] = 0.0
        model.rows[ctx] = row / row.sum()
    return model
