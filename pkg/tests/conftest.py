import numpy as np
import pytest

from xtok.vocab import EOS, BpeVocab, build_vocab


@pytest.fixture
def toy_vocab() -> BpeVocab:
    """{EOS, a, b} with merges a·b -> ab, ab·a -> aba (ids 0..4)."""
    return build_vocab([EOS, b"a", b"b"], [(1, 2), (3, 1)])


def make_toy_vocab() -> BpeVocab:
    return build_vocab([EOS, b"a", b"b"], [(1, 2), (3, 1)])


def random_vocab(rng: np.random.Generator, n_symbols: int, n_merges: int) -> BpeVocab:
    """Random Definition-1-legal vocab: pairs drawn uniformly, duplicates retried.

    Dead tokens (never produced by any encode) are allowed; algorithms must
    handle them via explicit validity checks.
    """
    symbols = [bytes([c]) for c in b"abc"[:n_symbols]]
    pairs: list[tuple[int, int]] = []
    seen = {bytes([c]) for c in b"abc"[:n_symbols]}
    byte_of = {i + 1: s for i, s in enumerate(symbols)}
    next_id = 1 + n_symbols
    for _ in range(n_merges):
        for _attempt in range(50):
            left = int(rng.integers(1, next_id))
            right = int(rng.integers(1, next_id))
            data = byte_of[left] + byte_of[right]
            if data not in seen:
                break
        else:
            break
        seen.add(data)
        byte_of[next_id] = data
        pairs.append((left, right))
        next_id += 1
    return build_vocab([EOS, *symbols], pairs)


def random_string(rng: np.random.Generator, n_symbols: int, max_len: int, min_len: int = 0) -> bytes:
    length = int(rng.integers(min_len, max_len + 1))
    return bytes(rng.choice(list(b"abc"[:n_symbols]), size=length).tolist())
