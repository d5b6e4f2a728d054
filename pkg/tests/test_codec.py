import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xtok.codec import (
    decode,
    demerge_step,
    encode,
    encoding,
    is_valid,
    merge_step,
    relative_decode,
    relative_encode,
    token_expansion,
)
from xtok.errors import LevelMismatch, UnknownSymbol
from xtok.vocab import EOS, build_vocab

from conftest import random_string, random_vocab

A, B, AB, ABA = 1, 2, 3, 4


def test_merge_step_examples(toy_vocab):
    r1 = toy_vocab.rule(1)
    assert merge_step(encoding([A, B, A], 0), r1).ids == (AB, A)
    assert merge_step(encoding([B, B], 0), r1).ids == (B, B)
    assert merge_step(encoding([A, B, A, B], 0), r1).ids == (AB, AB)


def test_merge_step_level_check(toy_vocab):
    with pytest.raises(LevelMismatch):
        merge_step(encoding([A], 1), toy_vocab.rule(1))


def test_demerge_step_examples(toy_vocab):
    r1 = toy_vocab.rule(1)
    assert demerge_step(encoding([AB, A], 1), r1).ids == (A, B, A)
    assert demerge_step(encoding([B], 1), r1).ids == (B,)


def test_demerge_inverts_merge_on_clean_input(toy_vocab):
    r1 = toy_vocab.rule(1)
    rng = np.random.default_rng(0)
    for _ in range(50):
        e = encoding(rng.integers(1, 3, size=rng.integers(0, 8)).tolist(), 0)
        assert demerge_step(merge_step(e, r1), r1).ids == e.ids


def test_encode_examples(toy_vocab):
    v2 = toy_vocab.full_view()
    assert encode(b"aab", v2).ids == (A, AB)
    assert encode(b"aabaa", v2).ids == (A, ABA, A)
    assert encode(b"", v2).ids == ()


def test_encode_unknown_symbol(toy_vocab):
    with pytest.raises(UnknownSymbol):
        encode(b"az", toy_vocab.full_view())


def test_decode_examples(toy_vocab):
    v2 = toy_vocab.full_view()
    assert decode(encoding([A, AB], 2), v2) == b"aab"
    assert decode(encoding([], 2), v2) == b""


def test_relative_encode_examples(toy_vocab):
    v2 = toy_vocab.full_view()
    assert relative_encode(encoding([A, B, A], 0), v2).ids == (ABA,)
    assert relative_encode(encoding([A, AB], 2), v2).ids == (A, AB)


def test_relative_decode_examples(toy_vocab):
    v1 = toy_vocab.view(1)
    assert relative_decode(encoding([ABA], 2), v1).ids == (AB, A)
    assert relative_decode(encoding([A, AB], 2), v1).ids == (A, AB)
    assert relative_decode(encoding([A, AB], 2), toy_vocab.view(2)).ids == (A, AB)


def test_is_valid_tokenization_bias(toy_vocab):
    # [b, a, b] can never occur once a·b merges; [b, ab] is the canonical form.
    v1 = toy_vocab.view(1)
    assert not is_valid(encoding([B, A, B], 1), v1)
    assert is_valid(encoding([B, AB], 1), v1)


def test_single_tokens_valid_on_live_vocab(toy_vocab):
    # Holds whenever every token is reachable by encoding its own bytes
    # (true for this vocab; not guaranteed for arbitrary merge lists).
    for view in (toy_vocab.view(1), toy_vocab.full_view()):
        for tid in view.token_ids():
            assert is_valid(encoding([tid], view.bound), view)


def test_dead_token_single_encoding_invalid():
    # a·a -> aa (rank 1), a·aa -> aaa (rank 2): "aaa" encodes to [aa, a],
    # so the rank-2 token can never appear in canonical text.
    v = build_vocab([EOS, b"a"], [(1, 1), (1, 2)])
    assert encode(b"aaa", v.full_view()).ids == (2, 1)
    assert not is_valid(encoding([3], 2), v.full_view())


def test_token_expansion_matches_relative_decode(toy_vocab):
    assert token_expansion(toy_vocab, ABA, 1) == (AB, A)
    assert token_expansion(toy_vocab, ABA, 0) == (A, B, A)
    assert token_expansion(toy_vocab, A, 0) == (A,)


@st.composite
def vocab_and_string(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n_symbols = draw(st.integers(1, 3))
    n_merges = draw(st.integers(0, 6))
    vocab = random_vocab(rng, n_symbols, n_merges)
    s = random_string(rng, n_symbols, 8)
    return vocab, s


@given(vocab_and_string())
@settings(max_examples=200, deadline=None)
def test_roundtrip_property(vs):
    vocab, s = vs
    for bound in range(vocab.num_merges + 1):
        view = vocab.view(bound)
        assert decode(encode(s, view), view) == s


@given(vocab_and_string())
@settings(max_examples=200, deadline=None)
def test_path_independence_property(vs):
    # relative_encode equals the decode-then-encode two-step path.
    vocab, s = vs
    M = vocab.num_merges
    for m_lo in range(M + 1):
        lo, hi = vocab.view(m_lo), vocab.view(M)
        e_lo = encode(s, lo)
        assert relative_encode(e_lo, hi).ids == encode(decode(e_lo, lo), hi).ids
        assert relative_decode(encode(s, hi), lo).ids == e_lo.ids


@given(vocab_and_string())
@settings(max_examples=100, deadline=None)
def test_merge_monotone_lengths(vs):
    vocab, s = vs
    e = encode(s, vocab.view(0))
    for rule in vocab.merges:
        nxt = merge_step(e, rule)
        assert len(nxt) <= len(e)
        assert len(demerge_step(nxt, rule)) >= len(nxt)
        e = nxt


@given(vocab_and_string())
@settings(max_examples=100, deadline=None)
def test_relative_roundtrip_on_valid_encodings(vs):
    vocab, s = vs
    M = vocab.num_merges
    for m_lo in range(M + 1):
        e = encode(s, vocab.view(m_lo))
        up = relative_encode(e, vocab.view(M))
        assert relative_decode(up, vocab.view(m_lo)).ids == e.ids
