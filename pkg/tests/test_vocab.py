import pytest

from xtok.errors import BoundOutOfRange, DuplicateToken, MergeOrderViolation, ParseError
from xtok.vocab import EOS, build_vocab, export_merges, import_merges, subset_view

from conftest import random_vocab

import numpy as np


def test_worked_example_construction(toy_vocab):
    assert toy_vocab.size == 5
    assert [t.data for t in toy_vocab.tokens[1:]] == [b"a", b"b", b"ab", b"aba"]
    assert toy_vocab.eos.id == 0
    assert toy_vocab.merges[0].result == 3
    assert toy_vocab.merges[1].rank == 2


def test_zero_merges_is_alphabet_only():
    v = build_vocab([EOS, b"a", b"b"], [])
    assert v.size == 3
    assert v.num_merges == 0


def test_eos_in_merge_rejected():
    with pytest.raises(MergeOrderViolation):
        build_vocab([EOS, b"a", b"b"], [(0, 1)])


def test_forward_reference_rejected():
    with pytest.raises(MergeOrderViolation):
        build_vocab([EOS, b"a", b"b"], [(1, 4)])


def test_duplicate_bytes_rejected():
    with pytest.raises(DuplicateToken):
        build_vocab([EOS, b"a"], [(1, 1), (1, 1)])


def test_merge_bytes_are_concatenation(toy_vocab):
    for rule in toy_vocab.merges:
        assert toy_vocab.token_bytes(rule.result) == (
            toy_vocab.token_bytes(rule.left) + toy_vocab.token_bytes(rule.right)
        )


def test_subset_view_bounds(toy_vocab):
    assert [t for t in subset_view(toy_vocab, 1).token_ids()] == [0, 1, 2, 3]
    assert subset_view(toy_vocab, 0).size == 3
    assert subset_view(toy_vocab, 2).size == toy_vocab.size
    with pytest.raises(BoundOutOfRange):
        subset_view(toy_vocab, 3)
    with pytest.raises(BoundOutOfRange):
        subset_view(toy_vocab, -1)


def test_eos_sentinel_outside_data_alphabet(toy_vocab):
    sentinel = toy_vocab.eos.data
    for tok in toy_vocab.tokens[1:]:
        assert sentinel not in tok.data


def test_build_deterministic():
    a = build_vocab([EOS, b"a", b"b"], [(1, 2), (3, 1)])
    b = build_vocab([EOS, b"a", b"b"], [(1, 2), (3, 1)])
    assert [t.data for t in a.tokens] == [t.data for t in b.tokens]
    assert a.merges == b.merges


def test_roundtrip_through_file(tmp_path, toy_vocab):
    p = tmp_path / "v.vocab"
    p.write_text(export_merges(toy_vocab))
    back = import_merges(p)
    assert export_merges(back) == export_merges(toy_vocab)


def test_roundtrip_random_vocabs(tmp_path):
    rng = np.random.default_rng(7)
    for _ in range(25):
        v = random_vocab(rng, int(rng.integers(1, 4)), int(rng.integers(0, 7)))
        assert export_merges(import_merges(export_merges(v))) == export_merges(v)


def test_import_corrupt_file_raises(tmp_path):
    with pytest.raises(ParseError):
        import_merges("not a vocab\nfile\n")
    with pytest.raises(ParseError):
        import_merges("xtok-vocab v1 |A|=2 M=5\n00\n61\n1 2\n")  # truncated
    with pytest.raises(ParseError):
        import_merges("xtok-vocab v1 |A|=2 M=0\nzz\n61\n")  # bad hex
    with pytest.raises(ParseError):
        import_merges(str(tmp_path / "missing.vocab"))
