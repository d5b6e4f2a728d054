"""End-to-end workflow: a full-vocabulary teacher scores a trimmed student
vocabulary, soft labels flow into the partial-KL loss, and the replay file
format carries the teacher's rows across a process boundary."""

import math

import numpy as np

from xtok.codec import encoding
from xtok.convert_down import (
    advance,
    init_sampler,
    next_subtoken_dist,
    next_subtoken_masses,
    score_subset,
)
from xtok.lm import ExternalLogitsLm, random_table_lm, record_replay
from xtok.losses import SoftLabelStep, combine_with_sft, pkl_grad, pkl_loss
from xtok.vocab import EOS, EOS_ID, build_vocab


def test_trimmed_vocab_distillation_workflow():
    vocab = build_vocab([EOS, b"a", b"b"], [(1, 2), (3, 1), (2, 2)])  # ab aba bb
    teacher = random_table_lm(vocab.full_view(), np.random.default_rng(5), max_tokens=5, row_depth=2)
    student = random_table_lm(vocab.view(1), np.random.default_rng(6), max_tokens=8, row_depth=2)

    # teach at the trimmed bound: walk a short sequence, collecting soft labels
    rng = np.random.default_rng(7)
    state = init_sampler(teacher, encoding([], 1))
    steps = []
    for _ in range(6):
        t_dist = next_subtoken_dist(state)
        s_dist = student.next_dist(state.basis)
        top = np.argsort(t_dist)[::-1][:2]  # two queried bins per step
        ids = tuple(int(t) for t in top)
        steps.append(SoftLabelStep(ids, t_dist[list(ids)], s_dist[list(ids)]))
        chosen = int(np.argmax(t_dist))
        if chosen == EOS_ID:
            break
        state = advance(state, chosen, teacher)

    assert len(steps) >= 2
    loss = pkl_loss(steps)
    assert math.isfinite(loss) and loss >= 0.0
    grads = pkl_grad(steps)
    assert all(np.all(np.isfinite(g)) for g in grads)
    combined = combine_with_sft(loss, 1.25, omega=0.8)
    assert math.isclose(combined, 0.8 * loss + 0.25, rel_tol=1e-12)


def test_replayed_teacher_reproduces_sampler_exactly(tmp_path):
    # record every row the live teacher serves during a sampler walk, then
    # replay the file and confirm the converted distributions are identical
    vocab = build_vocab([EOS, b"a", b"b"], [(1, 2), (3, 1)])
    teacher = random_table_lm(vocab.full_view(), np.random.default_rng(8), max_tokens=4, row_depth=2)

    prompt = encoding([1], 1)
    state = init_sampler(teacher, prompt)
    masses = [next_subtoken_masses(state)]
    for chosen in (3, 1):  # ab then a
        state = advance(state, chosen, teacher)
        masses.append(next_subtoken_masses(state))

    # cover probabilities during init touch more prefixes than the walk's
    # cached rows; record everything the table model answered
    all_prefixes = [encoding(ids, 2) for ids in sorted(teacher._masked_cache)]
    replay_path = tmp_path / "teacher.replay"
    fresh = random_table_lm(vocab.full_view(), np.random.default_rng(8), max_tokens=4, row_depth=2)
    record_replay(fresh, all_prefixes, replay_path)

    replayed = ExternalLogitsLm.from_replay(replay_path, vocab.full_view())
    state_r = init_sampler(replayed, prompt)
    got = [next_subtoken_masses(state_r)]
    for chosen in (3, 1):
        state_r = advance(state_r, chosen, replayed)
        got.append(next_subtoken_masses(state_r))
    for want_m, got_m in zip(masses, got):
        assert np.allclose(want_m, got_m, rtol=0, atol=1e-15)
    assert math.isclose(
        score_subset(replayed, encoding([1, 3], 1)),
        score_subset(teacher, encoding([1, 3], 1)),
        rel_tol=1e-12,
    )
