"""Full-to-Subset conversion.

``score_subset`` marginalizes a full-vocabulary model over the relative
cover encodings of a subset encoding.  The sampler turns that identity
into sequential next-sub-token distributions with exactly one model
evaluation per accepted sub-token: the cover set is maintained
incrementally, and the mass of covers that would extend past the basis is
read off a precomputed prefix matrix applied to the cached conditional
distribution.

Cover probabilities are carried in log space; sums use log-sum-exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import Encoding, is_valid, relative_encode, token_expansion
from .cover import CoverEntry, CoverSet, relative_cover_search
from .errors import DeadEnd, InvalidBasis, ZeroProbabilityChoice
from .lm import NEG_INF, LmBackend, draw_index
from .vocab import EOS_ID, SubsetView


def _logaddexp_many(values: list[float]) -> float:
    if not values:
        return NEG_INF
    out = NEG_INF
    for v in values:
        out = np.logaddexp(out, v)
    return float(out)


@dataclass(frozen=True)
class PrefixMatrix:
    """Sparse boolean Q over (sub-vocab x full-vocab).

    Column j holds a single 1 at the row of token j's first sub-token under
    relative decoding, so Q @ dist aggregates full-token mass by the
    sub-token each full token begins with.
    """

    sub_size: int
    full_size: int
    first_sub: np.ndarray  # shape (full_size,), row index per column

    def apply(self, dist: np.ndarray) -> np.ndarray:
        out = np.zeros(self.sub_size)
        np.add.at(out, self.first_sub, dist)
        return out

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.sub_size, self.full_size), dtype=bool)
        dense[self.first_sub, np.arange(self.full_size)] = True
        return dense


def build_prefix_matrix(sub: SubsetView, full: SubsetView) -> PrefixMatrix:
    """Q[i, j] = 1 iff sub-token i is the first sub-token of token j's demerge.

    First-sub-token semantics (the tau indicator), not mere byte-prefix
    matching: the two differ when a sub-token prefixes a full token's bytes
    without heading its demerged form, and the cover update needs the former.
    """
    if sub.base is not full.base or sub.bound > full.bound:
        raise InvalidBasis("prefix matrix requires nested views over one vocab")
    first = np.array(
        [token_expansion(full.base, tid, sub.bound)[0] for tid in full.token_ids()],
        dtype=np.int64,
    )
    return PrefixMatrix(sub.size, full.size, first)


def attach_probs(backend: LmBackend, covers: CoverSet) -> CoverSet:
    entries = tuple(
        CoverEntry(e.ids, e.tail, backend.joint_logprob(Encoding(e.ids, covers.level)))
        for e in covers.entries
    )
    return CoverSet(covers.basis, covers.level, entries)


def score_subset_log(backend: LmBackend, enc: Encoding) -> float:
    """Log of the marginalization identity: total joint mass of the cover set."""
    sub = backend.view.base.view(enc.level)
    if not is_valid(enc, sub):
        return NEG_INF
    covers = attach_probs(backend, relative_cover_search(enc, backend.view))
    return _logaddexp_many([e.logp for e in covers.entries])


def score_subset(backend: LmBackend, enc: Encoding) -> float:
    """Probability that the full-vocab model generates text whose subset
    encoding begins with ``enc``; 0 for invalid encodings."""
    return math.exp(score_subset_log(backend, enc))


@dataclass(frozen=True)
class SubtokenSamplerState:
    """Covers of the basis plus the cached conditional at its lifted form.

    ``log_base`` is the joint log-probability of the lifted basis (the
    unique empty-tail cover).  ``cond`` is the one cached model row the
    next advance consumes.
    """

    basis: Encoding
    covers: CoverSet
    cond: np.ndarray
    log_base: float
    matrix: PrefixMatrix


def _lifted_logp(covers: CoverSet) -> float:
    for e in covers.entries:
        if not e.tail:
            return e.logp if e.logp is not None else NEG_INF
    return NEG_INF


def init_sampler(backend: LmBackend, prompt: Encoding) -> SubtokenSamplerState:
    """Build the sampler state from scratch (one search plus one model row)."""
    sub = backend.view.base.view(prompt.level)
    if not is_valid(prompt, sub):
        raise InvalidBasis(f"prompt {prompt.ids} is not canonical at bound {prompt.level}")
    covers = attach_probs(backend, relative_cover_search(prompt, backend.view))
    matrix = build_prefix_matrix(sub, backend.view)
    if prompt.ids and prompt.ids[-1] == EOS_ID:
        cond = np.zeros(backend.view.size)
        cond[EOS_ID] = 1.0
    else:
        cond = backend.next_dist(relative_encode(prompt, backend.view))
    return SubtokenSamplerState(
        basis=prompt,
        covers=covers,
        cond=cond,
        log_base=_lifted_logp(covers),
        matrix=matrix,
    )


def next_subtoken_masses(state: SubtokenSamplerState) -> np.ndarray:
    """Unnormalized sub-token masses; their sum equals score_subset(basis).

    Per sub-token t': the mass of covers whose pending tail starts with t'
    plus the lifted-basis mass routed through Q from the cached conditional.
    No model call is made.
    """
    sub_size = state.matrix.sub_size
    log_masses: list[list[float]] = [[] for _ in range(sub_size)]
    for entry in state.covers.entries:
        if entry.tail and entry.logp is not None and entry.logp > NEG_INF:
            log_masses[entry.tail[0]].append(entry.logp)
    if state.log_base > NEG_INF:
        with np.errstate(divide="ignore"):
            log_cond = np.log(state.cond)
        for tid in range(state.matrix.full_size):
            lc = float(log_cond[tid])
            if lc > NEG_INF:
                log_masses[state.matrix.first_sub[tid]].append(state.log_base + lc)
    return np.exp([_logaddexp_many(v) for v in log_masses])


def next_subtoken_dist(state: SubtokenSamplerState) -> np.ndarray:
    masses = next_subtoken_masses(state)
    total = masses.sum()
    if total <= 0.0:
        raise DeadEnd(f"no continuation mass after basis {state.basis.ids}")
    return masses / total


def advance(
    state: SubtokenSamplerState, chosen: int, backend: LmBackend
) -> SubtokenSamplerState:
    """Extend the basis by one sub-token: filter covers whose pending tail
    starts with it, append lifted-basis extensions by full tokens beginning
    with it, and cache one fresh model row for the new lifted basis."""
    new_basis = state.basis.append(chosen)

    kept = [
        CoverEntry(e.ids, e.tail[1:], e.logp)
        for e in state.covers.entries
        if e.tail and e.tail[0] == chosen
    ]
    lifted = relative_encode(state.basis, backend.view)
    with np.errstate(divide="ignore"):
        log_cond = np.log(state.cond)
    added = []
    for tid in range(backend.view.size):
        expansion = token_expansion(backend.view.base, tid, state.basis.level)
        if expansion[0] != chosen:
            continue
        cand = lifted.append(tid)
        if not is_valid(cand, backend.view):
            continue
        logp = state.log_base + float(log_cond[tid])
        added.append(CoverEntry(cand.ids, expansion[1:], logp))

    entries = tuple(sorted(kept + added, key=lambda e: e.ids))
    if not entries or all(e.logp is None or e.logp == NEG_INF for e in entries):
        raise ZeroProbabilityChoice(
            f"sub-token {chosen} has zero probability after {state.basis.ids}"
        )
    covers = CoverSet(new_basis, backend.view.bound, entries)

    if chosen == EOS_ID:
        cond = np.zeros(backend.view.size)
        cond[EOS_ID] = 1.0  # absorption; no model call needed
    else:
        cond = backend.next_dist(relative_encode(new_basis, backend.view))
    return SubtokenSamplerState(
        basis=new_basis,
        covers=covers,
        cond=cond,
        log_base=_lifted_logp(covers),
        matrix=state.matrix,
    )


def sample_subtokens(
    backend: LmBackend,
    prompt: Encoding,
    rng: np.random.Generator,
    max_tokens: int,
):
    """Stream sub-tokens drawn from the converted subset model; stops at EOS."""
    state = init_sampler(backend, prompt)
    for _ in range(max_tokens):
        dist = next_subtoken_dist(state)
        chosen = draw_index(rng, dist)
        yield chosen, state
        if chosen == EOS_ID:
            return
        state = advance(state, chosen, backend)
