"""Distillation objectives as pure scalar functions over probability arrays.

Per-step KL divergence over full distributions, and the partial-KL loss
over a queried subset of token probabilities plus one complement bin for
the unqueried mass.  Analytic per-bin gradients are exposed for pipeline
consumers; a finite-difference check pins them in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ComplementUnderflow, ShapeMismatch

_UNDERFLOW_TOL = 1e-12


class KlResult(NamedTuple):
    value: float
    infinite: bool  # some teacher-supported token got zero student mass


def kl_loss(
    teacher: Sequence[np.ndarray] | np.ndarray,
    student: Sequence[np.ndarray] | np.ndarray,
) -> KlResult:
    """Sum over steps of KL(teacher || student), with 0*log(0) := 0.

    Infinite divergence (teacher mass on a zero-probability student token)
    is reported through the flag rather than raised.
    """
    t_steps = [np.asarray(t, dtype=float) for t in teacher]
    s_steps = [np.asarray(s, dtype=float) for s in student]
    if len(t_steps) != len(s_steps):
        raise ShapeMismatch(f"{len(t_steps)} teacher steps vs {len(s_steps)} student steps")
    total = 0.0
    infinite = False
    for step, (t, s) in enumerate(zip(t_steps, s_steps)):
        if t.shape != s.shape:
            raise ShapeMismatch(f"step {step}: teacher {t.shape} vs student {s.shape}")
        support = t > 0.0
        if np.any(support & (s <= 0.0)):
            infinite = True
            continue
        total += float(np.sum(t[support] * (np.log(t[support]) - np.log(s[support]))))
    return KlResult(math.inf if infinite else total, infinite)


@dataclass(frozen=True)
class SoftLabelStep:
    """Teacher probabilities for the queried token set of one step, paired
    with the student's probabilities for the same tokens."""

    token_ids: tuple[int, ...]
    teacher_q: np.ndarray
    student_p: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.teacher_q, dtype=float)
        p = np.asarray(self.student_p, dtype=float)
        object.__setattr__(self, "teacher_q", q)
        object.__setattr__(self, "student_p", p)
        n = len(self.token_ids)
        if q.shape != (n,) or p.shape != (n,):
            raise ShapeMismatch(f"step arrays must both have shape ({n},)")
        if len(set(self.token_ids)) != n:
            raise ShapeMismatch("queried token ids must be distinct")
        if np.any(q < 0) or np.any(p < 0) or np.any(q > 1) or np.any(p > 1):
            raise ShapeMismatch("probabilities must lie in [0, 1]")
        if q.sum() > 1.0 + _UNDERFLOW_TOL:
            raise ShapeMismatch("teacher bin mass exceeds 1")


def _step_terms(step: SoftLabelStep) -> tuple[float, float]:
    """(loss contribution, complement 1 - sum(student)) for one step."""
    q, p = step.teacher_q, step.student_p
    comp = 1.0 - float(p.sum())
    if comp <= _UNDERFLOW_TOL:
        raise ComplementUnderflow(
            f"student mass over queried bins is {p.sum()}, complement undefined"
        )
    q_rest = 1.0 - float(q.sum())
    loss = 0.0
    for qt, pt in zip(q, p):
        if qt == 0.0:
            continue
        if pt <= 0.0:
            return math.inf, comp
        loss -= qt * math.log(pt)
    if q_rest > 0.0:
        loss -= q_rest * math.log(comp)
    return loss, comp


def pkl_loss(steps: Sequence[SoftLabelStep]) -> float:
    """Partial KL: cross-entropy over queried bins plus one complement bin.

    With a single queried token at probability one this reduces to the
    negative log-likelihood of that token (the binary cross-entropy
    degenerate form).
    """
    return float(sum(_step_terms(step)[0] for step in steps))


def pkl_grad(steps: Sequence[SoftLabelStep]) -> list[np.ndarray]:
    """Per-step gradients of pkl_loss w.r.t. the queried student bins."""
    grads = []
    for step in steps:
        _, comp = _step_terms(step)
        q, p = step.teacher_q, step.student_p
        q_rest = 1.0 - float(q.sum())
        g = np.zeros(len(p))
        for i, (qt, pt) in enumerate(zip(q, p)):
            g[i] = (-qt / pt if qt > 0.0 else 0.0) + q_rest / comp
        grads.append(g)
    return grads


def combine_with_sft(distill_loss: float, sft_loss: float, omega: float) -> float:
    """Affine mix: omega * distillation + (1 - omega) * supervised term."""
    return omega * distill_loss + (1.0 - omega) * sft_loss


# --- soft-label file format ---------------------------------------------------
#
# Line-delimited, one step per line:
#   step <l> | <id>:<q> ... | student <id>:<p> ...

def format_soft_labels(steps: Sequence[SoftLabelStep]) -> str:
    lines = []
    for i, step in enumerate(steps):
        teacher = " ".join(f"{t}:{float(q)!r}" for t, q in zip(step.token_ids, step.teacher_q))
        student = " ".join(f"{t}:{float(p)!r}" for t, p in zip(step.token_ids, step.student_p))
        lines.append(f"step {i} | {teacher} | student {student}")
    return "\n".join(lines) + "\n"


def parse_soft_labels(text: str) -> list[SoftLabelStep]:
    from .errors import ParseError

    steps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 3 or not parts[0].startswith("step") or not parts[2].startswith("student"):
            raise ParseError(f"line {lineno}: expected 'step <l> | ... | student ...'")

        def read_pairs(chunk: str, lineno: int = lineno) -> tuple[tuple[int, ...], np.ndarray]:
            ids, vals = [], []
            for item in chunk.split():
                name, _, val = item.partition(":")
                try:
                    ids.append(int(name))
                    vals.append(float(val))
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: malformed pair {item!r}") from exc
            return tuple(ids), np.array(vals)

        t_ids, t_vals = read_pairs(parts[1])
        s_ids, s_vals = read_pairs(parts[2][len("student"):].strip())
        if t_ids != s_ids:
            raise ParseError(f"line {lineno}: teacher and student ids disagree")
        try:
            steps.append(SoftLabelStep(t_ids, t_vals, s_vals))
        except ShapeMismatch as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    return steps
