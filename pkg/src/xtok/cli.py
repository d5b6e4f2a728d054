"""Command-line surface.

Exit codes: 0 success, 1 domain error (printed as ``error: <Kind>: ...``
on stderr), 2 usage error.  Output is deterministic given --seed; floats
print with repr so downstream consumers recover the exact doubles.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import codec
from .codec import encoding
from .convert_down import (
    init_sampler,
    next_subtoken_dist,
    next_subtoken_masses,
    sample_subtokens,
    score_subset_log,
)
from .convert_up import (
    StopSet,
    collect_leaves,
    convert_prob_approx,
    evaluate_leaves,
    expand_signed_leaves,
)
from .cover import relative_cover_search
from .errors import ParseError, XtokError
from .lm import (
    ExternalLogitsLm,
    LmBackend,
    load_ngram_lm,
    load_table_lm,
    uniform_byte_lm,
)
from .losses import kl_loss, parse_soft_labels, pkl_grad, pkl_loss
from .vocab import EOS_ID, BpeVocab, import_merges
from .verify import SUITES, approx_scatter_points, run_suites


def _load_vocab(path: str) -> BpeVocab:
    return import_merges(Path(path))


def _parse_ids(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(t) for t in text.split())
    except ValueError as exc:
        raise ParseError(f"encoding must be space-separated token ids: {text!r}") from exc


def _parse_backend(spec: str, vocab: BpeVocab, default_bound: int) -> LmBackend:
    """Backend spec: uniform | table:FILE | ngram:FILE | replay:FILE[@BOUND]."""
    if spec == "uniform":
        return uniform_byte_lm(vocab.view(0))
    kind, _, arg = spec.partition(":")
    if not arg:
        raise ParseError(f"backend spec {spec!r} missing a file argument")
    if kind == "table":
        return load_table_lm(arg, vocab.view)
    if kind == "ngram":
        return load_ngram_lm(arg, vocab.view(0))
    if kind == "replay":
        path, _, bound_text = arg.partition("@")
        bound = int(bound_text) if bound_text else default_bound
        return ExternalLogitsLm.from_replay(path, vocab.view(bound))
    raise ParseError(f"unknown backend kind {kind!r}")


def _emit(args, key: str, value: str) -> None:
    if getattr(args, "records", False):
        print(f"{key} {value}")
    else:
        print(f"{key}: {value}")


def _float(x: float) -> str:
    return repr(float(x))


# --- subcommands ---------------------------------------------------------------

def cmd_vocab(args) -> int:
    vocab = _load_vocab(args.vocab)
    _emit(args, "alphabet", str(len(vocab.alphabet)))
    _emit(args, "merges", str(vocab.num_merges))
    for tok in vocab.tokens:
        printable = tok.data.decode("ascii", errors="replace") if tok.id != EOS_ID else "<eos>"
        _emit(args, "token", f"{tok.id} {tok.data.hex()} {printable}")
    return 0


def cmd_encode(args) -> int:
    vocab = _load_vocab(args.vocab)
    bound = vocab.num_merges if args.bound is None else args.bound
    data = bytes.fromhex(args.hex) if args.hex is not None else args.text.encode()
    enc = codec.encode(data, vocab.view(bound))
    _emit(args, "ids", " ".join(map(str, enc.ids)))
    return 0


def cmd_decode(args) -> int:
    vocab = _load_vocab(args.vocab)
    bound = vocab.num_merges if args.bound is None else args.bound
    enc = encoding(_parse_ids(args.enc), bound)
    data = codec.decode(enc, vocab.view(bound))
    _emit(args, "hex", data.hex())
    _emit(args, "text", data.decode("ascii", errors="replace"))
    return 0


def cmd_valid(args) -> int:
    vocab = _load_vocab(args.vocab)
    bound = vocab.num_merges if args.bound is None else args.bound
    enc = encoding(_parse_ids(args.enc), bound)
    _emit(args, "valid", "true" if codec.is_valid(enc, vocab.view(bound)) else "false")
    return 0


def cmd_cover(args) -> int:
    vocab = _load_vocab(args.vocab)
    to_bound = vocab.num_merges if args.to_bound is None else args.to_bound
    enc = encoding(_parse_ids(args.enc), args.bound)
    covers = relative_cover_search(enc, vocab.view(to_bound))
    for entry in covers.entries:
        data = codec.decode(encoding(entry.ids, to_bound), vocab.view(to_bound))
        _emit(args, "cover", f"{' '.join(map(str, entry.ids))} | {data.hex()}")
    return 0


def cmd_score(args) -> int:
    vocab = _load_vocab(args.from_vocab)
    backend = _parse_backend(args.backend, vocab, default_bound=vocab.num_merges)
    for enc_text in args.enc:  # one logprob/prob pair per --enc, in order
        enc = encoding(_parse_ids(enc_text), args.to_bound)
        logp = score_subset_log(backend, enc)
        _emit(args, "logprob", _float(logp))
        _emit(args, "prob", _float(math.exp(logp)))
    return 0


def cmd_sample(args) -> int:
    vocab = _load_vocab(args.from_vocab)
    backend = _parse_backend(args.backend, vocab, default_bound=vocab.num_merges)
    prompt = encoding(_parse_ids(args.prompt), args.to_bound)
    rng = np.random.default_rng(args.seed)
    if args.print_dist:
        state = init_sampler(backend, prompt)
        dist = next_subtoken_dist(state)
        total = float(next_subtoken_masses(state).sum())
        with np.errstate(divide="ignore"):
            logs = np.log(dist)
        _emit(args, "dist", " ".join(f"{i}:{_float(lp)}" for i, lp in enumerate(logs.tolist())))
        _emit(args, "basis_logprob", _float(math.log(total) if total > 0.0 else float("-inf")))
    for tid, _state in sample_subtokens(backend, prompt, rng, args.max_tokens):
        data = vocab.token_bytes(tid)
        text = "<eos>" if tid == EOS_ID else data.decode("ascii", errors="replace")
        _emit(args, "token", f"{tid} {data.hex()} {text}")
    return 0


def cmd_convert_up(args) -> int:
    vocab = _load_vocab(args.vocab)
    backend = _parse_backend(args.backend, vocab, default_bound=0)
    enc_bound = vocab.num_merges if args.bound is None else args.bound
    stop = StopSet.eos_only() if args.stop == "eos" else StopSet()

    if args.scatter is not None:
        points = approx_scatter_points(
            n_points=args.points, seed=args.seed, n_beams=args.beams, max_len=args.max_len
        )
        lines = ["exact\tapprox"]
        lines += [f"{_float(e)}\t{_float(a)}" for e, a in points]
        Path(args.scatter).write_text("\n".join(lines) + "\n")
        print(_ascii_scatter(points))
        _emit(args, "points", str(len(points)))
        return 0

    enc = encoding(_parse_ids(args.enc), enc_bound)
    if args.approx:
        value = convert_prob_approx(
            backend, enc, n_beams=args.beams, stop=stop, max_len=args.max_len
        )
        _emit(args, "prob", _float(value))
        return 0
    leaves = expand_signed_leaves(vocab, enc, backend.view.bound, max_nodes=args.max_nodes)
    value = evaluate_leaves(backend, leaves, backend.view.bound)
    _emit(args, "prob", _float(value))
    _emit(args, "leaves", str(len(leaves)))
    if args.trace:
        for ids, coeff in sorted(leaves.items()):
            _emit(args, "leaf", f"{'+' if coeff > 0 else ''}{coeff} {' '.join(map(str, ids))}")
        data_ids = [t.id for t in vocab.alphabet[1:]]
        for ids, coeff in sorted(collect_leaves(leaves, data_ids).items()):
            _emit(
                args, "collected", f"{'+' if coeff > 0 else ''}{coeff} {' '.join(map(str, ids))}"
            )
    return 0


def cmd_loss(args) -> int:
    steps = parse_soft_labels(Path(args.soft_labels).read_text())
    if args.kind == "pkl":
        _emit(args, "loss", _float(pkl_loss(steps)))
        if args.grad:
            for i, g in enumerate(pkl_grad(steps)):
                _emit(args, "grad", f"{i} " + " ".join(_float(x) for x in g))
    else:
        teacher = [s.teacher_q for s in steps]
        student = [s.student_p for s in steps]
        res = kl_loss(teacher, student)
        _emit(args, "loss", _float(res.value))
        _emit(args, "infinite", "true" if res.infinite else "false")
    return 0


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = run_suites(names, trials=args.trials, seed=args.seed)
    ok = True
    for res in results:
        print(res.line())
        ok = ok and res.passed
    return 0 if ok else 1


def _ascii_scatter(points: list[tuple[float, float]], size: int = 21) -> str:
    grid = [["." if r == size - 1 - c else " " for c in range(size)] for r in range(size)]
    for exact, approx in points:
        c = min(int(exact * (size - 1) + 0.5), size - 1)
        r = size - 1 - min(int(approx * (size - 1) + 0.5), size - 1)
        grid[r][c] = "*"
    rows = ["|" + "".join(row) + "|" for row in grid]
    header = "approx (vertical) vs exact (horizontal), diagonal = perfect"
    return "\n".join([header, "+" + "-" * size + "+", *rows, "+" + "-" * size + "+"])


SUBCOMMANDS = {
    "vocab": cmd_vocab,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "valid": cmd_valid,
    "cover": cmd_cover,
    "score": cmd_score,
    "sample": cmd_sample,
    "convert-up": cmd_convert_up,
    "loss": cmd_loss,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xtok", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--records", action="store_true", help="line-delimited record output")
        return p

    p = add("vocab", help="inspect a vocab file")
    p.add_argument("--vocab", required=True)

    p = add("encode", help="encode text or hex bytes")
    p.add_argument("--vocab", required=True)
    p.add_argument("--bound", type=int, default=None)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text")
    group.add_argument("--hex")

    p = add("decode", help="decode token ids")
    p.add_argument("--vocab", required=True)
    p.add_argument("--bound", type=int, default=None)
    p.add_argument("--enc", required=True)

    p = add("valid", help="canonicity check")
    p.add_argument("--vocab", required=True)
    p.add_argument("--bound", type=int, default=None)
    p.add_argument("--enc", required=True)

    p = add("cover", help="relative cover encodings of a basis")
    p.add_argument("--vocab", required=True)
    p.add_argument("--bound", type=int, required=True, help="basis bound M'")
    p.add_argument("--to-bound", type=int, default=None, help="full bound M (default: all merges)")
    p.add_argument("--enc", required=True)

    p = add("score", help="subset-encoding probability under a full-vocab backend")
    p.add_argument("--from-vocab", required=True)
    p.add_argument("--to-bound", type=int, required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--enc", required=True, action="append", help="repeatable for batch scoring")

    p = add("sample", help="stream sub-tokens from the converted subset model")
    p.add_argument("--from-vocab", required=True)
    p.add_argument("--to-bound", type=int, required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--prompt", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int, default=16)
    p.add_argument("--print-dist", action="store_true")

    p = add("convert-up", help="encoding probability under a smaller-vocab backend")
    p.add_argument("--vocab", required=True)
    p.add_argument("--bound", type=int, default=None, help="encoding bound (default: full)")
    p.add_argument("--backend", required=True)
    p.add_argument("--enc", default="")
    p.add_argument("--exact", action="store_true", default=True)
    p.add_argument("--approx", action="store_true")
    p.add_argument("--beams", type=int, default=6)
    p.add_argument("--max-len", type=int, default=32)
    p.add_argument("--stop", choices=["eos", "space"], default="space")
    p.add_argument("--max-nodes", type=int, default=100_000)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--scatter", default=None, help="write exact/approx TSV points here")
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--seed", type=int, default=19)

    p = add("loss", help="evaluate distillation losses from a soft-label file")
    p.add_argument("--soft-labels", required=True)
    p.add_argument("--kind", choices=["pkl", "kl"], default="pkl")
    p.add_argument("--grad", action="store_true")

    p = add("verify", help="run oracle-equivalence suites")
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = SUBCOMMANDS[args.command]
    try:
        return handler(args)
    except XtokError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
