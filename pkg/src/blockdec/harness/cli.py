"""Command line interface.

Subcommands:

  train    fit a k-head model on a corpus and write a checkpoint
  distill  regenerate a corpus's targets with a teacher's greedy decodes
  decode   run one input through a model, printing the per-step trace
  bench    decode a corpus under a grid of configurations and report

Criteria are written as comma-separated key=value lists, for example
`kind=exact`, `kind=top_k,k=2` or `kind=distance,eps=2,min_block=1`; a bare
kind name is accepted as shorthand. The global --seed falls back to the
BLOCKDEC_SEED environment variable, then to 0.
"""

from __future__ import annotations

import argparse
import os
import sys

from .. import __version__
from ..criteria import AcceptanceCriterion
from ..engine import (
    DecodeConfig,
    Sequence,
    blockwise_decode,
    blockwise_decode_combined,
    greedy_decode,
)
from ..errors import BlockdecError, ParseError
from ..models.checkpoint import load_checkpoint, save_checkpoint
from ..models.distill import distill_corpus
from ..models.neural import FreezeMask, PARTITIONS
from ..models.synthetic import SYNTHETIC_KINDS, make_synthetic_model
from .bench import SCHEMES, BenchConfig, run_bench
from .corpus import Corpus, decode_text, load_corpus, save_corpus, strip_eos
from .report import FORMATS, emit_report
from .training import TrainingConfig, default_model_config, train_model

_CRITERION_KEYS = {"k": "top_k_k", "eps": "epsilon", "min_block": "min_block"}
_KEYS_BY_KIND = {
    "exact": {"min_block"},
    "top_k": {"k", "min_block"},
    "distance": {"eps", "min_block"},
}


def parse_criterion(text: str) -> AcceptanceCriterion:
    """Parse the criterion grammar, e.g. `kind=top_k,k=2,min_block=1`."""
    fields = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            if part in _KEYS_BY_KIND and "kind" not in fields:
                fields["kind"] = part
                continue
            raise ParseError(f"expected key=value in criterion, got {part!r}")
        key, _, value = part.partition("=")
        key, value = key.strip(), value.strip()
        if key in fields:
            raise ParseError(f"duplicate criterion key {key!r}")
        fields[key] = value
    kind = fields.pop("kind", None)
    if kind is None:
        raise ParseError("criterion needs kind=exact, kind=top_k or kind=distance")
    if kind not in _KEYS_BY_KIND:
        raise ParseError(f"unknown criterion kind {kind!r}")
    kwargs = {"kind": kind}
    for key, value in fields.items():
        if key not in _KEYS_BY_KIND[kind]:
            raise ParseError(f"key {key!r} is not valid for kind={kind}")
        try:
            kwargs[_CRITERION_KEYS[key]] = int(value)
        except ValueError:
            raise ParseError(f"criterion key {key} needs an integer, got {value!r}") from None
    return AcceptanceCriterion(**kwargs)


def _parse_int_list(text: str, what: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ParseError(f"{what} must be comma-separated integers, got {text!r}") from None


def _parse_freeze(text: str) -> FreezeMask:
    flags = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if part not in PARTITIONS:
            raise ParseError(f"unknown partition {part!r}, pick from {PARTITIONS}")
        flags[part] = True
    return FreezeMask(**flags)


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    raw = os.environ.get("BLOCKDEC_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"BLOCKDEC_SEED must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockdec",
        description="Blockwise parallel decoding: train, distill, decode, benchmark.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (default: $BLOCKDEC_SEED, then 0)")
    parser.add_argument("--report-format", choices=FORMATS, default="json",
                        help="serialization for bench reports")
    parser.add_argument("--out", default=None, help="output path (default depends on command)")
    # the same options are accepted after the subcommand; SUPPRESS keeps an
    # omitted one from overwriting a value given before the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--report-format", choices=FORMATS, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a k-head model on a corpus", parents=[common])
    t.add_argument("--corpus", required=True)
    t.add_argument("--corpus-kind", default=None)
    t.add_argument("--steps", type=int, default=8000)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--learning-rate", type=float, default=0.3)
    t.add_argument("--heads", type=int, default=4)
    t.add_argument("--d-model", type=int, default=64)
    t.add_argument("--d-hidden", type=int, default=64)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--max-context", type=int, default=None)
    t.add_argument("--freeze", default="", help="comma list of partitions to freeze")
    t.add_argument("--init-from", default=None, help="checkpoint to continue training from")
    t.add_argument("--log-every", type=int, default=0)

    d = sub.add_parser("distill", help="rewrite corpus targets with teacher decodes",
                       parents=[common])
    d.add_argument("--teacher", required=True)
    d.add_argument("--corpus", required=True)
    d.add_argument("--corpus-kind", default=None)
    d.add_argument("--max-len", type=int, default=None)

    dec = sub.add_parser("decode", help="decode one input, printing the block trace",
                         parents=[common])
    src = dec.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model checkpoint")
    src.add_argument("--synthetic", choices=SYNTHETIC_KINDS, help="use a seeded table model")
    what = dec.add_mutually_exclusive_group(required=True)
    what.add_argument("--input", help="input text (byte tokens)")
    what.add_argument("--tokens", help="input token ids, comma separated")
    dec.add_argument("--block-size", type=int, default=4)
    dec.add_argument("--criterion", default="kind=exact")
    dec.add_argument("--min-block", type=int, default=1)
    dec.add_argument("--max-len", type=int, default=32)
    dec.add_argument("--scheme", choices=SCHEMES + ("greedy",), default="combined")
    dec.add_argument("--vocab-size", type=int, default=16, help="synthetic model vocabulary")
    dec.add_argument("--check-greedy", action="store_true",
                     help="also run greedy decoding and compare outputs")
    dec.add_argument("--no-trace", action="store_true")

    b = sub.add_parser("bench", help="benchmark decode configurations over a corpus",
                       parents=[common])
    bsrc = b.add_mutually_exclusive_group(required=True)
    bsrc.add_argument("--model", help="model checkpoint")
    bsrc.add_argument("--synthetic", choices=SYNTHETIC_KINDS, help="use a seeded table model")
    b.add_argument("--corpus", required=True)
    b.add_argument("--corpus-kind", default=None)
    b.add_argument("--block-sizes", default="1,2,4,8")
    b.add_argument("--criteria", default="kind=exact",
                   help="semicolon-separated criterion specs")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--max-pairs", type=int, default=None)
    b.add_argument("--max-len", type=int, default=None)
    b.add_argument("--scheme", choices=SCHEMES, default="combined")
    b.add_argument("--heads", type=int, default=None, help="synthetic model heads")
    return parser


def _cmd_train(args, seed: int) -> int:
    corpus = load_corpus(args.corpus, kind=args.corpus_kind)
    training = TrainingConfig(
        steps=args.steps,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=seed,
        freeze=_parse_freeze(args.freeze),
        log_every=args.log_every,
    )
    model = None
    model_config = None
    if args.init_from:
        model = load_checkpoint(args.init_from)
    else:
        model_config = default_model_config(
            corpus,
            num_heads=args.heads,
            d_model=args.d_model,
            d_hidden=args.d_hidden,
            num_layers=args.layers,
            max_context=args.max_context,
        )
    model, losses = train_model(corpus, model_config=model_config, training=training, model=model)
    out = args.out or "model.ckpt"
    save_checkpoint(model, out)
    tail = losses[-min(50, len(losses)):]
    print(f"trained {len(losses)} steps on {len(corpus)} pairs; "
          f"final loss {sum(tail) / len(tail):.4f} (mean of last {len(tail)})")
    print(f"checkpoint written to {out}")
    return 0


def _cmd_distill(args, seed: int) -> int:
    del seed  # greedy distillation is deterministic
    teacher = load_checkpoint(args.teacher)
    corpus = load_corpus(args.corpus, kind=args.corpus_kind)
    eos = corpus.vocab.eos_token
    if args.max_len is not None:
        max_len = args.max_len
    elif corpus.fixed_target_len is not None:
        max_len = corpus.fixed_target_len
    else:
        max_len = corpus.max_target_len() + 1
    raw = distill_corpus(teacher, [inp for inp, _ in corpus.pairs], max_len, eos_token=eos)
    pairs, skipped = [], 0
    for inp, out in raw:
        target = strip_eos(out, eos)
        if not target:
            skipped += 1
            continue
        pairs.append((inp, target))
    if skipped:
        print(f"warning: skipped {skipped} pairs with empty teacher output", file=sys.stderr)
    if not pairs:
        raise BlockdecError("teacher produced no usable targets")
    distilled = Corpus(
        kind=corpus.kind,
        vocab=corpus.vocab,
        pairs=tuple(pairs),
        fixed_target_len=corpus.fixed_target_len,
        meta=dict(corpus.meta),
    )
    out_path = args.out or "distilled_corpus"
    save_corpus(distilled, out_path)
    print(f"distilled {len(pairs)} pairs written to {out_path}")
    return 0


def _token_renderer(model):
    cfg = getattr(model, "config", None)
    if cfg is not None and cfg.vocab_size == 258 and cfg.sep_token == 256:
        def render(t):
            if t == 256:
                return "<sep>"
            if t == 257:
                return "<eos>"
            if 32 <= t < 127:
                return chr(t)
            return f"\\x{t:02x}"
        return render, True
    return str, False


def _cmd_decode(args, seed: int) -> int:
    if args.model:
        model = load_checkpoint(args.model)
        eos = model.config.eos_token
    else:
        heads = max(args.block_size, 2)
        model = make_synthetic_model(
            args.synthetic, seed=seed, vocab_size=args.vocab_size, num_heads=heads
        )
        eos = None
    if args.tokens:
        source = Sequence(_parse_int_list(args.tokens, "--tokens"), role="input")
    else:
        source = Sequence(tuple(args.input.encode("utf-8")), role="input")
    config = DecodeConfig(
        block_size=args.block_size,
        max_len=args.max_len,
        criterion=parse_criterion(args.criterion),
        min_block=args.min_block,
        eos_token=eos,
    )
    decoders = {
        "combined": blockwise_decode_combined,
        "standard": blockwise_decode,
        "greedy": greedy_decode,
    }
    result = decoders[args.scheme](model, source.tokens, config)
    render, is_text = _token_renderer(model)
    if not args.no_trace:
        pos = 0
        for step, size in enumerate(result.accepted_sizes, start=1):
            chunk = result.output[pos : pos + size]
            pos += size
            print(f"Step {step}: {size} tokens [{', '.join(render(t) for t in chunk)}]")
    stripped = strip_eos(result.output, eos)
    rendered = decode_text(stripped) if is_text else ",".join(str(t) for t in stripped)
    print(f"output: {rendered}")
    print(
        f"{len(result.output)} tokens in {result.iterations} iterations, "
        f"{result.model_invocations} model invocations, "
        f"mean block {result.mean_accepted_block_size:.2f}, "
        f"{result.wall_clock_ns / 1e6:.2f} ms"
    )
    if args.check_greedy:
        greedy = greedy_decode(model, source.tokens, config)
        match = greedy.output == result.output
        print(f"matches greedy: {match} "
              f"({greedy.model_invocations} greedy invocations)")
        if not match:
            return 1
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(rendered + "\n")
    return 0


def _cmd_bench(args, seed: int) -> int:
    corpus = load_corpus(args.corpus, kind=args.corpus_kind)
    block_sizes = _parse_int_list(args.block_sizes, "--block-sizes")
    criteria = tuple(parse_criterion(c) for c in args.criteria.split(";") if c.strip())
    if args.model:
        model = load_checkpoint(args.model)
    else:
        heads = args.heads or max(block_sizes)
        model = make_synthetic_model(
            args.synthetic, seed=seed, vocab_size=corpus.vocab.size, num_heads=heads
        )
    bench = BenchConfig(
        block_sizes=block_sizes,
        criteria=criteria,
        repeats=args.repeats,
        max_pairs=args.max_pairs,
        max_len=args.max_len,
        scheme=args.scheme,
    )
    report = run_bench(model, corpus, bench)
    text = emit_report(report, args.report_format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"report written to {args.out}")
    else:
        print(text, end="")
    return 0


def cli(argv=None) -> int:
    """Entry point; returns a process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        seed = _resolve_seed(args)
        command = {
            "train": _cmd_train,
            "distill": _cmd_distill,
            "decode": _cmd_decode,
            "bench": _cmd_bench,
        }[args.command]
        return command(args, seed)
    except BlockdecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
