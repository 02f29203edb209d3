"""Benchmark runner: decode a corpus under several configurations and
compare iteration counts, invocation counts, wall clock, greedy agreement,
and task quality against the greedy baseline.

The (k=1, exact) configuration is reported as the greedy baseline itself:
its speedup is 1.0 by definition and every other row's speedup is the ratio
of median greedy wall clock to that row's median wall clock. Wall-clock
fields are the only nondeterministic part of a report; everything else is
reproducible bit for bit from the model and corpus.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Optional

from ..criteria import AcceptanceCriterion, EXACT
from ..engine import DecodeConfig, blockwise_decode, blockwise_decode_combined, greedy_decode
from ..errors import BlockdecError, ConfigurationError
from .corpus import Corpus, exact_match, mean_absolute_error, strip_eos, token_accuracy

SCHEMES = ("combined", "standard")


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark settings.

    block_sizes x criteria defines the configuration grid. Decodes repeat
    `repeats` times and the median total wall clock is used for speedups.
    """

    block_sizes: tuple = (1, 2, 4, 8)
    criteria: tuple = (EXACT,)
    repeats: int = 3
    max_pairs: Optional[int] = None
    max_len: Optional[int] = None
    scheme: str = "combined"

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(k) for k in self.block_sizes))
        object.__setattr__(self, "criteria", tuple(self.criteria))
        if not self.block_sizes or any(k < 1 for k in self.block_sizes):
            raise ConfigurationError("block_sizes must be positive")
        if not self.criteria:
            raise ConfigurationError("need at least one criterion")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class BenchReport:
    """Benchmark results: one row per configuration, plus run metadata."""

    task: str
    quality_metric: str
    rows: tuple
    meta: dict = field(default_factory=dict)


def _decode_pass(decode_fn, model, inputs, config):
    """Decode every input once; returns (results, total wall clock ns)."""
    results = []
    for i, inp in enumerate(inputs):
        try:
            results.append(decode_fn(model, inp, config))
        except BlockdecError as exc:
            raise type(exc)(f"pair {i}: {exc}") from exc
    return results, sum(r.wall_clock_ns for r in results)


def _median_time(decode_fn, model, inputs, config, repeats):
    results, first = _decode_pass(decode_fn, model, inputs, config)
    times = [first]
    for _ in range(repeats - 1):
        times.append(_decode_pass(decode_fn, model, inputs, config)[1])
    return results, int(statistics.median(times))


def _quality(outputs, golds, eos_token, metric):
    scores = []
    exact = 0
    for out, gold in zip(outputs, golds):
        stripped = strip_eos(out, eos_token)
        if metric == "mean_absolute_error":
            scores.append(mean_absolute_error(stripped, gold))
        else:
            scores.append(token_accuracy(stripped, gold))
        exact += exact_match(stripped, gold)
    return sum(scores) / len(scores), exact / len(outputs)


def run_bench(model, corpus: Corpus, bench: BenchConfig = BenchConfig()) -> BenchReport:
    """Benchmark a model over a corpus across the configuration grid."""
    pairs = corpus.pairs[: bench.max_pairs] if bench.max_pairs else corpus.pairs
    inputs = [inp for inp, _ in pairs]
    golds = [tgt for _, tgt in pairs]
    eos = corpus.vocab.eos_token
    if bench.max_len is not None:
        max_len = bench.max_len
    elif corpus.fixed_target_len is not None:
        max_len = corpus.fixed_target_len
    else:
        max_len = corpus.max_target_len() + (1 if eos is not None else 0)
    decode_fn = blockwise_decode_combined if bench.scheme == "combined" else blockwise_decode

    greedy_cfg = DecodeConfig(block_size=1, max_len=max_len, eos_token=eos)
    greedy_results, greedy_ns = _median_time(greedy_decode, model, inputs, greedy_cfg, bench.repeats)
    greedy_outputs = [r.output for r in greedy_results]

    rows = []
    for k in bench.block_sizes:
        for criterion in bench.criteria:
            is_baseline = k == 1 and criterion == EXACT
            if is_baseline:
                results, total_ns = greedy_results, greedy_ns
            else:
                config = DecodeConfig(
                    block_size=k, max_len=max_len, criterion=criterion, eos_token=eos
                )
                results, total_ns = _median_time(decode_fn, model, inputs, config, bench.repeats)
            tokens = sum(len(r.output) for r in results)
            iterations = sum(r.iterations for r in results)
            invocations = sum(r.model_invocations for r in results)
            matches = sum(r.output == g for r, g in zip(results, greedy_outputs))
            quality, exact_rate = _quality(
                [r.output for r in results], golds, eos, corpus.quality_metric
            )
            rows.append({
                "k": k,
                "criterion": criterion.describe(),
                "mean_accepted_block_size": tokens / iterations if iterations else 0.0,
                "iterations_total": iterations,
                "invocations_total": invocations,
                "wall_clock_speedup_vs_greedy": greedy_ns / total_ns if total_ns else 0.0,
                "greedy_match_rate": matches / len(results),
                "task_quality_metric": quality,
                "exact_match_rate": exact_rate,
                "wall_clock_ns_total": total_ns,
                "baseline_wall_clock_ns": greedy_ns,
                "scheme": "greedy" if is_baseline else bench.scheme,
            })
    meta = {
        "pairs": len(pairs),
        "repeats": bench.repeats,
        "max_len": max_len,
        "scheme": bench.scheme,
        "vocab_size": corpus.vocab.size,
    }
    return BenchReport(
        task=corpus.kind, quality_metric=corpus.quality_metric, rows=tuple(rows), meta=meta
    )
