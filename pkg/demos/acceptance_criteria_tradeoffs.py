"""
Trading fidelity for larger blocks
==================================

The exact criterion guarantees greedy-identical output but only accepts a
proposal when it matches the base argmax. Relaxed criteria (top-k sets, a
minimum block floor, intensity distance) accept more tokens per iteration
and give up some agreement with greedy. Benchmarks make the trade visible:
mean accepted block size rises while the greedy match rate falls.
"""

from blockdec.criteria import distance, exact, top_k
from blockdec.harness.bench import BenchConfig, run_bench
from blockdec.harness.corpus import Corpus, Vocab, make_pattern_corpus
from blockdec.harness.report import emit_report
from blockdec.harness.training import TrainingConfig, default_model_config, train_model
from blockdec.models.synthetic import make_synthetic_model

# a noisy corpus keeps the trained model imperfect, so the criteria differ
corpus = make_pattern_corpus("repeat", alphabet=8, n_pairs=1024, min_len=3,
                             max_len=3, copies=2, noise=0.15, seed=1)
model, _ = train_model(
    corpus,
    default_model_config(corpus, num_heads=4, d_model=32, d_hidden=32, num_layers=2),
    TrainingConfig(steps=2000, batch_size=16, learning_rate=0.3, seed=0),
)

# same model, same block size; only the acceptance rule changes. min_block
# forces whole blocks through regardless of agreement, the fixed-block
# extreme being min_block equal to the block size.
criteria = (exact(), top_k(2), top_k(4), exact(min_block=2), exact(min_block=4))
report = run_bench(model, corpus, BenchConfig(block_sizes=(4,), criteria=criteria,
                                              repeats=1, max_pairs=32))
columns = ("criterion", "mean_accepted_block_size", "greedy_match_rate",
           "task_quality_metric")
print("trained pattern model, block size 4:")
for row in report.rows:
    print("  " + "  ".join(f"{c}={row[c]:.3f}" if isinstance(row[c], float)
                           else f"{c}={row[c]}" for c in columns))

# the distance criterion reads token ids as intensities and accepts any
# proposal within epsilon of the base argmax; only meaningful when the
# vocabulary is an intensity scale, like an 8-bit pixel grid
grid = Corpus(
    kind="intensity_grid",
    vocab=Vocab(size=257, sep_token=256, eos_token=None, intensity=True),
    pairs=tuple(((i,), tuple((i * 37 + j * 11) % 256 for j in range(8)))
                for i in range(8)),
    fixed_target_len=8,
    meta={"width": 8, "height": 1},
)
pixels = make_synthetic_model("random_table", seed=2, vocab_size=257, num_heads=4)
report = run_bench(pixels, grid, BenchConfig(
    block_sizes=(4,), criteria=(exact(), distance(64), distance(255)), repeats=1))
print()
print(emit_report(report, "markdown"))
