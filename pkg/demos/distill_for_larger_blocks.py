"""
Distillation makes targets easier to propose
============================================

Lookahead heads only earn large blocks when the continuation is
predictable. Noisy gold targets cap how consistent the heads can be, but a
teacher's own greedy decodes are a deterministic function of the input, so
a student trained on them agrees with itself further ahead and accepts
bigger blocks, even when the teacher itself is mediocre.
"""

from blockdec.criteria import exact
from blockdec.engine import DecodeConfig, blockwise_decode_combined
from blockdec.harness.corpus import Corpus, make_pattern_corpus, strip_eos
from blockdec.harness.training import TrainingConfig, default_model_config, train_model
from blockdec.models.distill import distill_corpus

SMALL = dict(num_heads=4, d_model=32, d_hidden=32, num_layers=2)
TRAINING = TrainingConfig(steps=2000, batch_size=16, learning_rate=0.3, seed=0)


def mean_block(model, inputs, eos, max_len):
    config = DecodeConfig(block_size=4, max_len=max_len, criterion=exact(),
                          eos_token=eos)
    tokens = iterations = 0
    for inp in inputs:
        result = blockwise_decode_combined(model, inp, config)
        tokens += len(result.output)
        iterations += result.iterations
    return tokens / iterations


# gold data with 15% label noise: the true rule is repeat-twice, but the
# targets contradict it often enough to keep any model hedging
gold = make_pattern_corpus("repeat", alphabet=8, n_pairs=1024, min_len=3,
                           max_len=3, copies=2, noise=0.15, seed=1)
eos = gold.vocab.eos_token
max_len = gold.max_target_len() + 1

teacher, _ = train_model(gold, default_model_config(gold, **SMALL), TRAINING)

# replace every target with the teacher's greedy decode of the same input
raw = distill_corpus(teacher, [inp for inp, _ in gold.pairs], max_len, eos_token=eos)
pairs = tuple((inp, strip_eos(out, eos)) for inp, out in raw if strip_eos(out, eos))
distilled = Corpus(kind=gold.kind, vocab=gold.vocab, pairs=pairs, meta={})
changed = sum(a != b for (_, a), (_, b) in zip(gold.pairs, distilled.pairs))
print(f"teacher rewrote {changed}/{len(gold)} targets")

# same architecture, same schedule, same seed; only the targets differ
student, _ = train_model(distilled, default_model_config(distilled, **SMALL), TRAINING)

inputs = [inp for inp, _ in gold.pairs[:48]]
print("mean accepted block size at k=4, exact criterion:")
print(f"  trained on noisy gold targets: {mean_block(teacher, inputs, eos, max_len):.2f}")
print(f"  trained on teacher decodes:    {mean_block(student, inputs, eos, max_len):.2f}")
