"""Scoring model interface.

A scoring model exposes `score_grid`, the single primitive the decode
engine needs: given an input sequence, an output prefix, and a list of
candidate continuation tokens, return log-probabilities for every head at
every candidate offset. Implementations decide how to amortize the work;
the neural model computes the whole grid in one forward pass, which is
where the blockwise speedup comes from.
"""

from __future__ import annotations

import numpy as np

from ..engine import BlockScores
from ..errors import ConfigurationError, LengthError


class ScoringModel:
    """Interface for models the decode engine can drive.

    Attributes
    ----------
    num_heads:       proposal heads available (head 1 is the base model)
    vocab_size:      size of the shared vocabulary
    intensity_vocab: True when token ids are integer intensities, which
                     makes the distance acceptance criterion meaningful
    """

    num_heads: int
    vocab_size: int
    intensity_vocab: bool = False

    def score_grid(self, input_tokens, prefix, candidates, k) -> BlockScores:
        """Score `k` heads at every candidate offset.

        Returns a BlockScores whose grid has len(candidates) + 1 rows; row i
        conditions on prefix + candidates[:i]. Counts as one model
        invocation regardless of grid size.
        """
        raise NotImplementedError

    def _check_heads(self, k: int):
        if not 1 <= k <= self.num_heads:
            raise ConfigurationError(
                f"requested {k} heads, model has {self.num_heads}"
            )


class TableBackedModel(ScoringModel):
    """Scoring model defined by a per-context distribution table.

    Subclasses implement `head_logprobs(input_tokens, context)` returning a
    (num_heads, vocab_size) array of log-probs for one conditioning context.
    `score_grid` assembles the grid row by row, so every row costs one table
    lookup; these models exercise the engine's arithmetic, not its speed.
    """

    max_context: int | None = None

    def head_logprobs(self, input_tokens, context) -> np.ndarray:
        raise NotImplementedError

    def score_grid(self, input_tokens, prefix, candidates, k) -> BlockScores:
        self._check_heads(k)
        input_tokens = tuple(int(t) for t in input_tokens)
        prefix = tuple(int(t) for t in prefix)
        candidates = tuple(int(t) for t in candidates)
        if self.max_context is not None:
            needed = len(prefix) + len(candidates)
            if needed > self.max_context:
                raise LengthError(
                    f"context of {needed} tokens exceeds limit {self.max_context}"
                )
        rows = []
        for i in range(len(candidates) + 1):
            table = self.head_logprobs(input_tokens, prefix + candidates[:i])
            rows.append(table[:k])
        return BlockScores(grid=np.stack(rows).astype(np.float64), base_len=len(prefix))
