"""Blockwise parallel decoding engine.

The engine drives a k-head scoring model through the predict / verify /
accept loop:

  predict  propose k future tokens, one per head, all conditioned on the
           current output prefix
  verify   score every proposal position in a single model call and find
           the longest prefix of proposals the base head agrees with
  accept   extend the output by that prefix (at least one token per
           iteration) and repeat

With the exact acceptance criterion the output is identical to greedy
decoding token for token; the payoff is fewer model invocations. The
combined scheme merges the next iteration's predict into the current
verify call, reading next proposals from the scored grid row that matches
the tokens just accepted.

All decode functions return a :class:`DecodeResult` whose accounting
fields satisfy sum(accepted_sizes) == len(output) and
iterations == len(accepted_sizes).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence as TypingSequence

import numpy as np

from .criteria import AcceptanceCriterion, EXACT, accepts, apply_min_block, argmax_token
from .errors import ConfigurationError, ModelContractError

NORMALIZATION_TOL = 1e-5


@dataclass(frozen=True)
class Sequence:
    """A token sequence tagged with its role in a task pair."""

    tokens: tuple
    role: str = "output"  # "input" or "output"

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if self.role not in ("input", "output"):
            raise ConfigurationError(f"unknown sequence role {self.role!r}")
        if any(t < 0 for t in self.tokens):
            raise ConfigurationError("token ids must be non-negative")

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class DecodeConfig:
    """Settings for one decode run.

    block_size: number of proposal heads used per iteration (k)
    max_len:    output token budget, counting a produced end token
    criterion:  per-position acceptance predicate
    min_block:  floor on tokens accepted per iteration, in [1, block_size];
                combined with criterion.min_block by taking the larger
    eos_token:  token id that terminates decoding, or None
    """

    block_size: int
    max_len: int
    criterion: AcceptanceCriterion = EXACT
    min_block: int = 1
    eos_token: Optional[int] = None

    def __post_init__(self):
        if self.block_size < 1:
            raise ConfigurationError("block_size must be >= 1")
        if self.max_len < 1:
            raise ConfigurationError("max_len must be >= 1")
        if not 1 <= self.min_block <= self.block_size:
            raise ConfigurationError(
                f"min_block must be in [1, block_size], got {self.min_block}"
            )
        if self.criterion.min_block > self.block_size:
            raise ConfigurationError(
                "criterion.min_block exceeds block_size "
                f"({self.criterion.min_block} > {self.block_size})"
            )
        if self.eos_token is not None and self.eos_token < 0:
            raise ConfigurationError("eos_token must be a non-negative id or None")

    @property
    def effective_min_block(self) -> int:
        return max(self.min_block, self.criterion.min_block)


@dataclass(frozen=True)
class BlockScores:
    """Log-probability grid from one scoring call.

    grid[i, h] is the head h+1 distribution over the vocabulary given the
    output prefix extended by the first i candidate tokens. Row 0 conditions
    on the bare prefix, so grid has len(candidates) + 1 rows. Head 1
    (grid[:, 0]) is the base next-token distribution used for verification.

    base_len records the prefix length row 0 conditions on.
    """

    grid: np.ndarray
    base_len: int

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        object.__setattr__(self, "grid", grid)
        if grid.ndim != 3:
            raise ModelContractError(
                f"score grid must be (rows, heads, vocab), got shape {grid.shape}"
            )
        if np.isnan(grid).any():
            raise ModelContractError("score grid contains NaN")
        mass = np.exp(grid).sum(axis=-1)
        worst = float(np.max(np.abs(mass - 1.0)))
        if worst > NORMALIZATION_TOL:
            raise ModelContractError(
                f"score grid rows are not normalized log-probs (off by {worst:.3e})"
            )
        if self.base_len < 0:
            raise ModelContractError("base_len must be >= 0")

    @property
    def rows(self) -> int:
        return self.grid.shape[0]

    @property
    def heads(self) -> int:
        return self.grid.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.grid.shape[2]


@dataclass(frozen=True)
class DecodeResult:
    """Output of a decode run plus its accounting.

    output:            produced token ids, including the end token if one
                       was produced within budget
    accepted_sizes:    tokens accepted per iteration, each >= 1
    iterations:        number of predict/verify/accept rounds
    model_invocations: scoring calls made (each call scores a full grid)
    wall_clock_ns:     elapsed time of the decode loop
    matched_greedy:    whether output equals the greedy output, when known
    """

    output: tuple
    accepted_sizes: tuple
    iterations: int
    model_invocations: int
    wall_clock_ns: int
    matched_greedy: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "output", tuple(int(t) for t in self.output))
        object.__setattr__(
            self, "accepted_sizes", tuple(int(s) for s in self.accepted_sizes)
        )
        if sum(self.accepted_sizes) != len(self.output):
            raise ModelContractError(
                "accepted_sizes do not sum to output length: "
                f"{self.accepted_sizes} vs {len(self.output)} tokens"
            )
        if self.iterations != len(self.accepted_sizes):
            raise ModelContractError(
                f"iterations {self.iterations} != len(accepted_sizes) "
                f"{len(self.accepted_sizes)}"
            )
        if any(s < 1 for s in self.accepted_sizes):
            raise ModelContractError("every iteration must accept at least one token")
        if self.model_invocations < self.iterations:
            raise ModelContractError("fewer invocations than iterations")
        if self.wall_clock_ns < 0:
            raise ModelContractError("negative wall clock")

    @property
    def mean_accepted_block_size(self) -> float:
        if self.iterations == 0:
            return 0.0
        return len(self.output) / self.iterations


def _check_model(model, config: DecodeConfig):
    if config.block_size > model.num_heads:
        raise ConfigurationError(
            f"block_size {config.block_size} exceeds model heads {model.num_heads}"
        )
    if config.criterion.kind == "distance" and not getattr(model, "intensity_vocab", False):
        raise ConfigurationError(
            "distance criterion requires a model over an integer intensity vocabulary"
        )


def _grid_proposals(scores: BlockScores, row: int, k: int) -> tuple:
    """Argmax token of each of the first k heads at one grid row."""
    if row >= scores.rows:
        raise ModelContractError(
            f"grid has {scores.rows} rows, cannot read row {row}"
        )
    if k > scores.heads:
        raise ModelContractError(f"grid has {scores.heads} heads, need {k}")
    return tuple(argmax_token(scores.grid[row, h]) for h in range(k))


def predict_block(model, input_tokens, prefix, k: int):
    """Propose the next k tokens after `prefix`, one per head.

    Returns (proposals, scores) where proposals[i] is head i+1's argmax
    conditioned on the prefix alone and scores is the single-row grid the
    proposals were read from.
    """
    scores = model.score_grid(tuple(input_tokens), tuple(prefix), (), k)
    return _grid_proposals(scores, 0, k), scores


def verify_block(base_scores: BlockScores, proposals, criterion: AcceptanceCriterion) -> int:
    """Longest prefix of `proposals` accepted by the base head.

    Proposal j is checked against the base distribution conditioned on the
    prefix plus proposals[:j], which is grid row j. Returns a count in
    [0, len(proposals)]; zero is possible for externally supplied proposals,
    while the decode loops always receive at least one acceptance because
    the first proposal is the base head's own argmax.
    """
    proposals = tuple(proposals)
    if not proposals:
        raise ValueError("verify_block needs at least one proposal")
    if base_scores.rows < len(proposals):
        raise ModelContractError(
            f"grid has {base_scores.rows} rows, need {len(proposals)} to verify"
        )
    k_hat = 0
    for j, token in enumerate(proposals):
        if not accepts(criterion, token, base_scores.grid[j, 0]):
            break
        k_hat += 1
    return k_hat


def _accept(proposals, k_hat: int, config: DecodeConfig, remaining: int):
    """Apply the min-block floor and end-token truncation to a verified
    prefix length. Returns (accepted tokens, done flag)."""
    k_eff = apply_min_block(k_hat, config.effective_min_block, config.block_size, remaining)
    k_eff = min(k_eff, remaining)
    accepted = list(proposals[:k_eff])
    if config.eos_token is not None and config.eos_token in accepted:
        accepted = accepted[: accepted.index(config.eos_token) + 1]
        return accepted, True
    return accepted, False


def greedy_decode(model, input_tokens, config: DecodeConfig) -> DecodeResult:
    """Standard one-token-at-a-time argmax decoding.

    One model invocation per output token. Serves as the correctness and
    timing baseline for the blockwise schemes.
    """
    _check_model(model, config)
    input_tokens = tuple(input_tokens)
    output = []
    invocations = 0
    start = time.perf_counter_ns()
    while len(output) < config.max_len:
        scores = model.score_grid(input_tokens, tuple(output), (), 1)
        invocations += 1
        token = _grid_proposals(scores, 0, 1)[0]
        output.append(token)
        if config.eos_token is not None and token == config.eos_token:
            break
    elapsed = time.perf_counter_ns() - start
    return DecodeResult(
        output=tuple(output),
        accepted_sizes=(1,) * len(output),
        iterations=len(output),
        model_invocations=invocations,
        wall_clock_ns=elapsed,
        matched_greedy=True,
    )


def blockwise_decode(model, input_tokens, config: DecodeConfig) -> DecodeResult:
    """Blockwise decoding with separate predict and verify calls.

    Each iteration costs two model invocations, so producing m tokens in
    blocks of k takes about 2m/k calls instead of greedy's m.
    """
    _check_model(model, config)
    input_tokens = tuple(input_tokens)
    output = []
    accepted_sizes = []
    invocations = 0
    start = time.perf_counter_ns()
    while len(output) < config.max_len:
        remaining = config.max_len - len(output)
        proposals, _ = predict_block(model, input_tokens, output, config.block_size)
        invocations += 1
        proposals = proposals[:remaining]
        ver = model.score_grid(input_tokens, tuple(output), proposals, config.block_size)
        invocations += 1
        k_hat = verify_block(ver, proposals, config.criterion)
        if k_hat < 1:
            raise ModelContractError(
                "model rejected its own base proposal; scoring is not deterministic"
            )
        accepted, done = _accept(proposals, k_hat, config, remaining)
        output.extend(accepted)
        accepted_sizes.append(len(accepted))
        if done:
            break
    elapsed = time.perf_counter_ns() - start
    return DecodeResult(
        output=tuple(output),
        accepted_sizes=tuple(accepted_sizes),
        iterations=len(accepted_sizes),
        model_invocations=invocations,
        wall_clock_ns=elapsed,
    )


def blockwise_decode_combined(model, input_tokens, config: DecodeConfig) -> DecodeResult:
    """Blockwise decoding with merged scoring and proposal.

    The verify call for iteration t already contains, at the grid row
    matching the accepted prefix, every head's distribution for iteration
    t+1's proposals. Reusing that row drops the separate predict call, so
    producing m tokens in blocks of k costs about m/k + 1 invocations: one
    initial proposal call plus one call per iteration.
    """
    _check_model(model, config)
    input_tokens = tuple(input_tokens)
    output = []
    accepted_sizes = []
    start = time.perf_counter_ns()
    next_proposals, _ = predict_block(model, input_tokens, (), config.block_size)
    invocations = 1
    while len(output) < config.max_len:
        remaining = config.max_len - len(output)
        proposals = next_proposals[:remaining]
        ver = model.score_grid(input_tokens, tuple(output), proposals, config.block_size)
        invocations += 1
        k_hat = verify_block(ver, proposals, config.criterion)
        if k_hat < 1:
            raise ModelContractError(
                "model rejected its own base proposal; scoring is not deterministic"
            )
        accepted, done = _accept(proposals, k_hat, config, remaining)
        output.extend(accepted)
        accepted_sizes.append(len(accepted))
        if done or len(output) >= config.max_len:
            break
        next_proposals = _grid_proposals(ver, len(accepted), config.block_size)
    elapsed = time.perf_counter_ns() - start
    return DecodeResult(
        output=tuple(output),
        accepted_sizes=tuple(accepted_sizes),
        iterations=len(accepted_sizes),
        model_invocations=invocations,
        wall_clock_ns=elapsed,
    )
