"""Per-position acceptance predicates for the verify substep.

A criterion decides whether a proposed token is acceptable given the base
model's distribution over the same position. ``exact`` preserves greedy
equivalence; ``top_k`` and ``distance`` trade fidelity for larger accepted
blocks. The ``min_block`` floor forces a minimum number of tokens per
iteration and is applied by the decode loop via :func:`apply_min_block`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

KINDS = ("exact", "top_k", "distance")


@dataclass(frozen=True)
class AcceptanceCriterion:
    """Acceptance predicate configuration.

    kind:      one of "exact", "top_k", "distance"
    top_k_k:   membership rank for the top_k kind (top_k_k=1 behaves as exact)
    epsilon:   integer intensity radius for the distance kind
    min_block: floor on tokens accepted per decode iteration (1 = no floor)
    """

    kind: str = "exact"
    top_k_k: int = 1
    epsilon: int = 0
    min_block: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown criterion kind {self.kind!r}")
        if self.top_k_k < 1:
            raise ConfigurationError("top_k_k must be >= 1")
        if self.epsilon < 0 or int(self.epsilon) != self.epsilon:
            raise ConfigurationError("epsilon must be a non-negative integer")
        if self.min_block < 1:
            raise ConfigurationError("min_block must be >= 1")

    def describe(self) -> str:
        """Textual form, matching the CLI grammar (see harness.cli)."""
        parts = [f"kind={self.kind}"]
        if self.kind == "top_k":
            parts.append(f"k={self.top_k_k}")
        if self.kind == "distance":
            parts.append(f"eps={self.epsilon}")
        if self.min_block != 1:
            parts.append(f"min_block={self.min_block}")
        return ",".join(parts)


EXACT = AcceptanceCriterion()


def exact(min_block: int = 1) -> AcceptanceCriterion:
    return AcceptanceCriterion(kind="exact", min_block=min_block)


def top_k(k: int, min_block: int = 1) -> AcceptanceCriterion:
    return AcceptanceCriterion(kind="top_k", top_k_k=k, min_block=min_block)


def distance(epsilon: int, min_block: int = 1) -> AcceptanceCriterion:
    return AcceptanceCriterion(kind="distance", epsilon=epsilon, min_block=min_block)


def argmax_token(dist: np.ndarray) -> int:
    """Highest-scoring token id; ties resolved to the lowest token id."""
    return int(np.argmax(dist))


def top_tokens(dist: np.ndarray, k: int) -> np.ndarray:
    """The k highest-scoring token ids, ordered by (descending score,
    ascending token id). Stable sort makes boundary ties deterministic."""
    order = np.argsort(-np.asarray(dist), kind="stable")
    return order[:k]


def accepts(criterion: AcceptanceCriterion, proposal: int, base_dist: np.ndarray) -> bool:
    """Decide whether `proposal` is acceptable against the base model's
    log-probability distribution for the same position. Pure function."""
    base_dist = np.asarray(base_dist)
    if criterion.kind == "exact":
        return proposal == argmax_token(base_dist)
    if criterion.kind == "top_k":
        return proposal in top_tokens(base_dist, criterion.top_k_k)
    # distance: token ids are integer intensities
    return abs(int(proposal) - argmax_token(base_dist)) <= criterion.epsilon


def apply_min_block(k_hat: int, floor: int, k: int, remaining: int) -> int:
    """Raise a verified prefix length to the configured floor.

    Returns max(k_hat, min(floor, remaining)). Tokens forced beyond the
    verified prefix are taken from the proposal list by the decode loop,
    which deliberately abandons greedy equivalence.
    """
    if not 1 <= k_hat <= k:
        raise ValueError(f"k_hat={k_hat} outside [1, {k}]")
    return max(k_hat, min(floor, remaining))
