"""Triple scoring, negative sampling, and the two training objectives.

Scores are negated distances between the relation's estimate of the tail
and the tail itself, so 0 is the best possible score.  The margin objective
pairs with vanilla uniform corruption; the self-adversarial objective
weights negatives by a detached softmax over their own scores.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .kg import Triple
from .transform import Assumption, estimate_from_incoming

FILTER_RETRIES = 100


def _norm_rows(diff: Tensor, norm: str) -> Tensor:
    if norm == "l1":
        return ad.row_l1_norm(diff)
    if norm == "l2":
        return ad.row_l2_norm(diff)
    raise ValueError(f"unknown norm {norm!r}, expected 'l1' or 'l2'")


def score(h: Tensor, r: Tensor, t: Tensor, assumption: Assumption, norm: str = "l1") -> Tensor:
    """Row-wise score -||compose(h, r) - t||; shape (B, 1)."""
    diff = ad.sub(estimate_from_incoming(h, r, assumption), t)
    return ad.scale(_norm_rows(diff, norm), -1.0)


def score_triples(
    entities: Tensor,
    relations: Tensor,
    heads,
    rels,
    tails,
    assumption: Assumption,
    norm: str = "l1",
) -> Tensor:
    """Score id triples against encoded entity/relation matrices."""
    return score(
        ad.gather_rows(entities, heads),
        ad.gather_rows(relations, rels),
        ad.gather_rows(entities, tails),
        assumption,
        norm,
    )


def _gamma_const(gamma: float) -> Tensor:
    return ad.tensor([[float(gamma)]])


def margin_loss(pos_score: Tensor, neg_scores: Tensor, gamma: float) -> Tensor:
    """Sum over negatives of max(0, -f(pos) + f(neg) + gamma), one positive."""
    hinge = ad.relu(ad.add(ad.sub(neg_scores, pos_score), _gamma_const(gamma)))
    return ad.sum_all(hinge)


def batch_margin_loss(
    pos_scores: Tensor, neg_scores: Tensor, gamma: float, negatives_per_positive: int
) -> Tensor:
    """Mean over positives of the per-positive margin sums.

    ``neg_scores`` holds contiguous blocks of ``negatives_per_positive`` rows
    per positive, in positive order.
    """
    b = pos_scores.rows
    if neg_scores.rows != b * negatives_per_positive:
        raise ValueError("negative block layout does not match the positive count")
    repeat = np.repeat(np.arange(b), negatives_per_positive)
    pos_rep = ad.gather_rows(pos_scores, repeat)
    hinge = ad.relu(ad.add(ad.sub(neg_scores, pos_rep), _gamma_const(gamma)))
    return ad.scale(ad.sum_all(hinge), 1.0 / b)


def _softmax_blocks(scores: np.ndarray, alpha: float, block: int) -> np.ndarray:
    s = alpha * scores.reshape(-1, block)
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    return (e / e.sum(axis=1, keepdims=True)).reshape(-1, 1)


def self_adv_weights(neg_scores, alpha: float) -> np.ndarray:
    """Detached softmax weights over one positive's negatives, column (n, 1).

    Treated as constants downstream: no gradient flows through the weights.
    """
    values = neg_scores.values if isinstance(neg_scores, Tensor) else np.asarray(neg_scores)
    return _softmax_blocks(values.astype(np.float64), float(alpha), values.size)


def batch_self_adv_weights(neg_scores, alpha: float, negatives_per_positive: int) -> np.ndarray:
    """Per-positive softmax blocks for grouped negative scores."""
    values = neg_scores.values if isinstance(neg_scores, Tensor) else np.asarray(neg_scores)
    return _softmax_blocks(values.astype(np.float64), float(alpha), negatives_per_positive)


def batch_self_adv_loss(
    pos_scores: Tensor,
    neg_scores: Tensor,
    weights: np.ndarray,
    gamma: float,
    negatives_per_positive: int,
) -> Tensor:
    """Mean over positives of -log s(g + f_pos) - sum_i w_i log s(-f_i - g)."""
    b = pos_scores.rows
    if neg_scores.rows != b * negatives_per_positive:
        raise ValueError("negative block layout does not match the positive count")
    if np.asarray(weights).shape != (neg_scores.rows, 1):
        raise ValueError("weights must be a column matching the negative scores")
    g = _gamma_const(gamma)
    pos_term = ad.sum_all(ad.log_sigmoid(ad.add(pos_scores, g)))
    neg_logs = ad.log_sigmoid(ad.scale(ad.add(neg_scores, g), -1.0))
    neg_term = ad.sum_all(ad.hadamard(neg_logs, ad.tensor(weights)))
    return ad.scale(ad.add(pos_term, neg_term), -1.0 / b)


def self_adv_loss(pos_score: Tensor, neg_scores: Tensor, weights: np.ndarray,
                  gamma: float) -> Tensor:
    """Self-adversarial loss for a single positive and its negatives."""
    return batch_self_adv_loss(pos_score, neg_scores, weights, gamma, neg_scores.rows)


def sample_negatives(
    positive: Triple,
    n: int,
    num_entities: int,
    rng: np.random.Generator,
    known: frozenset | set | None = None,
) -> list[Triple]:
    """Corrupt head or tail uniformly, replacement always differing from the original.

    With ``known`` supplied, corruptions colliding with known triples are
    resampled up to FILTER_RETRIES times (the last draw is kept if every
    retry collides).  Default is unfiltered.
    """
    if num_entities < 2:
        raise ValueError("need at least two entities to corrupt a triple")
    out: list[Triple] = []
    for _ in range(n):
        neg = _corrupt(positive, num_entities, rng)
        if known is not None:
            tries = 0
            while (neg.head, neg.relation, neg.tail) in known and tries < FILTER_RETRIES:
                neg = _corrupt(positive, num_entities, rng)
                tries += 1
        out.append(neg)
    return out


def _corrupt(positive: Triple, num_entities: int, rng: np.random.Generator) -> Triple:
    corrupt_head = bool(rng.integers(0, 2))
    original = positive.head if corrupt_head else positive.tail
    draw = int(rng.integers(0, num_entities - 1))
    if draw >= original:
        draw += 1  # uniform over entities != original
    if corrupt_head:
        return Triple(draw, positive.relation, positive.tail)
    return Triple(positive.head, positive.relation, draw)
