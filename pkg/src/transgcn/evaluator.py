"""Filtered link-prediction evaluation over frozen embeddings.

Every split triple produces two queries (head-side and tail-side).  All
entities are candidates; corruptions appearing anywhere in train, valid, or
test are removed, never the true triple itself.  Exact score ties resolve
to the pessimistic mid-rank: 1 + #higher + ceil(#tied / 2).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kg import KnowledgeGraph, NeighborhoodIndex, Triple, known_triple_set
from .transform import Assumption

HITS_CUTOFFS = (1, 3, 10)


@dataclass
class RankingReport:
    """Filtered metrics plus per-query ranks aligned with ``triples``."""

    mrr: float
    hits1: float
    hits3: float
    hits10: float
    head_ranks: np.ndarray
    tail_ranks: np.ndarray
    triples: list[Triple] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {"mrr": self.mrr, "hits1": self.hits1, "hits3": self.hits3,
                "hits10": self.hits10}


def rank_from_scores(true_score: float, other_scores: np.ndarray) -> int:
    """Pessimistic mid-rank of the true candidate among the survivors."""
    higher = int((other_scores > true_score).sum())
    tied = int((other_scores == true_score).sum())
    return 1 + higher + (tied + 1) // 2


def candidate_scores(
    entities: np.ndarray,
    relations: np.ndarray,
    triple: Triple,
    side: str,
    assumption: Assumption,
    norm: str,
) -> np.ndarray:
    """Scores of every entity substituted into one slot of the triple."""
    h, r, t = triple
    rel = relations[r]
    if side == "tail":
        if assumption is Assumption.TRANSLATION:
            est = entities[h] + rel
        else:
            k = entities.shape[1] // 2
            hr, hi = entities[h][:k], entities[h][k:]
            rr, ri = rel[:k], rel[k:]
            est = np.concatenate([hr * rr - hi * ri, hr * ri + hi * rr])
        diff = est - entities
    elif side == "head":
        if assumption is Assumption.TRANSLATION:
            diff = entities + rel - entities[t]
        else:
            k = entities.shape[1] // 2
            er, ei = entities[:, :k], entities[:, k:]
            rr, ri = rel[:k], rel[k:]
            diff = np.concatenate([er * rr - ei * ri, er * ri + ei * rr], axis=1) - entities[t]
    else:
        raise ValueError(f"side must be 'head' or 'tail', got {side!r}")
    if norm == "l1":
        return -np.abs(diff).sum(axis=1)
    if norm == "l2":
        return -np.sqrt(np.square(diff).sum(axis=1))
    raise ValueError(f"unknown norm {norm!r}")


def filtered_rank(
    entities: np.ndarray,
    relations: np.ndarray,
    triple: Triple,
    side: str,
    known,
    assumption: Assumption,
    norm: str,
) -> int:
    """Filtered rank of the true entity for one query."""
    scores = candidate_scores(entities, relations, triple, side, assumption, norm)
    h, r, t = triple
    true_id = t if side == "tail" else h
    keep = np.ones(len(scores), dtype=bool)
    for c in range(len(scores)):
        if c == true_id:
            continue
        cand = (h, r, c) if side == "tail" else (c, r, t)
        if cand in known:
            keep[c] = False
    keep[true_id] = False  # the true triple is never its own competitor
    return rank_from_scores(float(scores[true_id]), scores[keep])


def _rank_against(scores: np.ndarray, true_id: int, blocked: set[int]) -> int:
    keep = np.ones(len(scores), dtype=bool)
    if blocked:
        keep[list(blocked)] = False
    keep[true_id] = False
    return rank_from_scores(float(scores[true_id]), scores[keep])


def evaluate(
    kg: KnowledgeGraph,
    split: str,
    entities: np.ndarray,
    relations: np.ndarray,
    assumption: Assumption,
    norm: str = "l1",
    threads: int = 1,
    known=None,
) -> RankingReport:
    """Rank every triple of a split on both sides and aggregate metrics.

    ``known`` defaults to the union of all three splits.  Results are
    independent of ``threads``: queries are chunked and merged positionally.
    """
    assumption = Assumption(assumption)
    triples = kg.split(split)
    if not triples:
        raise ValueError(f"cannot evaluate an empty {split} split")
    if known is None:
        known = known_triple_set(kg)

    # per-query blocked candidate ids, precomputed once
    tails_of: dict[tuple[int, int], set[int]] = {}
    heads_of: dict[tuple[int, int], set[int]] = {}
    for h, r, t in known:
        tails_of.setdefault((h, r), set()).add(t)
        heads_of.setdefault((r, t), set()).add(h)

    def rank_query(args) -> int:
        triple, side = args
        scores = candidate_scores(entities, relations, triple, side, assumption, norm)
        if side == "tail":
            blocked = tails_of.get((triple.head, triple.relation), set())
            return _rank_against(scores, triple.tail, blocked)
        blocked = heads_of.get((triple.relation, triple.tail), set())
        return _rank_against(scores, triple.head, blocked)

    queries = [(t, "head") for t in triples] + [(t, "tail") for t in triples]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ranks = list(pool.map(rank_query, queries, chunksize=64))
    else:
        ranks = [rank_query(q) for q in queries]

    n = len(triples)
    head_ranks = np.asarray(ranks[:n], dtype=np.int64)
    tail_ranks = np.asarray(ranks[n:], dtype=np.int64)
    all_ranks = np.concatenate([head_ranks, tail_ranks]).astype(np.float64)
    hits = {k: float(np.mean(all_ranks <= k)) for k in HITS_CUTOFFS}
    return RankingReport(
        mrr=float(np.mean(1.0 / all_ranks)),
        hits1=hits[1],
        hits3=hits[3],
        hits10=hits[10],
        head_ranks=head_ranks,
        tail_ranks=tail_ranks,
        triples=list(triples),
    )


def degree_bucket_report(report: RankingReport, index: NeighborhoodIndex) -> list[dict]:
    """Aggregate filtered MRR by train degree of the predicted entity.

    Buckets have geometric edges 1, 2, 4, 8, ... plus a leading bucket for
    degree-0 entities; together they partition the queries.
    """
    degrees, ranks = [], []
    for triple, rank in zip(report.triples, report.head_ranks):
        degrees.append(int(index.degree[triple.head]))
        ranks.append(int(rank))
    for triple, rank in zip(report.triples, report.tail_ranks):
        degrees.append(int(index.degree[triple.tail]))
        ranks.append(int(rank))
    max_degree = max(degrees) if degrees else 0
    edges = [0, 1]
    while edges[-1] <= max_degree:
        edges.append(edges[-1] * 2)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        bucket = [r for d, r in zip(degrees, ranks) if lo <= d < hi]
        rows.append(
            {
                "min_degree": lo,
                "max_degree": hi,
                "queries": len(bucket),
                "mrr": float(np.mean([1.0 / r for r in bucket])) if bucket else 0.0,
            }
        )
    return rows


def layer_sweep(kg: KnowledgeGraph, config, layer_counts, split: str = "test") -> list[dict]:
    """Train one model per layer count (shared seed/config) and compare."""
    from .trainer import train  # local import breaks the module cycle
    from .encoder import encode_arrays
    from .kg import build_index

    index = build_index(kg)
    rows = []
    for layers in layer_counts:
        cfg = config.replace(layers=int(layers))
        checkpoint = train(kg, cfg)
        entities, relations = encode_arrays(checkpoint.state, index)
        report = evaluate(kg, split, entities, relations, cfg.assumption, cfg.norm)
        rows.append({"layers": int(layers), "mrr": report.mrr, "hits10": report.hits10})
    return rows
