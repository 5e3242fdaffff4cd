"""Training loop: Adam updates, epoch scheduling, validation selection.

The schedule has two phases.  The first ``pretrain_epochs`` epochs run the
zero-layer degenerate model (plain translation or rotation scoring) to warm
up the embeddings; the remaining epochs train the full stack.  Every
``eval_every`` epochs of the full phase the validation filtered MRR is
computed and the best-scoring parameters are kept.  Message passing is
always over the whole train graph; batching applies only to the positive
triples entering the loss.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, backward
from .encoder import LayerParams, ModelState, encode, encode_arrays
from .errors import ConfigError, NumericError, ShapeError
from .evaluator import evaluate
from .kg import KnowledgeGraph, build_index
from .objective import (
    batch_margin_loss,
    batch_self_adv_loss,
    batch_self_adv_weights,
    sample_negatives,
    score_triples,
)
from .transform import Assumption

logger = logging.getLogger("transgcn.trainer")

CHECKPOINT_VERSION = 1
SAMPLING_MODES = ("vanilla", "self-adversarial")
NORMS = ("l1", "l2")


@dataclass
class TrainConfig:
    """Full training surface; every field lands in the checkpoint.

    ``gamma`` and ``sampling`` left as None resolve per assumption: rotation
    gets gamma 12.0 with self-adversarial sampling, translation gets gamma
    1.0 with vanilla sampling.
    """

    assumption: Assumption = Assumption.TRANSLATION
    layers: int = 1
    dim: int = 32
    gamma: float | None = None
    alpha: float = 1.0
    negatives: int = 10
    lr: float = 0.001
    epochs: int = 100
    batch: int = 128
    eval_every: int = 10
    seed: int = 0
    norm: str = "l1"
    sampling: str | None = None
    pretrain_epochs: int = 0
    clip: float = 10.0  # global L2 gradient norm cap, 0 disables

    def __post_init__(self) -> None:
        if isinstance(self.assumption, str):
            try:
                self.assumption = Assumption(self.assumption.lower())
            except ValueError:
                raise ConfigError(f"unknown assumption {self.assumption!r}") from None
        self.norm = str(self.norm).lower()
        if self.sampling == "selfadv":  # accepted CLI spelling
            self.sampling = "self-adversarial"
        if self.gamma is None:
            self.gamma = 12.0 if self.assumption is Assumption.ROTATION else 1.0
        if self.sampling is None:
            self.sampling = (
                "self-adversarial" if self.assumption is Assumption.ROTATION else "vanilla"
            )
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.lr > 0, f"lr must be positive, got {self.lr}"),
            (self.layers >= 0, f"layers must be >= 0, got {self.layers}"),
            (self.dim >= 2, f"dim must be >= 2, got {self.dim}"),
            (self.negatives >= 1, f"negatives must be >= 1, got {self.negatives}"),
            (self.epochs >= 0, f"epochs must be >= 0, got {self.epochs}"),
            (self.batch >= 1, f"batch must be >= 1, got {self.batch}"),
            (self.eval_every >= 1, f"eval_every must be >= 1, got {self.eval_every}"),
            (self.pretrain_epochs >= 0,
             f"pretrain_epochs must be >= 0, got {self.pretrain_epochs}"),
            (self.clip >= 0, f"clip must be >= 0, got {self.clip}"),
            (math.isfinite(self.gamma), f"gamma must be finite, got {self.gamma}"),
            (math.isfinite(self.alpha) and self.alpha >= 0,
             f"alpha must be finite and >= 0, got {self.alpha}"),
            (self.norm in NORMS, f"norm must be one of {NORMS}, got {self.norm!r}"),
            (self.sampling in SAMPLING_MODES,
             f"sampling must be one of {SAMPLING_MODES}, got {self.sampling!r}"),
        ]
        if self.assumption is Assumption.ROTATION and self.dim % 2:
            raise ConfigError(f"rotation needs an even dim, got {self.dim}")
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    @property
    def relation_dim(self) -> int:
        return self.dim // 2 if self.assumption is Assumption.ROTATION else self.dim


@dataclass
class Checkpoint:
    """Best model of a run plus everything needed to resume or evaluate it."""

    config: TrainConfig
    state: ModelState
    entity_names: list[str]
    relation_names: list[str]
    best_valid_mrr: float  # NaN when no validation split was evaluated
    epoch: int
    adam_step: int = 0
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION


class TrainingAborted(NumericError):
    """Raised when a run hits non-finite numbers; carries the last-good model."""

    def __init__(self, message: str, checkpoint: Checkpoint):
        super().__init__(message)
        self.checkpoint = checkpoint


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    moments: tuple[np.ndarray, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    t: int = 1,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """One bias-corrected Adam update; returns (new_param, (m, v))."""
    m, v = moments
    if not (param.shape == grad.shape == m.shape == v.shape):
        raise ShapeError(
            f"adam_step shapes disagree: param {param.shape}, grad {grad.shape}, "
            f"m {m.shape}, v {v.shape}"
        )
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), (m, v)


def init_parameters(
    config: TrainConfig,
    num_entities: int,
    num_relations: int,
    rng: np.random.Generator,
) -> ModelState:
    """Fresh ModelState; draw order is entities, relations, then layer weights."""
    d = config.dim
    limit = 6.0 / math.sqrt(d)
    entities = rng.uniform(-limit, limit, size=(num_entities, d))
    if config.assumption is Assumption.ROTATION:
        relations = rng.uniform(0.0, 2.0 * math.pi, size=(num_relations, d // 2))
    else:
        relations = rng.uniform(-limit, limit, size=(num_relations, d))
        relations = relations / np.abs(relations).sum(axis=1, keepdims=True)
    layers = []
    for i in range(config.layers):
        w0 = np.eye(d) + rng.uniform(-0.01, 0.01, size=(d, d))
        w1 = np.eye(d) + rng.uniform(-0.01, 0.01, size=(d, d))
        layers.append(
            LayerParams(
                w0=ad.tensor(w0, requires_grad=True, name=f"w0_{i}"),
                w1=ad.tensor(w1, requires_grad=True, name=f"w1_{i}"),
            )
        )
    return ModelState(
        assumption=config.assumption,
        entity_embed=ad.tensor(entities, requires_grad=True, name="entity_embed"),
        relation_params=ad.tensor(relations, requires_grad=True, name="relation_params"),
        layers=layers,
    )


def _copy_state(state: ModelState) -> ModelState:
    layers = [
        LayerParams(
            w0=ad.tensor(layer.w0.values.copy(), requires_grad=True, name=layer.w0.name),
            w1=ad.tensor(layer.w1.values.copy(), requires_grad=True, name=layer.w1.name),
        )
        for layer in state.layers
    ]
    return ModelState(
        assumption=state.assumption,
        entity_embed=ad.tensor(
            state.entity_embed.values.copy(), requires_grad=True, name="entity_embed"
        ),
        relation_params=ad.tensor(
            state.relation_params.values.copy(), requires_grad=True, name="relation_params"
        ),
        layers=layers,
    )


def _clip_gradients(params: dict[str, ad.Tensor], max_norm: float) -> float:
    total = math.sqrt(sum(float(np.square(p.grad).sum()) for p in params.values()))
    if not math.isfinite(total):
        raise NumericError("gradient norm is not finite")
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for p in params.values():
            p.grad *= factor
    return total


def _snapshot(
    config: TrainConfig,
    kg: KnowledgeGraph,
    state: ModelState,
    mrr: float,
    epoch: int,
    step: int,
    adam_m: dict[str, np.ndarray],
    adam_v: dict[str, np.ndarray],
) -> Checkpoint:
    return Checkpoint(
        config=config,
        state=_copy_state(state),
        entity_names=list(kg.entity_names),
        relation_names=list(kg.relation_names),
        best_valid_mrr=mrr,
        epoch=epoch,
        adam_step=step,
        adam_m={k: m.copy() for k, m in adam_m.items()},
        adam_v={k: v.copy() for k, v in adam_v.items()},
    )


def train(
    kg: KnowledgeGraph, config: TrainConfig, init_state: ModelState | None = None
) -> Checkpoint:
    """Run the two-phase schedule and return the best checkpoint.

    ``init_state`` warm-starts from existing parameters (shapes must match
    the config); fresh Adam moments either way.  A non-finite loss or update
    aborts the run by raising TrainingAborted, whose ``checkpoint`` attribute
    holds the best (or last-good) model.
    """
    config.validate()
    if not kg.train:
        raise ConfigError("train split is empty")
    index = build_index(kg)
    ss = np.random.SeedSequence(config.seed)
    init_seq, sample_seq = ss.spawn(2)
    init_rng = np.random.default_rng(init_seq)
    sample_rng = np.random.default_rng(sample_seq)
    if init_state is not None:
        if init_state.assumption is not config.assumption:
            raise ConfigError(
                f"warm-start assumption {init_state.assumption.value} does not "
                f"match config {config.assumption.value}"
            )
        if init_state.dim != config.dim or init_state.num_layers != config.layers:
            raise ConfigError(
                f"warm-start shape (dim {init_state.dim}, layers "
                f"{init_state.num_layers}) does not match config "
                f"(dim {config.dim}, layers {config.layers})"
            )
        state = _copy_state(init_state)
    else:
        state = init_parameters(config, kg.num_entities, kg.num_relations, init_rng)
    params = state.parameters()
    adam_m = {k: np.zeros_like(p.values) for k, p in params.items()}
    adam_v = {k: np.zeros_like(p.values) for k, p in params.items()}
    step = 0
    pretrain_end = min(config.pretrain_epochs, config.epochs)
    has_valid = bool(kg.valid)
    best: Checkpoint | None = None
    n = config.negatives

    def run_epoch(epoch: int) -> float:
        nonlocal step
        active = 0 if epoch <= pretrain_end else config.layers
        step_state = (
            state
            if active == config.layers
            else dataclasses.replace(state, layers=state.layers[:active])
        )
        order = sample_rng.permutation(len(kg.train))
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch):
            chunk = order[start : start + config.batch]
            positives = [kg.train[i] for i in chunk]
            negatives = [
                neg
                for pos in positives
                for neg in sample_negatives(pos, n, kg.num_entities, sample_rng)
            ]
            ph = np.array([p.head for p in positives], dtype=np.int64)
            pr = np.array([p.relation for p in positives], dtype=np.int64)
            pt = np.array([p.tail for p in positives], dtype=np.int64)
            nh = np.array([q.head for q in negatives], dtype=np.int64)
            nr = np.array([q.relation for q in negatives], dtype=np.int64)
            nt = np.array([q.tail for q in negatives], dtype=np.int64)
            with Tape() as tape:
                entities, relations = encode(step_state, index)
                pos_scores = score_triples(
                    entities, relations, ph, pr, pt, config.assumption, config.norm
                )
                neg_scores = score_triples(
                    entities, relations, nh, nr, nt, config.assumption, config.norm
                )
                if config.sampling == "vanilla":
                    loss = batch_margin_loss(pos_scores, neg_scores, config.gamma, n)
                else:
                    weights = batch_self_adv_weights(neg_scores, config.alpha, n)
                    loss = batch_self_adv_loss(
                        pos_scores, neg_scores, weights, config.gamma, n
                    )
            for p in params.values():
                p.zero_grad()
            backward(tape, loss)
            _clip_gradients(params, config.clip)
            step += 1
            for name, p in params.items():
                updated, (m, v) = adam_step(
                    p.values, p.grad, (adam_m[name], adam_v[name]), config.lr, t=step
                )
                if not np.all(np.isfinite(updated)):
                    raise NumericError(f"non-finite update for {name} at step {step}")
                adam_m[name], adam_v[name] = m, v
                p.values = updated
            total += float(loss.values[0, 0]) * len(positives)
            count += len(positives)
        return total / count

    epoch = 0
    try:
        for epoch in range(1, config.epochs + 1):
            mean_loss = run_epoch(epoch)
            should_eval = has_valid and (
                epoch == config.epochs
                or (epoch > pretrain_end and epoch % config.eval_every == 0)
            )
            if should_eval:
                entities, relations = encode_arrays(state, index)
                mrr = evaluate(
                    kg, "valid", entities, relations, config.assumption, config.norm
                ).mrr
                logger.info("%d\t%.6f\t%.6f", epoch, mean_loss, mrr)
                if best is None or mrr > best.best_valid_mrr:
                    best = _snapshot(config, kg, state, mrr, epoch, step, adam_m, adam_v)
            else:
                logger.info("%d\t%.6f", epoch, mean_loss)
    except NumericError as err:
        fallback = best if best is not None else _snapshot(
            config, kg, state, float("nan"), max(epoch - 1, 0), step, adam_m, adam_v
        )
        logger.error("aborting at epoch %d: %s", epoch, err)
        raise TrainingAborted(
            f"training diverged at epoch {epoch}: {err}", fallback
        ) from err
    if best is None:
        best = _snapshot(config, kg, state, float("nan"), config.epochs, step, adam_m, adam_v)
    return best


def param_count_report(
    config: TrainConfig,
    num_entities: int,
    num_relations: int,
    rgcn_basis_B: int = 2,
) -> dict:
    """Own parameter count plus savings versus R-GCN at basis count B.

    Positive savings mean this model is smaller.  Block-diagonal entries use
    the same B as the block count.
    """
    if rgcn_basis_B < 1:
        raise ValueError(f"basis count must be >= 1, got {rgcn_basis_B}")
    e, r = num_entities, num_relations
    d, layer_count, b = config.dim, config.layers, rgcn_basis_B
    own_entities = e * d
    own_relations = r * config.relation_dim
    own_layers = layer_count * 2 * d * d
    block_sq = (d / b) ** 2

    def as_count(x: float):
        return int(x) if float(x).is_integer() else float(x)

    return {
        "entities": own_entities,
        "relations": own_relations,
        "layers": own_layers,
        "own": own_entities + own_relations + own_layers,
        "vs_rgcn_basis_translation": (b - 1) * layer_count * d * d + 2 * b * r * layer_count,
        "vs_rgcn_block_translation": as_count(
            2 * b * r * layer_count * block_sq - layer_count * d * d
        ),
        "vs_rgcn_basis_rotation": (b - 5) * layer_count * d * d
        + 2 * b * r * layer_count
        - e * d,
        "vs_rgcn_block_rotation": as_count(
            2 * b * r * layer_count * block_sq - 5 * layer_count * d * d - e * d
        ),
    }
