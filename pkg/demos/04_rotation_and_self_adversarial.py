"""Rotation assumption with self-adversarial negative weighting.

Two things to see here. First, relation embeddings live on the unit circle
by construction (stored as phases), and the convolution keeps them there by
renormalizing after each linear update. Second, self-adversarial weighting
concentrates the loss on the hardest negatives; the weights are softmax
scores over the negatives of each positive, treated as constants by the
gradient.
"""

import numpy as np

from transgcn import TrainConfig, train
from transgcn.encoder import materialize_relations
from transgcn.kinship import generate_kinship
from transgcn.objective import batch_self_adv_weights

kg = generate_kinship(seed=0, founder_couples=3, valid_size=30, test_size=30)
config = TrainConfig(
    assumption="rotation", layers=1, dim=16, epochs=60, lr=0.01,
    gamma=6.0, sampling="self-adversarial", pretrain_epochs=30,
    batch=64, eval_every=20, seed=0,
)
checkpoint = train(kg, config)
print(f"trained {config.epochs} epochs "
      f"(first {config.pretrain_epochs} without the conv layer), "
      f"best valid MRR {checkpoint.best_valid_mrr:.4f}")

rows = materialize_relations(checkpoint.state).values
half = rows.shape[1] // 2
moduli = np.hypot(rows[:, :half], rows[:, half:])
print(f"relation coordinate moduli: min {moduli.min():.12f} "
      f"max {moduli.max():.12f} (unit circle, by parameterization)")

print("\nself-adversarial weights for one positive with 6 negatives:")
neg_scores = np.array([[-9.0], [-4.0], [-3.5], [-8.0], [-3.4], [-12.0]])
for alpha in (0.0, 0.5, 1.0, 2.0):
    w = batch_self_adv_weights(neg_scores, alpha, 6).reshape(-1)
    cells = "  ".join(f"{x:.3f}" for x in w)
    print(f"  alpha {alpha:3.1f}: {cells}")
print("  higher alpha piles weight on the best-scoring (hardest) negatives")
