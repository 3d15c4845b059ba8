"""The ensemble methods on their own, over a hand-made score matrix.

Builds a matrix with one strong column, one weak column, and one
anti-correlated column, then compares mean, median, a logistic stacker,
and greedy forward selection.  The greedy trace shows the bagged metric
climbing monotonically as columns are added.
"""

import numpy as np

from fusemble import (
    LearnerSpec,
    aggregate_mean,
    aggregate_median,
    apply_ensemble,
    roc_auc,
    train_greedy,
    train_stacker,
)

rng = np.random.default_rng(5)
n = 200
y = rng.integers(0, 2, n)
y[0], y[1] = 0, 1

signal = y + rng.normal(0, 0.4, n)          # strong, noisy copy of the label
weak = y + rng.normal(0, 1.5, n)            # weak copy
anti = (1 - y) + rng.normal(0, 0.4, n)      # anti-correlated

def squash(v):
    return (v - v.min()) / (v.max() - v.min())

T = np.column_stack([squash(signal), squash(weak), squash(anti)])
names = ["signal", "weak", "anti"]
for name, column in zip(names, T.T):
    print(f"column {name:7s} AUC = {roc_auc(column, y):.3f}")

# ---------------------------------------------------------------------------
# simple aggregation: the anti-correlated column drags the mean down
# ---------------------------------------------------------------------------
print(f"\nmean   AUC = {roc_auc(aggregate_mean(T), y):.3f}")
print(f"median AUC = {roc_auc(aggregate_median(T), y):.3f}")

# ---------------------------------------------------------------------------
# a stacker learns to invert the anti-correlated column
# ---------------------------------------------------------------------------
stack = train_stacker(T, y, LearnerSpec("logistic"), seed=0)
print(f"stacker AUC = {roc_auc(apply_ensemble(stack, T), y):.3f}")

# ---------------------------------------------------------------------------
# greedy selection skips harmful columns entirely
# ---------------------------------------------------------------------------
greedy = train_greedy(T, y, metric="auc", bags=10, seed=0)
print(f"greedy  AUC = {roc_auc(apply_ensemble(greedy, T), y):.3f}")
print(f"greedy picked columns: {[names[i] for i in greedy.selected]}")
print("greedy bagged-metric trace:", [round(v, 4) for v in greedy.trace])
