"""Linear Q-learning control and the one-hot feature constructors.

State aggregation maps a pair of prediction values onto a single cell of a
binary feature vector (i = floor(v0) + 10*floor(v1)), which assumes each
value stays below 10. The GVF learners use the richer cross product of
(observation outcome, action, prediction cell).
"""

from dataclasses import dataclass

import numpy as np

from .monsoon import N_ACTIONS

AGG_BASE = 10  # one base-10 digit per prediction in the aggregation index
GVF_FEATURES = 2 * 2 * AGG_BASE * AGG_BASE  # outcome x action x cell = 400


@dataclass
class QWeights:
    """Per-action weight rows over control features, plus the shared
    control discount."""

    w: np.ndarray
    gamma: float = 0.9

    @classmethod
    def zeros(cls, n_features, gamma=0.9):
        return cls(np.zeros((N_ACTIONS, n_features)), gamma)


def prediction_cell(v_pair):
    """Aggregation cell index of a pair of prediction values in [0, 10)."""
    v0, v1 = float(v_pair[0]), float(v_pair[1])
    if not (0.0 <= v0 < AGG_BASE and 0.0 <= v1 < AGG_BASE):
        raise ValueError(f"prediction values out of [0,10): {v_pair}")
    return int(v0) + AGG_BASE * int(v1)


def aggregate_predictions(v_pair, memsize=100):
    """One-hot control state over prediction cells."""
    if memsize < 100:
        raise ValueError(f"memsize must be at least 100, got {memsize}")
    i = prediction_cell(v_pair)
    s = np.zeros(memsize)
    s[i] = 1.0
    return s


def gvf_feature_index(growth_bit, action, cell):
    return int(growth_bit) + 2 * int(action) + 4 * int(cell)


def gvf_feature(obs, action, v_pair):
    """One-hot GVF state over (outcome, action, prediction cell); length 400."""
    i = gvf_feature_index(obs[0], action, prediction_cell(v_pair))
    x = np.zeros(GVF_FEATURES)
    x[i] = 1.0
    return x


def obs_feature(obs, memsize=2):
    """One-hot control state over the two observation outcomes."""
    s = np.zeros(memsize)
    s[0 if obs[0] else 1] = 1.0
    return s


def q_values(qw, s):
    """Per-action action values for a control state."""
    if qw.w.shape[1] != len(s):
        raise ValueError(f"state length {len(s)} != feature count {qw.w.shape[1]}")
    return qw.w @ np.asarray(s, dtype=float)


def select_action(q, epsilon, rng):
    """Epsilon-greedy with uniform random tie-breaking.

    Returns the chosen action and the exact distribution it was drawn from,
    b(a) = eps/|A| + (1-eps) * [a in argmax]/|argmax|, which off-policy
    updates need for importance ratios.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0,1], got {epsilon!r}")
    q = np.asarray(q, dtype=float)
    n = len(q)
    best = np.flatnonzero(q == q.max())
    b = np.full(n, epsilon / n)
    b[best] += (1.0 - epsilon) / len(best)
    if rng.random() < epsilon:
        a = int(rng.integers(n))
    elif len(best) == 1:
        a = int(best[0])
    else:
        a = int(best[rng.integers(len(best))])
    return a, b


def q_learning_update(qw, s, a, r, s_next, alpha):
    """One Q-learning step, in place; returns (qw, delta_control)."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    s = np.asarray(s, dtype=float)
    delta = r + qw.gamma * float(np.max(q_values(qw, s_next))) - float(np.dot(qw.w[a], s))
    if not np.isfinite(delta):
        raise ValueError(f"non-finite control TD error: {delta!r}")
    qw.w[a] += (alpha * delta) * s
    return qw, delta
