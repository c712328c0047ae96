"""Meta-gradient learning of what each GVF predicts.

Each prediction carries two small weight vectors: policy logits w_pi
(softmax over actions, not conditioned on the observation) and cumulant
weights w_c (sigmoid of w_c.obs, which keeps the cumulant in (0,1)). Both
are trained online by descending the squared control TD error through a
one-step unroll of the GVF update: the cumulant and importance ratio move
the GVF weights, the moved weights move the next prediction, and the moved
prediction moves delta_control.

The unroll evaluates the post-update prediction at the same features the
update used, and treats the argmax action and the control weights as
constants (a semi-gradient); `finite_difference_grads` checks the analytic
gradient against central differences of `unrolled_loss`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .gvf import TargetPolicy


def sigmoid(z):
    # Stable for large |z|.
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def softmax(logits):
    z = np.asarray(logits, dtype=float)
    z = np.exp(z - z.max())
    return z / z.sum()


def cumulant(w_c, o):
    """Sigmoid cumulant sigmoid(w_c . o) of the current observation."""
    return sigmoid(float(np.dot(w_c, o)))


def policy(w_pi):
    """Softmax target policy from the policy logits."""
    return TargetPolicy(softmax(w_pi))


@dataclass
class MetaWeights:
    """Learnable parameters of one GVF: policy logits and cumulant weights.
    Zero initialisation gives an equiprobable policy and a 0.5 cumulant."""

    w_pi: np.ndarray
    w_c: np.ndarray

    @classmethod
    def zeros(cls, n_actions=2, obs_dim=2):
        return cls(np.zeros(n_actions), np.zeros(obs_dim))


@dataclass
class MetaStepContext:
    """Everything one meta-gradient step replays from the current transition.

    Weight arrays are the values in force when the context was built; the
    caller must not mutate them before the gradient is taken.
    """

    obs: np.ndarray       # o_t, the observation the cumulant reads
    action: int           # a_t
    behavior_prob: float  # b(a_t) under the recorded selection distribution
    x: np.ndarray         # GVF feature vector at time t
    reward: float         # r_{t+1}
    q_weights: np.ndarray           # (n_actions, n_control_features)
    gvf_weights: list               # per-GVF weight vectors
    alpha_gvf: float
    l2_lambda: float
    gamma_gvf: float = 0.9
    gamma_c: float = 0.9
    include_obs: bool = True        # control state is [v..., obs] or [v...]
    unroll_mode: str = "same"       # "same" | "true-next"
    # Second evaluation point of the TD error in "true-next" mode (the real
    # update's other feature vector); the collapsed unroll ignores it.
    x_next: np.ndarray | None = None

    def __post_init__(self):
        if self.behavior_prob <= 0.0:
            raise ValueError(f"behavior_prob must be positive, got {self.behavior_prob!r}")
        if self.unroll_mode not in ("same", "true-next"):
            raise ValueError(f"unknown unroll mode {self.unroll_mode!r}")
        if self.unroll_mode == "true-next" and self.x_next is None:
            raise ValueError("true-next unroll needs x_next")


def _control_state(v, obs, include_obs):
    v = np.asarray(v, dtype=float)
    return np.concatenate([v, obs]) if include_obs else v


def _unroll(ctx, w_pi, w_c):
    """Forward pass shared by the loss and the gradient. Returns the
    intermediates the gradient reuses."""
    n = len(ctx.gvf_weights)
    x2 = float(np.dot(ctx.x, ctx.x))
    collapsed = ctx.unroll_mode == "same"

    c = np.empty(n)
    pi = np.empty((n, len(w_pi[0])))
    rho = np.empty(n)
    delta_g = np.empty(n)
    v = np.empty(n)
    v_plus = np.empty(n)
    for i in range(n):
        c[i] = cumulant(w_c[i], ctx.obs)
        pi[i] = softmax(w_pi[i])
        rho[i] = pi[i][ctx.action] / ctx.behavior_prob
        v[i] = float(np.dot(ctx.gvf_weights[i], ctx.x))
        v_sub = v[i] if collapsed else float(np.dot(ctx.gvf_weights[i], ctx.x_next))
        delta_g[i] = c[i] + ctx.gamma_gvf * v[i] - v_sub
        # The unrolled update keeps its direction at x, so the gradient
        # does not vanish across distinct consecutive one-hot features.
        v_plus[i] = v[i] + ctx.alpha_gvf * rho[i] * delta_g[i] * x2

    s_now = _control_state(v, ctx.obs, ctx.include_obs)
    s_plus = _control_state(v_plus, ctx.obs, ctx.include_obs)
    q_plus = ctx.q_weights @ s_plus
    a_star = int(np.argmax(q_plus))
    delta_c = ctx.reward + ctx.gamma_c * float(q_plus[a_star]) \
        - float(np.dot(ctx.q_weights[ctx.action], s_now))
    return c, pi, rho, delta_g, x2, a_star, delta_c


def unrolled_loss(ctx, w_pi, w_c):
    """Squared control TD error after one unrolled GVF update, plus L2 on
    the meta-weights, as a pure function of (w_pi, w_c)."""
    *_, delta_c = _unroll(ctx, w_pi, w_c)
    if not math.isfinite(delta_c):
        raise ValueError(f"non-finite unrolled TD error: {delta_c!r}")
    l2 = float(np.sum(np.square(w_pi))) + float(np.sum(np.square(w_c)))
    return delta_c * delta_c + ctx.l2_lambda * l2


def meta_grad(ctx, w_pi, w_c):
    """Analytic gradient of `unrolled_loss` w.r.t. both meta-weight sets.

    The chain is d(delta_c^2)/dv+ . dv+/d{c, rho} . d{c, rho}/d{w_c, w_pi};
    only the unrolled next value v+ depends on the meta-weights (the
    pre-update prediction does not), and a* is held fixed.
    """
    c, pi, rho, delta_g, x2, a_star, delta_c = _unroll(ctx, w_pi, w_c)
    n = len(ctx.gvf_weights)
    grad_pi = np.empty_like(np.asarray(w_pi, dtype=float))
    grad_c = np.empty_like(np.asarray(w_c, dtype=float))
    for i in range(n):
        # d(loss)/d(v+_i); prediction i sits at position i of the control state.
        g_v = 2.0 * delta_c * ctx.gamma_c * ctx.q_weights[a_star, i]
        grad_c[i] = (g_v * ctx.alpha_gvf * rho[i] * x2 * c[i] * (1.0 - c[i])) * ctx.obs \
            + (2.0 * ctx.l2_lambda) * w_c[i]
        # d(rho_i)/d(w_pi_i) through the softmax Jacobian row of pi(a_t).
        d_rho = pi[i][ctx.action] * (-pi[i]) / ctx.behavior_prob
        d_rho[ctx.action] += pi[i][ctx.action] / ctx.behavior_prob
        grad_pi[i] = (g_v * ctx.alpha_gvf * delta_g[i] * x2) * d_rho \
            + (2.0 * ctx.l2_lambda) * w_pi[i]
    return grad_pi, grad_c


def meta_update(w_pi, w_c, grads, alpha_pi, alpha_c):
    """Plain gradient descent step on both meta-weight sets, in place."""
    if alpha_pi < 0.0 or alpha_c < 0.0:
        raise ValueError("meta step sizes must be non-negative")
    grad_pi, grad_c = grads
    w_pi -= alpha_pi * np.asarray(grad_pi)
    w_c -= alpha_c * np.asarray(grad_c)
    return w_pi, w_c


def finite_difference_grads(ctx, w_pi, w_c, h=1e-5):
    """Central-difference gradient of `unrolled_loss`, the independent
    check on `meta_grad`."""
    grads = []
    for arr in (w_pi, w_c):
        out = np.zeros_like(arr)
        flat, oflat = arr.ravel(), out.ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            hi = unrolled_loss(ctx, w_pi, w_c)
            flat[j] = orig - h
            lo = unrolled_loss(ctx, w_pi, w_c)
            flat[j] = orig
            oflat[j] = (hi - lo) / (2.0 * h)
        grads.append(out)
    return tuple(grads)


def _random_context(rng, n_gvfs=2, n_features=400, include_obs=True, unroll_mode="same"):
    obs = np.zeros(2)
    obs[rng.integers(2)] = 1.0
    x = np.zeros(n_features)
    x[rng.integers(n_features)] = 1.0
    x_next = None
    if unroll_mode == "true-next":
        x_next = np.zeros(n_features)
        x_next[rng.integers(n_features)] = 1.0
    n_cs = n_gvfs + (2 if include_obs else 0)
    return MetaStepContext(
        obs=obs,
        action=int(rng.integers(2)),
        behavior_prob=float(rng.uniform(0.1, 1.0)),
        x=x,
        reward=float(rng.uniform(-1.0, 1.0)),
        q_weights=rng.uniform(-1.0, 1.0, size=(2, n_cs)),
        gvf_weights=[rng.uniform(-1.0, 1.0, size=n_features) for _ in range(n_gvfs)],
        alpha_gvf=0.1,
        l2_lambda=0.001,
        include_obs=include_obs,
        unroll_mode=unroll_mode,
        x_next=x_next,
    )


def gradient_check(n_contexts=100, seed=0, h=1e-5, unroll_mode="same"):
    """Max relative error between `meta_grad` and central differences over
    randomized contexts. Contexts whose unrolled argmax is nearly tied are
    redrawn: the loss is non-differentiable there.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < n_contexts:
        ctx = _random_context(rng, unroll_mode=unroll_mode)
        w_pi = rng.uniform(-1.0, 1.0, size=(2, 2))
        w_c = rng.uniform(-1.0, 1.0, size=(2, 2))
        if _argmax_gap(ctx, w_pi, w_c) < 1e-2:
            continue
        analytic = meta_grad(ctx, w_pi, w_c)
        numeric = finite_difference_grads(ctx, w_pi, w_c, h=h)
        for a, f in zip(analytic, numeric):
            err = np.abs(a - f) / np.maximum(1e-6, np.maximum(np.abs(a), np.abs(f)))
            worst = max(worst, float(err.max()))
        done += 1
    return worst


def _argmax_gap(ctx, w_pi, w_c):
    """Margin between the two best unrolled action values."""
    _, _, rho, delta_g, x2, _, _ = _unroll(ctx, w_pi, w_c)
    v = np.array([float(np.dot(w, ctx.x)) for w in ctx.gvf_weights])
    v_plus = v + ctx.alpha_gvf * rho * delta_g * x2
    q_plus = np.sort(ctx.q_weights @ _control_state(v_plus, ctx.obs, ctx.include_obs))
    return float(q_plus[-1] - q_plus[-2])
