"""Linear general value function learners.

A GVF is specified by a cumulant (the signal it accumulates), a discount
rule, and a target policy, and is learned off-policy with one-step TD and
per-step importance correction. Echo GVFs accumulate an observation bit and
terminate their discount when the bit fires, so their converged value is
gamma^(steps-to-event); `log_transform` maps that back to an (approximate)
integer step count.
"""

import math
from dataclasses import dataclass

import numpy as np

from .monsoon import MonsoonWorld, N_PHASES

# Predictions are floored at this value so the log transform stays defined
# under zero-initialised weights.
V_FLOOR = 1e-6

# Upper clip of the log transform. Chosen so transformed values always fit
# one base-10 digit of the state-aggregation index.
T_MAX = 9.0


@dataclass
class CumulantSpec:
    """What a GVF accumulates: a fixed observation bit, or a parameterized
    signal supplied by the meta-learner."""

    kind: str  # "echo-bit" | "parameterized"
    event_bit: int = 0

    def __post_init__(self):
        if self.kind not in ("echo-bit", "parameterized"):
            raise ValueError(f"unknown cumulant kind {self.kind!r}")
        if self.kind == "echo-bit" and self.event_bit not in (0, 1):
            raise ValueError(f"event_bit must be 0 or 1, got {self.event_bit!r}")


@dataclass
class DiscountSpec:
    """Continuation value and whether the event terminates accumulation."""

    kind: str  # "fixed" | "event-terminated"
    gamma: float = 0.9

    def __post_init__(self):
        if self.kind not in ("fixed", "event-terminated"):
            raise ValueError(f"unknown discount kind {self.kind!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0,1), got {self.gamma!r}")


@dataclass
class TargetPolicy:
    """Fixed action distribution a GVF's prediction is conditioned on."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if np.any(self.probs < 0.0) or abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValueError(f"not a distribution: {self.probs}")


@dataclass
class GvfSpec:
    cumulant: CumulantSpec
    discount: DiscountSpec
    policy: TargetPolicy


def expert_echo_gvfs():
    """The two hand-specified predictions: time-to-growth and
    time-to-no-growth, both conditioned on always watering."""
    always_water = TargetPolicy(np.array([0.0, 1.0]))
    terminated = DiscountSpec("event-terminated", 0.9)
    return (
        GvfSpec(CumulantSpec("echo-bit", event_bit=0), terminated, always_water),
        GvfSpec(CumulantSpec("echo-bit", event_bit=1), terminated, always_water),
    )


def echo_cumulant(obs, spec):
    """Event bit of the observation (1 when the tracked outcome occurred)."""
    if spec.kind != "echo-bit":
        raise ValueError(f"echo_cumulant needs an echo-bit spec, got {spec.kind!r}")
    return float(obs[spec.event_bit])


def echo_discount(c, gamma):
    """Terminate accumulation when the event fires, otherwise continue."""
    return 0.0 if c == 1 else gamma


def predict(w, x):
    """Linear prediction w.x, floored at V_FLOOR."""
    w = np.asarray(w)
    x = np.asarray(x)
    if w.shape != x.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {x.shape}")
    return max(float(np.dot(w, x)), V_FLOOR)


def importance_ratio(target, behavior_probs, a):
    """Per-step off-policy correction pi(a)/b(a)."""
    b = float(behavior_probs[a])
    if b <= 0.0:
        raise ValueError(f"unsupported action under behavior: a={a}, b(a)={b}")
    return float(target.probs[a]) / b


def td_update(w, x_t, x_next, c, gamma_next, rho, alpha):
    """One importance-corrected TD(0) step, in place.

    delta = c + gamma_next * w.x_next - w.x_t; w += alpha * rho * delta * x_t.
    Returns (w, delta).
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if rho < 0.0:
        raise ValueError(f"rho must be non-negative, got {rho!r}")
    delta = c + gamma_next * float(np.dot(w, x_next)) - float(np.dot(w, x_t))
    if not math.isfinite(delta):
        raise ValueError(f"non-finite TD error: {delta!r}")
    if rho != 0.0:
        w += (alpha * rho * delta) * x_t
    return w, delta


def log_transform(v, gamma=0.9, t_max=T_MAX):
    """Map an echo-GVF value gamma^k back to the step count k, clipped to
    [0, t_max] so it fits a single aggregation digit."""
    if v <= 0.0:
        raise ValueError(f"log_transform needs v > 0, got {v!r}")
    return min(max(math.log(v) / math.log(gamma), 0.0), t_max) + 0.0


def dp_oracle(env, target, spec, gamma=0.9, tol=1e-12, max_sweeps=10_000):
    """Brute-force value of an echo GVF at each hidden phase.

    Iterates v(p) = c(p, a~target) + gamma(c) * v(p+1 mod 4) on the known
    four-phase cycle until convergence. Used as an independent check on the
    TD learners; the 4-state chain settles in a handful of sweeps, the
    bounds are safety rails.
    """
    if spec.kind != "echo-bit":
        raise ValueError("oracle is defined for echo-bit cumulants")
    a_star = int(np.argmax(target.probs))
    if target.probs[a_star] < 1.0 - 1e-12:
        raise ValueError("oracle needs a deterministic target policy")

    # Outcome of the target action in each phase, read off the environment.
    cumulants = np.empty(N_PHASES)
    for p in range(N_PHASES):
        world = env() if isinstance(env, type) else MonsoonWorld()
        world.phase = p
        out = world.step(a_star)
        cumulants[p] = echo_cumulant(out.observation, spec)

    v = np.zeros(N_PHASES)
    for _ in range(max_sweeps):
        v_new = np.empty(N_PHASES)
        for p in range(N_PHASES):
            c = cumulants[p]
            v_new[p] = c + echo_discount(c, gamma) * v[(p + 1) % N_PHASES]
        if np.max(np.abs(v_new - v)) < tol:
            return v_new
        v = v_new
    return v
