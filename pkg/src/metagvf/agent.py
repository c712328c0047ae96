"""Per-step agent cycle wiring environment, GVFs, meta-learner, and control.

Three configurations share the same cycle: the observations-only baseline,
the expert agent with two hand-specified echo GVFs, and the meta agent whose
two GVFs are parameterized and trained by meta-gradient descent.

Each step runs, in order: select the action epsilon-greedily from the
current control state; step the environment; (meta only) take one
meta-gradient step from the transition just observed; update every GVF with
importance-corrected TD; re-evaluate the predictions at the current GVF
features with the updated weights; build the next control state; update the
control Q weights. The GVF update processes the transition that ended at the
current features, and its importance ratio corrects the action inside the
bootstrap state, so the recorded selection distribution of the current
action feeds both the TD update and the meta step.

The task is continuing: there are no episode boundaries or mid-trial resets.
Feature vectors are one-hot throughout, so the hot path works with indices;
the vector-form operations in `gvf`, `control`, and `meta` define the same
arithmetic on explicit arrays.
"""

import math
from dataclasses import dataclass

import numpy as np

from .control import AGG_BASE, GVF_FEATURES, QWeights
from .gvf import V_FLOOR, expert_echo_gvfs
from .meta import MetaStepContext, MetaWeights, sigmoid
from .monsoon import GROWTH_OBS, NO_GROWTH_OBS, WATER, MonsoonWorld

KINDS = ("obs-only", "expert", "meta")

# Cached one-hot rows for the 400-cell GVF feature space and the two
# observations; shared read-only across agents.
_X_ONEHOT = np.eye(GVF_FEATURES)
_X_ONEHOT.setflags(write=False)
_OBS_VECS = (GROWTH_OBS, NO_GROWTH_OBS)


class NonFiniteWeightError(RuntimeError):
    """A learner produced a non-finite value; the trial must abort."""

    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class AgentConfig:
    kind: str
    epsilon: float
    alpha_control: float
    alpha_gvf: float = 0.1
    alpha_pi: float = 0.0
    alpha_c: float = 0.0
    n_gvfs: int = 2
    l2_lambda: float = 0.001
    gamma_c: float = 0.9
    gamma_gvf: float = 0.9
    t_max: float = 9.0
    memsize: int = 100
    include_obs: bool = True
    unroll_next_features: str = "same"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.n_gvfs != 2 and self.kind != "obs-only":
            raise ValueError("both prediction-based agents carry exactly two GVFs")
        if not 0.0 < self.t_max <= 9.0:
            raise ValueError(f"t_max must be in (0, 9], got {self.t_max!r}")
        if self.unroll_next_features not in ("same", "true-next"):
            raise ValueError(
                f"unroll_next_features must be 'same' or 'true-next', got {self.unroll_next_features!r}")


@dataclass
class StepDiag:
    """Sampled per-step record; collection is requested explicitly to keep
    million-step trials cheap."""

    step: int
    phase: int  # hidden phase the action was taken in
    action: int
    reward: float
    delta_control: float
    delta_gvf: tuple = ()
    cumulants: tuple = ()
    policies: tuple = ()
    v: tuple = ()
    events: tuple = ()


class Agent:
    """Shared state and the epsilon-greedy selector; subclasses implement
    one step of their configuration's cycle."""

    kind = None

    def __init__(self, config, seed):
        if config.kind != self.kind:
            raise ValueError(f"config kind {config.kind!r} does not match {self.kind!r}")
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.env = MonsoonWorld()
        self.epsilon = config.epsilon
        self.alpha_control = config.alpha_control
        self.alpha_gvf = config.alpha_gvf
        self.alpha_pi = config.alpha_pi
        self.alpha_c = config.alpha_c
        self.gamma_c = config.gamma_c
        self.gamma_gvf = config.gamma_gvf
        self.steps_done = 0
        self.last_action = None
        _, obs = self.env.reset(seed)
        self.o_idx = 1 if obs[1] else 0
        self._pending = None

    def _select(self, q0, q1):
        """Scalar epsilon-greedy over two actions with random tie-breaking.
        Returns (action, selection probability of that action)."""
        eps = self.epsilon
        if q0 == q1:
            n_best, best = 2, 0
        elif q0 > q1:
            n_best, best = 1, 0
        else:
            n_best, best = 1, 1
        if self.rng.random() < eps:
            a = int(self.rng.integers(2))
        elif n_best == 1:
            a = best
        else:
            a = int(self.rng.integers(2))
        b_a = eps / 2.0
        if n_best == 2 or a == best:
            b_a += (1.0 - eps) / n_best
        return a, b_a

    def _prime(self):
        # Algorithm start: the initial action comes off the all-zero Q values.
        q0, q1 = self._q_pair()
        self._pending = self._select(q0, q1)

    def freeze(self):
        """Greedy, non-learning mode for evaluation."""
        self.epsilon = 0.0
        self.alpha_control = 0.0
        self.alpha_gvf = 0.0
        self.alpha_pi = 0.0
        self.alpha_c = 0.0
        return self

    def check_finite(self):
        for arr in self._weight_arrays():
            if not np.all(np.isfinite(arr)):
                raise NonFiniteWeightError(self.steps_done, "non-finite weight detected")

    def run(self, n_steps):
        """Advance n steps, returning the summed reward."""
        total = 0.0
        for _ in range(n_steps):
            total += self.step()
        return total


class ObsOnlyAgent(Agent):
    """Baseline: the control state is the one-hot of the last outcome."""

    kind = "obs-only"

    def __init__(self, config, seed):
        super().__init__(config, seed)
        self.q = QWeights.zeros(2, gamma=config.gamma_c)
        self.v = ()
        self._prime()

    def _weight_arrays(self):
        return (self.q.w,)

    def _q_pair(self):
        w, s = self.q.w, self.o_idx
        return float(w[0, s]), float(w[1, s])

    def step(self, collect_diag=False):
        w = self.q.w
        s = self.o_idx
        phase = self.env.phase
        if self._pending is not None:
            a, _ = self._pending
            self._pending = None
        else:
            a, _ = self._select(float(w[0, s]), float(w[1, s]))
        r, o2 = self.env.step_indexed(a)
        q_next = w[0, o2] if w[0, o2] > w[1, o2] else w[1, o2]
        delta_c = r + self.gamma_c * q_next - w[a, s]
        if not math.isfinite(delta_c):
            raise NonFiniteWeightError(self.steps_done, f"control TD error {delta_c!r}")
        if self.alpha_control > 0.0:
            w[a, s] += self.alpha_control * delta_c
        self.o_idx = o2
        self.last_action = a
        self.steps_done += 1
        if collect_diag:
            self.last_diag = StepDiag(
                step=self.steps_done, phase=phase, action=a, reward=float(r),
                delta_control=float(delta_c), events=("select", "env", "control"))
        return float(r)


class PredictiveAgent(Agent):
    """Shared machinery of the expert and meta configurations: two linear
    GVFs over the (outcome, action, prediction cell) feature space."""

    def __init__(self, config, seed):
        super().__init__(config, seed)
        self.gvf_w = [np.zeros(GVF_FEATURES) for _ in range(config.n_gvfs)]
        self.v = (V_FLOOR, V_FLOOR)
        self.cells = self._cells_of(self.v)
        self.x_prev = None
        self.x_cur = None

    def _feature_index(self, growth, action):
        return growth + 2 * action + 4 * (self.cells[0] + AGG_BASE * self.cells[1])

    @property
    def x(self):
        """Current GVF feature vector (one-hot), for inspection."""
        return None if self.x_cur is None else _X_ONEHOT[self.x_cur]


class ExpertAgent(PredictiveAgent):
    """Two echo GVFs with hand-chosen cumulants, event-terminated discounts,
    and an always-water target policy; control runs on the aggregation of
    the log-transformed predictions plus the observation cells."""

    kind = "expert"

    def __init__(self, config, seed):
        self._log_gamma = math.log(config.gamma_gvf)
        super().__init__(config, seed)
        self.gvf_specs = expert_echo_gvfs()
        self._obs_base = config.memsize if config.include_obs else None
        n_features = config.memsize + (2 if config.include_obs else 0)
        self.q = QWeights.zeros(n_features, gamma=config.gamma_c)
        self.agg_cell = self.cells[0] + AGG_BASE * self.cells[1]
        self._prime()

    def _cells_of(self, v):
        # Echo values live in log-space; the transform maps gamma^k back to
        # k before aggregation. The converged values gamma^k sit exactly on
        # the floor-quantizer boundaries, so the code is centered (round to
        # the nearest transform integer) to give each cell a half-step
        # tolerance band on both sides.
        t_max = self.config.t_max
        c0 = min(max(math.log(v[0]) / self._log_gamma, 0.0), t_max)
        c1 = min(max(math.log(v[1]) / self._log_gamma, 0.0), t_max)
        return min(int(c0 + 0.5), AGG_BASE - 1), min(int(c1 + 0.5), AGG_BASE - 1)

    def _weight_arrays(self):
        return (self.q.w, *self.gvf_w)

    def _q_pair(self):
        w, ci = self.q.w, self.agg_cell
        q0, q1 = float(w[0, ci]), float(w[1, ci])
        if self._obs_base is not None:
            mo = self._obs_base + self.o_idx
            q0 += w[0, mo]
            q1 += w[1, mo]
        return q0, q1

    def step(self, collect_diag=False):
        w = self.q.w
        ci = self.agg_cell
        mo = None if self._obs_base is None else self._obs_base + self.o_idx
        phase = self.env.phase
        q_sel = self._q_pair()
        if self._pending is not None:
            a, b_a = self._pending
            self._pending = None
        else:
            a, b_a = self._select(*q_sel)

        r, o2 = self.env.step_indexed(a)
        # The GVF state pairs the action with its outcome: the completed
        # step (result, action, prediction cells).
        growth = 1 - o2
        x_cur = self._feature_index(growth, a)

        # Off-policy TD for the transition that ended at x_cur, driven by
        # the action just taken; one ratio serves both always-water GVFs,
        # and the cumulant is the event bit of the outcome. The ratio is
        # capped at 1 (tree-backup bound): for this deterministic target
        # the raw pi(a)/b(a) reaches 1/b and alpha*rho would exceed 1
        # whenever water is the exploratory action, which keeps the values
        # from ever settling; the cap leaves the fixed point unchanged.
        rho = min((1.0 if a == WATER else 0.0) / b_a, 1.0)
        deltas = (0.0, 0.0)
        events = ["select", "env"]
        if self.x_prev is not None:
            x_prev = self.x_prev
            step_size = self.alpha_gvf * rho
            d = []
            for i, g in enumerate(self.gvf_w):
                c = growth if i == 0 else 1 - growth
                gamma_next = 0.0 if c == 1 else self.gamma_gvf
                delta = c + gamma_next * g[x_cur] - g[x_prev]
                if step_size != 0.0:
                    g[x_prev] += step_size * delta
                d.append(float(delta))
            deltas = tuple(d)
            events.append("gvf")

        v0 = self.gvf_w[0][x_cur]
        v1 = self.gvf_w[1][x_cur]
        v0 = v0 if v0 > V_FLOOR else V_FLOOR
        v1 = v1 if v1 > V_FLOOR else V_FLOOR
        cells2 = self._cells_of((v0, v1))
        agg2 = cells2[0] + AGG_BASE * cells2[1]

        # Control update on (aggregated predictions, observation cells).
        q0n, q1n = float(w[0, agg2]), float(w[1, agg2])
        if self._obs_base is not None:
            mo2 = self._obs_base + o2
            q0n += w[0, mo2]
            q1n += w[1, mo2]
        q_next = q0n if q0n > q1n else q1n
        delta_c = r + self.gamma_c * q_next - q_sel[a]
        if not math.isfinite(delta_c):
            raise NonFiniteWeightError(self.steps_done, f"control TD error {delta_c!r}")
        if self.alpha_control > 0.0:
            w[a, ci] += self.alpha_control * delta_c
            if mo is not None:
                w[a, mo] += self.alpha_control * delta_c

        self.x_prev = x_cur
        self.x_cur = x_cur
        self.o_idx = o2
        self.v = (float(v0), float(v1))
        self.cells = cells2
        self.agg_cell = agg2
        self.last_action = a
        self.steps_done += 1
        if collect_diag:
            events.append("control")
            self.last_diag = StepDiag(
                step=self.steps_done, phase=phase, action=a, reward=float(r),
                delta_control=float(delta_c), delta_gvf=deltas,
                cumulants=(float(growth), float(1 - growth)),
                policies=((0.0, 1.0), (0.0, 1.0)), v=self.v,
                events=tuple(events))
        return float(r)


class MetaAgent(PredictiveAgent):
    """Two GVFs whose cumulant and policy are learned online by descending
    the squared control TD error; control runs linearly on the raw
    prediction values plus the observation cells."""

    kind = "meta"

    def __init__(self, config, seed):
        super().__init__(config, seed)
        self.meta = [MetaWeights.zeros() for _ in range(config.n_gvfs)]
        self._obs_base = config.n_gvfs if config.include_obs else None
        n_features = config.n_gvfs + (2 if config.include_obs else 0)
        self.q = QWeights.zeros(n_features, gamma=config.gamma_c)
        self._prime()

    def _cells_of(self, v):
        # Fixed-gamma values stay below c_max/(1-gamma) = 10; the clip is a
        # guard for transient overshoot only.
        return min(int(v[0]), AGG_BASE - 1), min(int(v[1]), AGG_BASE - 1)

    def _weight_arrays(self):
        arrays = [self.q.w, *self.gvf_w]
        for m in self.meta:
            arrays.extend((m.w_pi, m.w_c))
        return tuple(arrays)

    def _q_pair(self):
        w = self.q.w
        v0, v1 = self.v
        q0 = w[0, 0] * v0 + w[0, 1] * v1
        q1 = w[1, 0] * v0 + w[1, 1] * v1
        if self._obs_base is not None:
            mo = self._obs_base + self.o_idx
            q0 += w[0, mo]
            q1 += w[1, mo]
        return float(q0), float(q1)

    def build_context(self, a, b_a, o2, x_cur, reward):
        """The meta-gradient context for the transition just observed;
        `_meta_step` applies the same arithmetic without the array overhead."""
        x_next = None
        if self.config.unroll_next_features == "true-next":
            # The real update's other evaluation point.
            x_next = _X_ONEHOT[x_cur if self.x_prev is None else self.x_prev]
        return MetaStepContext(
            obs=_OBS_VECS[o2], action=a, behavior_prob=b_a,
            x=_X_ONEHOT[x_cur], reward=reward,
            q_weights=self.q.w, gvf_weights=self.gvf_w,
            alpha_gvf=self.alpha_gvf, l2_lambda=self.config.l2_lambda,
            gamma_gvf=self.gamma_gvf, gamma_c=self.gamma_c,
            include_obs=self._obs_base is not None,
            unroll_mode=self.config.unroll_next_features, x_next=x_next)

    def _meta_step(self, a, b_a, o2, x_cur, reward):
        """One meta-gradient descent step, written out in scalars.

        Mirrors meta_grad/meta_update on the loop's one-hot context (x.x = 1,
        one-hot observation); test_agent_loop checks the equivalence.
        """
        w = self.q.w
        alpha_gvf = self.alpha_gvf
        lam2 = 2.0 * self.config.l2_lambda
        gamma = self.gamma_gvf
        true_next = self.config.unroll_next_features == "true-next"
        x_sub = x_cur if (not true_next or self.x_prev is None) else self.x_prev

        c = [0.0, 0.0]
        pi = [(0.0, 0.0), (0.0, 0.0)]
        rho = [0.0, 0.0]
        delta_g = [0.0, 0.0]
        v = [0.0, 0.0]
        v_plus = [0.0, 0.0]
        for i, m in enumerate(self.meta):
            c[i] = sigmoid(float(m.w_c[o2]))
            z0, z1 = float(m.w_pi[0]), float(m.w_pi[1])
            zm = z0 if z0 > z1 else z1
            e0, e1 = math.exp(z0 - zm), math.exp(z1 - zm)
            p1 = e1 / (e0 + e1)
            pi[i] = (1.0 - p1, p1)
            rho[i] = pi[i][a] / b_a
            g = self.gvf_w[i]
            v[i] = float(g[x_cur])
            delta_g[i] = c[i] + gamma * v[i] - float(g[x_sub])
            v_plus[i] = v[i] + alpha_gvf * rho[i] * delta_g[i]

        if self._obs_base is None:
            obs_now = obs_plus = (0.0, 0.0)
        else:
            obs_now = (float(w[0, self._obs_base + o2]), float(w[1, self._obs_base + o2]))
            obs_plus = obs_now
        q_plus_0 = w[0, 0] * v_plus[0] + w[0, 1] * v_plus[1] + obs_plus[0]
        q_plus_1 = w[1, 0] * v_plus[0] + w[1, 1] * v_plus[1] + obs_plus[1]
        a_star = 0 if q_plus_0 >= q_plus_1 else 1
        q_now_a = w[a, 0] * v[0] + w[a, 1] * v[1] + obs_now[a]
        delta_c = reward + self.gamma_c * (q_plus_0 if a_star == 0 else q_plus_1) - q_now_a

        for i, m in enumerate(self.meta):
            g_v = 2.0 * delta_c * self.gamma_c * float(w[a_star, i])
            # Cumulant path: d(v+)/dc = alpha*rho, dc/dw_c = c(1-c) * obs.
            gc_active = g_v * alpha_gvf * rho[i] * c[i] * (1.0 - c[i])
            m.w_c[o2] -= self.alpha_c * (gc_active + lam2 * m.w_c[o2])
            m.w_c[1 - o2] -= self.alpha_c * (lam2 * m.w_c[1 - o2])
            # Policy path through the softmax Jacobian row of pi(a).
            coeff = g_v * alpha_gvf * delta_g[i] * pi[i][a] / b_a
            for j in (0, 1):
                d_rho = coeff * ((1.0 if j == a else 0.0) - pi[i][j])
                m.w_pi[j] -= self.alpha_pi * (d_rho + lam2 * m.w_pi[j])

    def step(self, collect_diag=False):
        w = self.q.w
        v0, v1 = self.v
        oi = self.o_idx
        phase = self.env.phase
        q_sel = self._q_pair()
        if self._pending is not None:
            a, b_a = self._pending
            self._pending = None
        else:
            a, b_a = self._select(*q_sel)

        r, o2 = self.env.step_indexed(a)
        # The GVF state pairs the action with its outcome, as for the
        # expert agent.
        x_cur = self._feature_index(1 - o2, a)

        events = ["select", "env"]
        if self.alpha_pi > 0.0 or self.alpha_c > 0.0:
            self._meta_step(a, b_a, o2, x_cur, float(r))
            events.append("meta")

        # Cumulant, policy, and importance ratio from the (just updated)
        # meta-weights; TD with the fixed continuation discount. The
        # cumulant reads the newest observation, like the echo bits.
        cums = []
        pis = []
        rhos = []
        for m in self.meta:
            c = sigmoid(float(m.w_c[o2]))
            z0, z1 = float(m.w_pi[0]), float(m.w_pi[1])
            zm = z0 if z0 > z1 else z1
            e0, e1 = math.exp(z0 - zm), math.exp(z1 - zm)
            p1 = e1 / (e0 + e1)
            pi = (1.0 - p1, p1)
            cums.append(c)
            pis.append(pi)
            rhos.append(pi[a] / b_a)

        deltas = (0.0, 0.0)
        if self.x_prev is not None:
            x_prev = self.x_prev
            d = []
            for i, g in enumerate(self.gvf_w):
                delta = cums[i] + self.gamma_gvf * g[x_cur] - g[x_prev]
                if self.alpha_gvf > 0.0:
                    g[x_prev] += self.alpha_gvf * rhos[i] * delta
                d.append(float(delta))
            deltas = tuple(d)
            events.append("gvf")

        v0n = self.gvf_w[0][x_cur]
        v1n = self.gvf_w[1][x_cur]
        v0n = v0n if v0n > V_FLOOR else V_FLOOR
        v1n = v1n if v1n > V_FLOOR else V_FLOOR

        # Control update on the raw prediction values.
        q0n = w[0, 0] * v0n + w[0, 1] * v1n
        q1n = w[1, 0] * v0n + w[1, 1] * v1n
        if self._obs_base is not None:
            mo2 = self._obs_base + o2
            q0n += w[0, mo2]
            q1n += w[1, mo2]
        q_next = q0n if q0n > q1n else q1n
        delta_c = r + self.gamma_c * q_next - q_sel[a]
        if not math.isfinite(delta_c):
            raise NonFiniteWeightError(self.steps_done, f"control TD error {delta_c!r}")
        if self.alpha_control > 0.0:
            ad = self.alpha_control * delta_c
            w[a, 0] += ad * v0
            w[a, 1] += ad * v1
            if self._obs_base is not None:
                w[a, self._obs_base + oi] += ad
        events.append("control")

        self.x_prev = x_cur
        self.x_cur = x_cur
        self.o_idx = o2
        self.v = (float(v0n), float(v1n))
        self.cells = self._cells_of(self.v)
        self.last_action = a
        self.steps_done += 1
        if collect_diag:
            self.last_diag = StepDiag(
                step=self.steps_done, phase=phase, action=a, reward=float(r),
                delta_control=float(delta_c), delta_gvf=deltas,
                cumulants=tuple(cums), policies=tuple(pis), v=self.v,
                events=tuple(events))
        return float(r)


_AGENT_CLASSES = {cls.kind: cls for cls in (ObsOnlyAgent, ExpertAgent, MetaAgent)}


def init_agent(config, seed):
    """Build a zero-initialised agent with its initial observation and a
    pre-selected initial action."""
    return _AGENT_CLASSES[config.kind](config, seed)


def agent_step(state, config=None):
    """Run one full cycle; returns (state, reward, diagnostics)."""
    del config  # the agent carries its configuration
    reward = state.step(collect_diag=True)
    return state, reward, state.last_diag
