"""Monsoon World: a four-phase cyclic POMDP with a hidden season.

The field moves through a fixed cycle of four phases: two monsoon phases
(0, 1) followed by two drought phases (2, 3). Each step the agent waters
or does not water. Watering during a drought produces growth (reward 1),
watering during a monsoon does not (reward 0), and the other way around
for not watering. Time advances one phase per step no matter what the
agent does, and the agent observes only the outcome of its last action,
never the phase itself.
"""

from dataclasses import dataclass

import numpy as np

N_PHASES = 4
NOT_WATER = 0
WATER = 1
N_ACTIONS = 2

# Observations are one-hot over {growth, no-growth}; index 0 is the growth bit.
GROWTH_OBS = np.array([1.0, 0.0])
NO_GROWTH_OBS = np.array([0.0, 1.0])
GROWTH_OBS.setflags(write=False)
NO_GROWTH_OBS.setflags(write=False)


def season_of(phase):
    """Return 'monsoon' for phases {0,1} and 'drought' for {2,3}."""
    if phase in (0, 1):
        return "monsoon"
    if phase in (2, 3):
        return "drought"
    raise ValueError(f"phase must be in 0..3, got {phase!r}")


def correct_action(phase):
    """The rewarded action in a phase: water in drought, hold off in monsoon."""
    return WATER if season_of(phase) == "drought" else NOT_WATER


def step_reward(phase, action):
    """Reward of taking `action` in `phase`; exactly one action pays per phase."""
    if action not in (NOT_WATER, WATER):
        raise ValueError(f"action must be 0 or 1, got {action!r}")
    return 1 if action == correct_action(phase) else 0


def observation_for(reward):
    """One-hot observation whose growth bit equals the reward."""
    return GROWTH_OBS if reward else NO_GROWTH_OBS


@dataclass
class StepOutcome:
    reward: int
    observation: np.ndarray
    next_state: int


class MonsoonWorld:
    """Deterministic season cycle; one instance per trial, not shared."""

    def __init__(self):
        self.phase = 0

    def reset(self, seed=None):
        """Start a trial. The cycle is deterministic, so `seed` is accepted
        only for interface symmetry; phase 0 and a no-growth observation are
        always returned."""
        del seed
        self.phase = 0
        return self.phase, NO_GROWTH_OBS

    def step(self, action):
        reward = step_reward(self.phase, action)
        next_phase = (self.phase + 1) % N_PHASES
        self.phase = next_phase
        return StepOutcome(reward, observation_for(reward), next_phase)

    def step_indexed(self, action):
        """Allocation-free twin of step(): returns (reward, obs index) with
        index 0 = growth, 1 = no-growth."""
        phase = self.phase
        reward = 1 if action == (WATER if phase >= 2 else NOT_WATER) else 0
        self.phase = (phase + 1) % N_PHASES
        return reward, 0 if reward else 1
