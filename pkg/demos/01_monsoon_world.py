"""A walk through Monsoon World.

The field cycles monsoon, monsoon, drought, drought. Watering pays during a
drought, holding off pays during a monsoon, and the agent sees only whether
its last action produced growth - never the season itself.
"""

import numpy as np

from metagvf.monsoon import MonsoonWorld, WATER, NOT_WATER, correct_action, season_of

env = MonsoonWorld()
phase, obs = env.reset(seed=0)
print(f"reset: phase={phase} ({season_of(phase)}), observation={obs}")

print("\nAlways watering for eight steps:")
for t in range(8):
    phase = env.phase
    out = env.step(WATER)
    print(f"  t={t} phase={phase} ({season_of(phase):7s}) water -> "
          f"reward={out.reward} obs={out.observation}")

print("\nSeason-matched actions earn a reward every step:")
env.reset()
total = 0
for t in range(12):
    total += env.step(correct_action(env.phase)).reward
print(f"  12 matched steps -> total reward {total}")

print("\nRandom actions earn about half:")
rng = np.random.default_rng(7)
env.reset()
total = sum(env.step(int(rng.integers(2))).reward for _ in range(10_000))
print(f"  10k random steps -> mean reward {total / 10_000:.3f}")

print("\nWhy observations alone cannot solve it:")
env.phase = 3
obs_a = env.step(WATER).observation       # drought + water
env.phase = 1
obs_b = env.step(NOT_WATER).observation   # monsoon + hold
print(f"  entering phase 0 after correct water:   obs={obs_a}")
print(f"  entering phase 2 after correct holding: obs={obs_b}")
print("  identical observations, different hidden phases.")
