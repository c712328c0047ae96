"""The meta-gradient under the microscope.

Each GVF carries policy logits and cumulant weights. One step of its TD
update is unrolled as a pure function of those meta-weights, the squared
control TD error after the unroll is the loss, and the analytic gradient is
checked against central finite differences.
"""

import numpy as np

from metagvf.meta import (MetaStepContext, cumulant, finite_difference_grads,
                          gradient_check, meta_grad, policy, unrolled_loss)
from metagvf.monsoon import GROWTH_OBS

rng = np.random.default_rng(3)
ctx = MetaStepContext(
    obs=GROWTH_OBS,
    action=1,
    behavior_prob=0.55,
    x=np.eye(400)[17],
    reward=1.0,
    q_weights=rng.uniform(-1, 1, size=(2, 4)),
    gvf_weights=[rng.uniform(-1, 1, size=400) for _ in range(2)],
    alpha_gvf=0.1,
    l2_lambda=0.001,
)

w_pi = np.zeros((2, 2))
w_c = np.zeros((2, 2))
print(f"zero meta-weights: policy {policy(w_pi[0]).probs}, "
      f"cumulant {cumulant(w_c[0], GROWTH_OBS)}")
print(f"unrolled loss at the origin: {unrolled_loss(ctx, w_pi, w_c):.6f}")

w_pi = rng.uniform(-1, 1, size=(2, 2))
w_c = rng.uniform(-1, 1, size=(2, 2))
analytic = meta_grad(ctx, w_pi, w_c)
numeric = finite_difference_grads(ctx, w_pi, w_c)
print("\nanalytic vs central-difference gradients (policy logits, GVF 0):")
print(f"  analytic {np.round(analytic[0][0], 8)}")
print(f"  numeric  {np.round(numeric[0][0], 8)}")

worst = gradient_check(n_contexts=100, seed=0)
print(f"\nmax relative error over 100 random contexts: {worst:.3e}")
