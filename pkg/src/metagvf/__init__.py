"""Meta-gradient discovery of general value functions on Monsoon World."""

from .agent import (Agent, AgentConfig, ExpertAgent, MetaAgent,
                    NonFiniteWeightError, ObsOnlyAgent, StepDiag, agent_step,
                    init_agent)
from .control import (QWeights, aggregate_predictions, gvf_feature,
                      obs_feature, q_learning_update, q_values, select_action)
from .experiment import (BatchSummary, ConfigError, RunConfig, TrialResult,
                         freeze_eval, make_config, run_batch, run_sweep,
                         run_trial)
from .gvf import (CumulantSpec, DiscountSpec, GvfSpec, TargetPolicy,
                  dp_oracle, echo_cumulant, echo_discount, expert_echo_gvfs,
                  importance_ratio, log_transform, predict, td_update)
from .meta import (MetaStepContext, MetaWeights, cumulant,
                   finite_difference_grads, gradient_check, meta_grad,
                   meta_update, policy, unrolled_loss)
from .monsoon import MonsoonWorld, StepOutcome, correct_action, season_of

__version__ = "0.1.0"
