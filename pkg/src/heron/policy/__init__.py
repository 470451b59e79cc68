from .baselines import EngineeredReward, combine_action_values, engineered_reward, ensemble_act
from .dpo import SoftmaxBanditPolicy, dpo_loss, dpo_update, make_bandit_policy, train_dpo
from .pg import PgAgent, make_pg_agent, pg_surrogate, pg_update
from .qlearn import QAgent, QConfig, ReplayBuffer, make_q_agent, q_update, td_loss
from .training import HeronConfig, HeronRewardLearner, TrainResult, train_pg, train_q

__all__ = [
    "EngineeredReward", "combine_action_values", "engineered_reward", "ensemble_act",
    "SoftmaxBanditPolicy", "dpo_loss", "dpo_update", "make_bandit_policy", "train_dpo",
    "PgAgent", "make_pg_agent", "pg_surrogate", "pg_update", "QAgent", "QConfig",
    "ReplayBuffer", "make_q_agent", "q_update", "td_loss", "HeronConfig",
    "HeronRewardLearner", "TrainResult", "train_pg", "train_q",
]
