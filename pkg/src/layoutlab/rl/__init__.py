"""Two-level reinforcement-learning exploration: a REINFORCE agent over
finger assignments wrapping a PPO actor-critic over component shifts."""

from .agents import (InnerAgent, InnerAgentConfig, OuterAgent,
                     OuterAgentConfig, RewardConfig, Transition,
                     inner_reward, outer_reward)
from .drive import RlConfig, RlResult, rl_explore
from .nn import Adam, DenseNetwork, load_checkpoint, save_checkpoint

__all__ = [
    "Adam", "DenseNetwork", "InnerAgent", "InnerAgentConfig", "OuterAgent",
    "OuterAgentConfig", "RewardConfig", "RlConfig", "RlResult", "Transition",
    "inner_reward", "load_checkpoint", "outer_reward", "rl_explore",
    "save_checkpoint",
]
