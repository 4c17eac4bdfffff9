"""Semantics-aware crowd navigation: simulator, safety zones, rewards and PPO learner."""

__version__ = "0.1.0"
