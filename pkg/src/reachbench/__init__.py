"""Reaching-task benchmark: kinematic arm, model-free RL agents, HER, harness."""

__version__ = "0.1.0"
