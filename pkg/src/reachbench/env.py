"""Reaching-task MDP on the kinematic arm.

State is ``[x_e, y_e, z_e, theta_1..theta_6]`` (end-effector position plus
joint angles), actions are per-joint angle deltas normalized to [-1, 1],
and the reward is the negative squared distance between the end effector
and the goal. An episode runs for ``episode_len`` steps unless the end
effector comes within ``termination_eps`` of the goal first.

The goal is either fixed across episodes or resampled uniformly from the
goal region at every reset. A goal-conditioned observation variant
additionally exposes the achieved and desired goal positions, which is
what hindsight relabeling consumes.

An environment instance is a single-owner state machine: never share one
instance across concurrent callers. Any number of instances can run in
parallel, each with its own rng stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (
    GOAL_BOX_HI,
    GOAL_BOX_LO,
    ArmModel,
    clamp_angles,
    default_arm,
    forward_kinematics,
    workspace_contains,
)

# Initial joint configuration shared by every episode. Chosen so the home
# end effector sits inside the goal region roughly 0.19 m from the default
# fixed goal.
HOME_THETA = np.array([0.0, 1.0, -1.4, 0.0, 0.0, 0.0])

DEFAULT_FIXED_GOAL = np.array([0.17, 0.0, 0.22])


def squared_distance_reward(achieved, desired) -> float:
    """Reward of one step: negative squared L2 distance to the goal (m^2)."""
    diff = np.asarray(achieved, dtype=float) - np.asarray(desired, dtype=float)
    return -float(diff @ diff)


@dataclass
class NoiseConfig:
    """Optional actuator imperfections applied to the joint deltas."""

    actuator_resolution: float = 0.0  # rad; 0 disables quantization
    action_noise_std: float = 0.0     # rad; 0 disables additive noise


@dataclass
class EnvConfig:
    goal_mode: str = "fixed"                  # "fixed" | "random"
    fixed_goal: np.ndarray = field(default_factory=lambda: DEFAULT_FIXED_GOAL.copy())
    episode_len: int = 100
    termination_eps: float = 0.0005           # m
    delta_max: float = 0.1                    # rad per step per joint
    goal_conditioned: bool = False
    noise: NoiseConfig | None = None
    seed: int = 0
    initial_theta: np.ndarray = field(default_factory=lambda: HOME_THETA.copy())
    goal_box_lo: np.ndarray = field(default_factory=lambda: GOAL_BOX_LO.copy())
    goal_box_hi: np.ndarray = field(default_factory=lambda: GOAL_BOX_HI.copy())

    def __post_init__(self):
        if self.goal_mode not in ("fixed", "random"):
            raise ValueError(f"goal_mode must be 'fixed' or 'random', got {self.goal_mode!r}")
        if self.episode_len < 1:
            raise ValueError("episode_len must be >= 1")
        if not self.termination_eps > 0:
            raise ValueError("termination_eps must be > 0")
        if not self.delta_max > 0:
            raise ValueError("delta_max must be > 0")
        self.fixed_goal = np.asarray(self.fixed_goal, dtype=float)
        self.initial_theta = np.asarray(self.initial_theta, dtype=float)
        self.goal_box_lo = np.asarray(self.goal_box_lo, dtype=float)
        self.goal_box_hi = np.asarray(self.goal_box_hi, dtype=float)

    @property
    def obs_dim(self) -> int:
        return 15 if self.goal_conditioned else 9


@dataclass
class StepResult:
    obs: object                # ndarray (9,) or goal-conditioned dict
    reward: float              # m^2, non-positive
    done: bool
    distance: float            # m


@dataclass
class EpisodeLog:
    """Per-step rewards and end-effector-to-goal distances of one episode."""

    rewards: list
    distances: list

    def __post_init__(self):
        if len(self.rewards) != len(self.distances):
            raise ValueError("rewards and distances must have equal length")

    @property
    def length(self) -> int:
        return len(self.rewards)


def episode_return(log) -> float:
    """Sum of rewards over one episode (compensated, exactly rounded)."""
    rewards = log.rewards if isinstance(log, EpisodeLog) else log
    if len(rewards) == 0:
        raise ValueError("episode log is empty")
    return math.fsum(rewards)


def sample_goal(rng: np.random.Generator,
                box_lo: np.ndarray = GOAL_BOX_LO,
                box_hi: np.ndarray = GOAL_BOX_HI,
                max_radius: float = 0.41) -> np.ndarray:
    """Uniform draw from the goal region (box intersected with reach sphere)."""
    while True:
        p = rng.uniform(box_lo, box_hi)
        if float(np.linalg.norm(p)) <= max_radius:
            return p


def flatten_observation(obs) -> np.ndarray:
    """Flat vector view of an observation.

    Plain observations are already ``[ee(3), theta(6)]``. Goal-conditioned
    dicts flatten to ``[ee(3), theta(6), achieved_goal(3), desired_goal(3)]``
    (indices 9:12 and 12:15), the layout hindsight relabeling rewrites.
    """
    if isinstance(obs, dict):
        return np.concatenate(
            [obs["observation"], obs["achieved_goal"], obs["desired_goal"]])
    return np.asarray(obs, dtype=float)


class ReachEnv:
    """Single-goal reaching environment over the kinematic arm."""

    def __init__(self, config: EnvConfig, arm: ArmModel | None = None,
                 rng: np.random.Generator | None = None, record: bool = False):
        self.config = config
        self.arm = arm if arm is not None else default_arm()
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.record = record
        self.trace: list[dict] = []
        if config.goal_mode == "fixed" and not workspace_contains(
                self.arm, config.fixed_goal, config.goal_box_lo, config.goal_box_hi):
            raise ValueError(
                f"fixed goal {config.fixed_goal} is outside the goal region")
        self._theta: np.ndarray | None = None
        self._ee: np.ndarray | None = None
        self._goal: np.ndarray | None = None
        self._step_count = 0
        self._episode_over = True

    @property
    def desired_goal(self) -> np.ndarray:
        if self._goal is None:
            raise RuntimeError("environment has not been reset")
        return self._goal.copy()

    @property
    def theta(self) -> np.ndarray:
        if self._theta is None:
            raise RuntimeError("environment has not been reset")
        return self._theta.copy()

    def reset(self):
        cfg = self.config
        self._theta = clamp_angles(self.arm, cfg.initial_theta)
        self._ee = forward_kinematics(self.arm, self._theta)
        if cfg.goal_mode == "fixed":
            self._goal = cfg.fixed_goal.copy()
        else:
            self._goal = sample_goal(self.rng, cfg.goal_box_lo, cfg.goal_box_hi,
                                     self.arm.max_reach())
        self._step_count = 0
        self._episode_over = False
        self.trace = []
        return self._observation()

    def step(self, action) -> StepResult:
        if self._theta is None:
            raise RuntimeError("step() before reset()")
        if self._episode_over:
            raise RuntimeError("step() after the episode finished; call reset()")
        action = np.asarray(action, dtype=float)
        if action.shape != (6,):
            raise ValueError("action must have 6 components")
        if not np.all(np.isfinite(action)):
            raise ValueError("action must be finite")
        cfg = self.config
        delta = np.clip(action, -1.0, 1.0) * cfg.delta_max
        if cfg.noise is not None:
            res = cfg.noise.actuator_resolution
            if res > 0:
                delta = np.round(delta / res) * res
            std = cfg.noise.action_noise_std
            if std > 0:
                delta = delta + self.rng.normal(0.0, std, size=6)
        self._theta = clamp_angles(self.arm, self._theta + delta)
        self._ee = forward_kinematics(self.arm, self._theta)
        reward = squared_distance_reward(self._ee, self._goal)
        distance = math.sqrt(-reward)
        self._step_count += 1
        done = distance < cfg.termination_eps or self._step_count >= cfg.episode_len
        self._episode_over = done
        if self.record:
            self.trace.append({
                "t": self._step_count,
                "theta": self._theta.tolist(),
                "ee": self._ee.tolist(),
                "goal": self._goal.tolist(),
                "action": action.tolist(),
                "reward": reward,
                "distance": distance,
                "done": done,
            })
        return StepResult(obs=self._observation(), reward=reward,
                          done=done, distance=distance)

    def _observation(self):
        plain = np.concatenate([self._ee, self._theta])
        if not self.config.goal_conditioned:
            return plain
        return {
            "observation": plain,
            "achieved_goal": self._ee.copy(),
            "desired_goal": self._goal.copy(),
        }


def write_episode_jsonl(path, trace) -> None:
    """Write one episode trace (list of per-step records) as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in trace:
            fh.write(json.dumps(record) + "\n")
