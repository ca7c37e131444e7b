"""Uniform replay storage plus hindsight goal relabeling.

Transitions store the achieved/desired goal positions alongside the flat
observations, so a stored step can be relabeled against any substitute
goal: the reward and termination flag are recomputed from the next
achieved position, and the goal slots of goal-conditioned observations
(indices 9:12 achieved, 12:15 desired) are rewritten to match.

Every transition entering the buffer, original or relabeled, must satisfy
``reward == -||next_achieved_goal - desired_goal||^2`` within 1e-12; the
push path enforces this so consumers never see an inconsistent batch.

Single-writer, single-reader: one training loop owns a buffer instance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .env import squared_distance_reward

GOAL_SLOT_ACHIEVED = slice(9, 12)
GOAL_SLOT_DESIRED = slice(12, 15)

_GROW_START = 1024


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool                      # goal-relative termination, not time limit
    achieved_goal: np.ndarray
    desired_goal: np.ndarray
    next_achieved_goal: np.ndarray


@dataclass
class HerConfig:
    strategy: str = "future"        # future | final | episode
    k: int = 4                      # relabeled copies per real transition

    def __post_init__(self):
        if self.strategy not in ("future", "final", "episode"):
            raise ValueError(f"unknown HER strategy {self.strategy!r}")
        if self.k < 0:
            raise ValueError("k must be >= 0")


def relabel(tr: Transition, new_goal: np.ndarray,
            termination_eps: float = 0.0005) -> Transition:
    """Copy of ``tr`` with the desired goal substituted.

    Reward and done are recomputed from the next achieved position under
    the new goal; goal-conditioned observation slots are rewritten.
    """
    new_goal = np.asarray(new_goal, dtype=float)
    reward = squared_distance_reward(tr.next_achieved_goal, new_goal)
    done = float(np.sqrt(-reward)) < termination_eps
    obs = tr.obs.copy()
    next_obs = tr.next_obs.copy()
    if obs.shape[0] == 15:
        obs[GOAL_SLOT_DESIRED] = new_goal
        next_obs[GOAL_SLOT_DESIRED] = new_goal
    return replace(tr, obs=obs, next_obs=next_obs, reward=reward, done=done,
                   desired_goal=new_goal.copy())


def reward_consistent(tr: Transition, tol: float = 1e-12) -> bool:
    return abs(tr.reward - squared_distance_reward(tr.next_achieved_goal,
                                                   tr.desired_goal)) <= tol


@dataclass
class TransitionBatch:
    """Column view of sampled transitions (N rows each)."""

    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray                # 0.0 / 1.0
    achieved_goal: np.ndarray
    desired_goal: np.ndarray
    next_achieved_goal: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]


class ReplayBuffer:
    """Ring buffer over transition columns; oldest entries evicted first."""

    _COLUMNS = ("obs", "action", "reward", "next_obs", "done",
                "achieved_goal", "desired_goal", "next_achieved_goal")

    def __init__(self, capacity: int = 1_000_000,
                 rng: np.random.Generator | None = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._store: dict[str, np.ndarray] | None = None
        self._count = 0             # total pushed, ever

    @property
    def size(self) -> int:
        return min(self._count, self.capacity)

    def _ensure_store(self, tr: Transition, need: int) -> None:
        if self._store is None:
            alloc = min(self.capacity, max(_GROW_START, need))
            self._store = {
                "obs": np.empty((alloc, tr.obs.shape[0])),
                "action": np.empty((alloc, tr.action.shape[0])),
                "reward": np.empty(alloc),
                "next_obs": np.empty((alloc, tr.next_obs.shape[0])),
                "done": np.empty(alloc),
                "achieved_goal": np.empty((alloc, 3)),
                "desired_goal": np.empty((alloc, 3)),
                "next_achieved_goal": np.empty((alloc, 3)),
            }
            return
        alloc = self._store["reward"].shape[0]
        if need > alloc and alloc < self.capacity:
            new_alloc = min(self.capacity, max(need, alloc * 2))
            for key, arr in self._store.items():
                grown = np.empty((new_alloc,) + arr.shape[1:])
                grown[:alloc] = arr
                self._store[key] = grown

    def push(self, tr: Transition) -> None:
        if not reward_consistent(tr):
            raise ValueError(
                "transition reward is inconsistent with its goals")
        idx = self._count % self.capacity
        self._ensure_store(tr, idx + 1)
        store = self._store
        store["obs"][idx] = tr.obs
        store["action"][idx] = tr.action
        store["reward"][idx] = tr.reward
        store["next_obs"][idx] = tr.next_obs
        store["done"][idx] = 1.0 if tr.done else 0.0
        store["achieved_goal"][idx] = tr.achieved_goal
        store["desired_goal"][idx] = tr.desired_goal
        store["next_achieved_goal"][idx] = tr.next_achieved_goal
        self._count += 1

    def get(self, idx: int) -> Transition:
        """Transition at storage slot ``idx`` (0 <= idx < size)."""
        if not 0 <= idx < self.size:
            raise IndexError(idx)
        s = self._store
        return Transition(
            obs=s["obs"][idx].copy(), action=s["action"][idx].copy(),
            reward=float(s["reward"][idx]), next_obs=s["next_obs"][idx].copy(),
            done=bool(s["done"][idx]),
            achieved_goal=s["achieved_goal"][idx].copy(),
            desired_goal=s["desired_goal"][idx].copy(),
            next_achieved_goal=s["next_achieved_goal"][idx].copy(),
        )

    def sample(self, batch: int, rng: np.random.Generator | None = None) -> TransitionBatch:
        """Uniform sample with replacement; deterministic given the rng state."""
        if batch > self.size:
            raise ValueError(f"batch {batch} exceeds buffer size {self.size}")
        rng = rng if rng is not None else self.rng
        idx = rng.integers(0, self.size, size=batch)
        s = self._store
        return TransitionBatch(*(s[col][idx] for col in self._COLUMNS))

    def snapshot_jsonl(self, path) -> None:
        """Debug dump of current contents as JSON lines (slot order)."""
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(self.size):
                tr = self.get(i)
                fh.write(json.dumps({
                    "obs": tr.obs.tolist(), "action": tr.action.tolist(),
                    "reward": tr.reward, "next_obs": tr.next_obs.tolist(),
                    "done": tr.done,
                    "achieved_goal": tr.achieved_goal.tolist(),
                    "desired_goal": tr.desired_goal.tolist(),
                    "next_achieved_goal": tr.next_achieved_goal.tolist(),
                }) + "\n")


def push_episode(buf: ReplayBuffer, episode: list[Transition],
                 her: HerConfig | None = None,
                 termination_eps: float = 0.0005) -> int:
    """Store an episode plus ``k`` hindsight-relabeled copies per step.

    Transitions must be temporally ordered; each real transition is stored
    first, immediately followed by its relabeled copies. Returns the number
    of transitions stored.
    """
    n = len(episode)
    for t in range(n - 1):
        if not np.array_equal(episode[t].next_obs, episode[t + 1].obs):
            raise ValueError(f"episode is inconsistent at step {t}: "
                             "next_obs does not match the following obs")
    stored = 0
    k = her.k if her is not None else 0
    strategy = her.strategy if her is not None else "future"
    for t, tr in enumerate(episode):
        buf.push(tr)
        stored += 1
        for _ in range(k):
            if strategy == "future":
                j = int(buf.rng.integers(t, n))
            elif strategy == "episode":
                j = int(buf.rng.integers(0, n))
            else:  # final
                j = n - 1
            goal = episode[j].next_achieved_goal
            buf.push(relabel(tr, goal, termination_eps))
            stored += 1
    return stored
