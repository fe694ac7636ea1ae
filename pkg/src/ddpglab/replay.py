"""Experience storage with proportional prioritized sampling.

A ring buffer of transitions sits on top of a sum tree whose leaves hold
priority**alpha, so inverse-CDF sampling needs no per-draw exponentiation.
New transitions enter at the running max priority; updates use
|td_error| + epsilon so nothing ever becomes unsampleable.

Snapshot format (text, bit-exact round trip)
--------------------------------------------
Line 1:  ``replay v1 capacity=<c> size=<s> cursor=<k> state_dim=<d> action_dim=<a>``
Line 2:  ``alpha=<hex> eps=<hex> max_priority=<hex>``
Then one line per stored slot, oldest slot index first:
  ``t <leaf-hex> <done:0|1> <r-hex> <s hex...> <a hex...> <s' hex...>``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np


@dataclass
class Transition:
    """One experience tuple."""

    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


class SumTree:
    """Complete binary tree over nonnegative leaf values.

    Internal nodes hold the sum of their children; the root is the total
    mass, enabling O(log n) prefix-sum lookups.
    """

    def __init__(self, capacity: int):
        if capacity < 1 or capacity & (capacity - 1):
            raise ValueError(f"capacity must be a power of two, got {capacity}")
        self.capacity = capacity
        self.nodes = np.zeros(2 * capacity - 1, dtype=np.float64)

    @property
    def total(self) -> float:
        return float(self.nodes[0])

    def leaf_values(self) -> np.ndarray:
        return self.nodes[self.capacity - 1 :]

    def set(self, leaf: int, value: float) -> None:
        """Write one leaf and re-sum its ancestors."""
        if not 0 <= leaf < self.capacity:
            raise IndexError(f"leaf {leaf} out of range [0, {self.capacity})")
        if not (value >= 0.0) or not np.isfinite(value):
            raise ValueError(f"leaf value must be finite and >= 0, got {value}")
        idx = leaf + self.capacity - 1
        self.nodes[idx] = value
        while idx > 0:
            idx = (idx - 1) // 2
            self.nodes[idx] = self.nodes[2 * idx + 1] + self.nodes[2 * idx + 2]

    def find_prefix(self, x: float) -> int:
        """Smallest leaf whose cumulative sum exceeds x.

        Descends left when x is below the left-child mass, otherwise
        subtracts that mass and descends right.
        """
        if self.total <= 0.0:
            raise ValueError("cannot search an empty tree")
        if not 0.0 <= x < self.total:
            raise ValueError(f"prefix {x} outside [0, {self.total})")
        idx = 0
        while idx < self.capacity - 1:
            left = 2 * idx + 1
            left_sum = self.nodes[left]
            if x < left_sum:
                idx = left
            else:
                x -= left_sum
                idx = left + 1
        return idx - (self.capacity - 1)

    def set_many(self, leaves: np.ndarray, values: np.ndarray) -> None:
        """Write several leaves, then re-sum affected ancestors level by level.

        Duplicate leaf indices behave like sequential set calls: the last
        value wins. Produces bit-identical node values to a loop of set().
        """
        leaves = np.asarray(leaves, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if leaves.shape != values.shape:
            raise ValueError("leaves and values length mismatch")
        if np.any(leaves < 0) or np.any(leaves >= self.capacity):
            raise IndexError("leaf index out of range")
        if np.any(values < 0.0) or not np.isfinite(values).all():
            raise ValueError("leaf values must be finite and >= 0")
        # keep only the last write per leaf
        last = {int(i): float(v) for i, v in zip(leaves, values)}
        idx = np.fromiter(last.keys(), dtype=np.int64) + self.capacity - 1
        self.nodes[idx] = np.fromiter(last.values(), dtype=np.float64)
        if self.capacity == 1:
            return
        # duplicate parents recompute the same sum, so no dedup needed
        parents = (idx - 1) // 2
        while True:
            self.nodes[parents] = (
                self.nodes[2 * parents + 1] + self.nodes[2 * parents + 2]
            )
            if parents[0] == 0:
                break
            parents = (parents - 1) // 2

    def find_prefix_batch(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized find_prefix over a batch of query values."""
        if self.total <= 0.0:
            raise ValueError("cannot search an empty tree")
        xs = np.asarray(xs, dtype=np.float64)
        if np.any(xs < 0.0) or np.any(xs >= self.total):
            raise ValueError("prefix values outside [0, total)")
        xs = xs.copy()
        idx = np.zeros(xs.shape, dtype=np.int64)
        while idx[0] < self.capacity - 1:
            left = 2 * idx + 1
            left_sum = self.nodes[left]
            go_left = xs < left_sum
            xs = np.where(go_left, xs, xs - left_sum)
            idx = np.where(go_left, left, left + 1)
        return idx - (self.capacity - 1)


@dataclass
class SampledBatch:
    """A prioritized mini-batch with max-normalized importance weights."""

    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    is_weights: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def transitions(self) -> list[Transition]:
        return [
            Transition(
                self.states[i],
                self.actions[i],
                float(self.rewards[i]),
                self.next_states[i],
                bool(self.dones[i]),
            )
            for i in range(len(self.indices))
        ]


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


class PrioritizedBuffer:
    """Ring buffer with sum-tree proportional sampling.

    Sampling probability of slot i is leaf_i / sum(leaves) where
    leaf_i = priority_i ** alpha; importance weights are
    (1 / (size * P(i))) ** beta, normalized by the batch maximum.
    """

    INITIAL_MAX_PRIORITY = 1.0

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 alpha: float = 0.6, priority_epsilon: float = 1e-6):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if priority_epsilon <= 0:
            raise ValueError("priority_epsilon must be positive")
        self.capacity = capacity
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.alpha = alpha
        self.priority_epsilon = priority_epsilon
        self.tree = SumTree(_next_pow2(capacity))
        self.max_priority_seen = self.INITIAL_MAX_PRIORITY
        self.size = 0
        self.cursor = 0
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros((capacity, action_dim))
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_dim))
        self._dones = np.zeros(capacity, dtype=bool)

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        """Store at the cursor with the running max priority; wraps at capacity."""
        s = np.asarray(t.s, dtype=np.float64)
        a = np.asarray(t.a, dtype=np.float64)
        s_next = np.asarray(t.s_next, dtype=np.float64)
        if s.shape != (self.state_dim,) or s_next.shape != (self.state_dim,):
            raise ValueError(
                f"state dims {s.shape}/{s_next.shape} do not match {self.state_dim}"
            )
        if a.shape != (self.action_dim,):
            raise ValueError(f"action dim {a.shape} does not match {self.action_dim}")
        i = self.cursor
        self._states[i] = s
        self._actions[i] = a
        self._rewards[i] = float(t.r)
        self._next_states[i] = s_next
        self._dones[i] = bool(t.done)
        self.tree.set(i, self.max_priority_seen**self.alpha)
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def transition_at(self, i: int) -> Transition:
        if not 0 <= i < self.size:
            raise IndexError(f"slot {i} not occupied")
        return Transition(
            self._states[i].copy(),
            self._actions[i].copy(),
            float(self._rewards[i]),
            self._next_states[i].copy(),
            bool(self._dones[i]),
        )

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n independent inverse-CDF draws (with replacement)."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if n < 1:
            raise ValueError("batch size must be >= 1")
        xs = rng.uniform(0.0, self.tree.total, size=n)
        return self.tree.find_prefix_batch(xs)

    def batch_for_indices(self, indices, beta: float) -> SampledBatch:
        """Assemble a batch with max-normalized importance weights.

        Raw weight of slot i is (1/(N * P(i)))**beta with N the current
        buffer size; the returned weights are divided by the batch max.
        """
        indices = np.asarray(indices, dtype=np.int64)
        if np.any(indices < 0) or np.any(indices >= self.size):
            raise IndexError("sampled index outside occupied slots")
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        probs = self.tree.leaf_values()[indices] / self.tree.total
        raw_w = (1.0 / (self.size * probs)) ** beta
        weights = raw_w / raw_w.max()
        return SampledBatch(
            indices=indices,
            states=self._states[indices],
            actions=self._actions[indices],
            rewards=self._rewards[indices],
            next_states=self._next_states[indices],
            dones=self._dones[indices],
            is_weights=weights,
        )

    def sample(self, n: int, beta: float, rng: np.random.Generator) -> SampledBatch:
        return self.batch_for_indices(self.sample_indices(n, rng), beta)

    def update_priorities(self, indices, td_errors) -> None:
        """Set priority |delta| + epsilon for each index; track the max."""
        indices = np.asarray(indices, dtype=np.int64)
        td_errors = np.asarray(td_errors, dtype=np.float64)
        if indices.shape != td_errors.shape:
            raise ValueError("indices and td_errors length mismatch")
        if np.any(indices < 0) or np.any(indices >= self.size):
            raise IndexError("priority update index outside occupied slots")
        priorities = np.abs(td_errors) + self.priority_epsilon
        self.tree.set_many(indices, priorities**self.alpha)
        self.max_priority_seen = max(self.max_priority_seen, float(priorities.max()))

    def exact_distribution(self) -> np.ndarray:
        """P(i) for every occupied slot via a linear scan over the leaves."""
        if self.size == 0:
            raise ValueError("empty buffer has no sampling distribution")
        leaves = self.tree.leaf_values()[: self.size]
        return leaves / leaves.sum()

    # -- snapshot ------------------------------------------------------------

    def save(self, fh: TextIO) -> None:
        fh.write(
            f"replay v1 capacity={self.capacity} size={self.size} "
            f"cursor={self.cursor} state_dim={self.state_dim} "
            f"action_dim={self.action_dim}\n"
        )
        fh.write(
            f"alpha={float(self.alpha).hex()} "
            f"eps={float(self.priority_epsilon).hex()} "
            f"max_priority={float(self.max_priority_seen).hex()}\n"
        )
        leaves = self.tree.leaf_values()
        for i in range(self.size):
            row = [
                "t",
                float(leaves[i]).hex(),
                str(int(self._dones[i])),
                float(self._rewards[i]).hex(),
            ]
            row += [float(v).hex() for v in self._states[i]]
            row += [float(v).hex() for v in self._actions[i]]
            row += [float(v).hex() for v in self._next_states[i]]
            fh.write(" ".join(row) + "\n")

    @classmethod
    def load(cls, fh: TextIO) -> "PrioritizedBuffer":
        head = fh.readline().split()
        if len(head) != 7 or head[0] != "replay" or head[1] != "v1":
            raise ValueError("bad replay snapshot header")
        meta = dict(part.split("=", 1) for part in head[2:])
        scalars = dict(part.split("=", 1) for part in fh.readline().split())
        buf = cls(
            capacity=int(meta["capacity"]),
            state_dim=int(meta["state_dim"]),
            action_dim=int(meta["action_dim"]),
            alpha=float.fromhex(scalars["alpha"]),
            priority_epsilon=float.fromhex(scalars["eps"]),
        )
        size = int(meta["size"])
        d = buf.state_dim
        a = buf.action_dim
        for i in range(size):
            parts = fh.readline().split()
            if parts[0] != "t" or len(parts) != 4 + 2 * d + a:
                raise ValueError(f"bad transition row {i}")
            vals = [float.fromhex(p) for p in parts[3:]]
            buf._states[i] = vals[1 : 1 + d]
            buf._actions[i] = vals[1 + d : 1 + d + a]
            buf._next_states[i] = vals[1 + d + a :]
            buf._rewards[i] = vals[0]
            buf._dones[i] = parts[2] == "1"
            buf.tree.set(i, float.fromhex(parts[1]))
        buf.size = size
        buf.cursor = int(meta["cursor"])
        buf.max_priority_seen = float.fromhex(scalars["max_priority"])
        return buf
