"""Core switch state, slot dynamics, and the IID uniform traffic generator.

Time is slotted.  Within slot t the switch:

1. computes a schedule (d, e) from the start-of-slot state (X(t), Y(t)) only;
2. moves d[i, j] cells from input queue (i, j) toward output j and serves
   every output queue that is nonempty after the transfers (a cell moved in
   slot t can therefore depart in slot t);
3. receives the slot's arrivals, which join the input queues at the end of
   the slot and become schedulable in slot t+1.

The state then advances by the recursions

    X(t+1) = X(t) + A(t) - D(t)
    Y(t+1) = Y(t) + sum_i D(t) - E(t)

and all measurements are taken on the post-update state at integer times.
Arrivals never influence the same slot's schedule; this is what makes the
output-queued switch agree with its closed-form backlog (see analysis module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleDecisionError

__all__ = [
    "SwitchState",
    "ArrivalMatrix",
    "ScheduleDecision",
    "TrafficConfig",
    "sample_arrivals",
    "apply_slot",
    "total_backlog",
]


def _int_matrix(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.int64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ConfigError(f"{name} must be a square N x N matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class SwitchState:
    """Queue occupancy of an N x N switch.

    x[i, j] counts cells at input i destined for output j (the virtual output
    queues); y[j] counts cells in output queue j.  Arrays are owned by the
    state and must not be mutated.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _int_matrix(self.x, "x")
        y = np.asarray(self.y, dtype=np.int64)
        if y.shape != (x.shape[0],):
            raise ConfigError(f"y must be an N-vector matching x, got shape {y.shape}")
        if x.min() < 0 or (y.size and y.min() < 0):
            raise ConfigError("queue counts must be non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_ports(self) -> int:
        return self.x.shape[0]

    @classmethod
    def empty(cls, n_ports: int) -> "SwitchState":
        return cls(np.zeros((n_ports, n_ports), dtype=np.int64), np.zeros(n_ports, dtype=np.int64))


@dataclass(frozen=True)
class ArrivalMatrix:
    """One slot of arrivals: a[i, j] = 1 iff a cell arrived at input i for output j.

    At most one cell arrives per input per slot, so every row sums to at most 1.
    """

    a: np.ndarray

    def __post_init__(self):
        a = _int_matrix(self.a, "a")
        if a.min() < 0 or a.max() > 1:
            raise ConfigError("arrival entries must be 0 or 1")
        if a.sum(axis=1).max() > 1:
            raise ConfigError("at most one arrival per input per slot")
        object.__setattr__(self, "a", a)

    @property
    def n_ports(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class ScheduleDecision:
    """One slot of scheduling.

    d[i, j] is the number of cells moved from input queue (i, j) to output j
    this slot; e[j] is 1 iff output queue j is served.  d accumulates one
    matching per scheduling round, so over the slot every row and column sum
    of d is bounded by the speedup.
    """

    d: np.ndarray
    e: np.ndarray
    speedup: int

    def __post_init__(self):
        d = _int_matrix(self.d, "d")
        e = np.asarray(self.e, dtype=np.int64)
        if not isinstance(self.speedup, (int, np.integer)) or self.speedup < 1:
            raise ConfigError("speedup must be a positive integer")
        if e.shape != (d.shape[0],):
            raise ConfigError(f"e must be an N-vector matching d, got shape {e.shape}")
        if d.min() < 0 or d.max() > self.speedup:
            raise ConfigError(f"transfer counts must lie in 0..{self.speedup}")
        if d.sum(axis=0).max() > self.speedup or d.sum(axis=1).max() > self.speedup:
            raise ConfigError("row and column sums of d must not exceed the speedup")
        if e.min() < 0 or e.max() > 1:
            raise ConfigError("service entries must be 0 or 1")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "speedup", int(self.speedup))

    @property
    def n_ports(self) -> int:
        return self.d.shape[0]


@dataclass(frozen=True)
class TrafficConfig:
    """IID uniform traffic: per slot each input receives a cell with
    probability `load`, destined to a uniformly random output.

    load = 1 is admitted for finite-horizon checks; steady-state experiments
    require load < 1 (enforced by the simulation engine and CLI).
    """

    load: float
    n_ports: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.load <= 1.0:
            raise ConfigError(f"load must lie in [0, 1], got {self.load}")
        if not isinstance(self.n_ports, (int, np.integer)) or self.n_ports < 1:
            raise ConfigError("n_ports must be a positive integer")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "n_ports", int(self.n_ports))
        object.__setattr__(self, "seed", int(self.seed))


def sample_arrivals(cfg: TrafficConfig, rng: np.random.Generator) -> ArrivalMatrix:
    """Draw one slot of arrivals.

    Independently for each input i, with probability `cfg.load` a cell arrives
    and its destination is uniform over the N outputs; otherwise row i is all
    zeros.  This realizes E[A_ij] = E[A_ij^2] = load/N, E[A_kj A_lj] =
    (load/N)^2 for k != l, and E[A_ik A_il] = 0 for k != l.

    The generator always consumes N uniforms and N destination draws per slot,
    so the stream position depends only on the slot count.
    """
    n = cfg.n_ports
    u = rng.random(n)
    dest = rng.integers(0, n, size=n)
    a = np.zeros((n, n), dtype=np.int64)
    hit = u < cfg.load
    a[np.nonzero(hit)[0], dest[hit]] = 1
    return ArrivalMatrix(a)


def apply_slot(state: SwitchState, arrivals: ArrivalMatrix, decision: ScheduleDecision) -> SwitchState:
    """Advance the state one slot: x' = x + a - d, y' = y + colsum(d) - e.

    Raises InfeasibleDecisionError if any resulting count would go negative,
    which signals a policy bug (a schedule claiming cells that are not there,
    or serving an empty output queue).
    """
    n = state.n_ports
    if arrivals.n_ports != n or decision.n_ports != n:
        raise ConfigError("state, arrivals and decision disagree on the port count")
    x2 = state.x + arrivals.a - decision.d
    if x2.min() < 0:
        raise InfeasibleDecisionError("transfer matrix exceeds available input cells")
    y2 = state.y + decision.d.sum(axis=0) - decision.e
    if y2.min() < 0:
        raise InfeasibleDecisionError("service vector exceeds available output cells")
    return SwitchState(x2, y2)


def total_backlog(state: SwitchState) -> int:
    """Total cell count across all input and output queues."""
    return int(state.x.sum()) + int(state.y.sum())
