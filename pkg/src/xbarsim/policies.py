"""The three scheduling disciplines.

* MaximalMatching: combined input-output queueing with speedup s.  Each slot
  runs s rounds; every round rebuilds the request graph from the residual
  input occupancy and transfers one cell along each edge of a greedy maximal
  matching.  Outputs then serve work-conservingly: e_j = 1 iff output j is
  nonempty after the transfers.
* OutputQueued: the idealized reference.  Arrivals go straight to their
  output queues (d = a, input queues stay empty) and each output serves the
  cell at its head.
* InputQueuedFcfs: one scheduling round per slot; each input nominates the
  destination of its oldest cell, each contended output grants one nominee
  uniformly at random.  Head-of-line blocking caps its throughput well below
  full load.

All schedules are computed from the start-of-slot state; the slot's own
arrivals land afterwards (see the switch module).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from .errors import ConfigError
from .matching import Matching, RequestGraph, greedy_maximal_matching
from .switch import ArrivalMatrix, ScheduleDecision, SwitchState

__all__ = [
    "MaximalMatching",
    "OutputQueued",
    "InputQueuedFcfs",
    "PolicyKind",
    "FcfsQueues",
    "schedule_mm",
    "schedule_mm_rounds",
    "schedule_oq",
    "schedule_iq_fcfs",
    "stepper_for",
]


@dataclass(frozen=True)
class MaximalMatching:
    """Greedy maximal-matching CIOQ discipline with `speedup` rounds per slot.

    Any speedup >= 1 can be simulated; the analytic backlog bounds additionally
    require speedup >= 3 (enforced by the analysis module, not here).
    """

    speedup: int

    def __post_init__(self):
        if not isinstance(self.speedup, (int, np.integer)) or self.speedup < 1:
            raise ConfigError("speedup must be a positive integer")
        object.__setattr__(self, "speedup", int(self.speedup))


@dataclass(frozen=True)
class OutputQueued:
    """Pure output queueing (delay-optimal reference)."""


@dataclass(frozen=True)
class InputQueuedFcfs:
    """Input queueing with FCFS service and random grants."""


PolicyKind = Union[MaximalMatching, OutputQueued, InputQueuedFcfs]


def _service_vector(y: np.ndarray, d: np.ndarray) -> np.ndarray:
    # work conserving: serve every output nonempty after the transfer phase
    return ((y + d.sum(axis=0)) > 0).astype(np.int64)


def schedule_mm_rounds(
    state: SwitchState,
    speedup: int,
    rng: np.random.Generator = None,
    order: str = "random",
) -> Tuple[ScheduleDecision, List[Matching]]:
    """Like schedule_mm, but also return the per-round matchings."""
    if order not in ("random", "lexicographic"):
        raise ConfigError(f"unknown edge order {order!r}")
    if order == "random" and rng is None:
        raise ConfigError("random edge order needs a generator")
    n = state.n_ports
    xw = state.x.copy()
    d = np.zeros((n, n), dtype=np.int64)
    rounds: List[Matching] = []
    for _ in range(speedup):
        graph = RequestGraph.from_occupancy(xw)
        if not graph.edges:
            break
        if order == "random":
            seq = graph.sorted_edges()
            perm = rng.permutation(len(seq))
            seq = [seq[k] for k in perm]
        else:
            seq = None
        m = greedy_maximal_matching(graph, seq)
        rounds.append(m)
        for i, j in m.edges:
            d[i, j] += 1
            xw[i, j] -= 1
    return ScheduleDecision(d, _service_vector(state.y, d), speedup), rounds


def schedule_mm(
    state: SwitchState,
    speedup: int,
    rng: np.random.Generator = None,
    order: str = "random",
) -> ScheduleDecision:
    """Run `speedup` rounds of greedy maximal matching on the residual input
    occupancy and serve every output nonempty after the transfers.

    The default edge order is a fresh random permutation per round (avoids
    port bias); order="lexicographic" gives a reproducible deterministic pass.
    """
    dec, _ = schedule_mm_rounds(state, speedup, rng, order)
    return dec


def schedule_oq(state: SwitchState, arrivals: ArrivalMatrix) -> ScheduleDecision:
    """Output queueing: the slot's arrivals are forwarded to their output
    queues (d = a), and each output serves its head-of-line cell.

    Service is decided from the start-of-slot queue, so a cell forwarded this
    slot departs at the earliest in the next slot.  The decision carries
    speedup = N: forwarding every arrival can take up to N transfer rounds,
    which is exactly why pure output queueing does not scale.
    """
    if state.x.any():
        raise ConfigError("output-queued switch holds no input backlog")
    if arrivals.n_ports != state.n_ports:
        raise ConfigError("state and arrivals disagree on the port count")
    e = (state.y > 0).astype(np.int64)
    return ScheduleDecision(arrivals.a, e, state.n_ports)


class FcfsQueues:
    """Per-input arrival-order destination queues (auxiliary FCFS state).

    queues[i] holds the destinations of input i's waiting cells, oldest
    first.  Kept consistent with the state's x by the IQ-FCFS stepper.
    """

    def __init__(self, n_ports: int):
        self.n_ports = n_ports
        self.queues = [deque() for _ in range(n_ports)]

    def record_arrivals(self, arrivals: ArrivalMatrix) -> None:
        """Append the slot's arrivals in input-index order."""
        for i, j in zip(*np.nonzero(arrivals.a)):
            self.queues[int(i)].append(int(j))

    def lengths(self) -> np.ndarray:
        return np.array([len(q) for q in self.queues], dtype=np.int64)


def schedule_iq_fcfs(
    state: SwitchState,
    fcfs: FcfsQueues,
    rng: np.random.Generator,
) -> ScheduleDecision:
    """One round: every nonempty input nominates its head-of-line destination,
    every output with nominees grants one of them uniformly at random, and the
    granted head-of-line cells transfer.

    Pops the transferred cells from `fcfs`; call exactly once per slot.
    """
    n = state.n_ports
    if fcfs.n_ports != n:
        raise ConfigError("state and FCFS queues disagree on the port count")
    if not np.array_equal(fcfs.lengths(), state.x.sum(axis=1)):
        raise ConfigError("FCFS queues out of sync with the switch state")
    nominees = {}
    for i in range(n):
        if fcfs.queues[i]:
            nominees.setdefault(fcfs.queues[i][0], []).append(i)
    d = np.zeros((n, n), dtype=np.int64)
    for j in sorted(nominees):
        inputs = nominees[j]
        winner = inputs[rng.integers(len(inputs))]
        d[winner, j] = 1
        fcfs.queues[winner].popleft()
    return ScheduleDecision(d, _service_vector(state.y, d), 1)


class _MmStepper:
    def __init__(self, speedup: int):
        self.speedup = speedup

    def decide(self, state, arrivals, rng):
        # arrivals are not visible to the scheduler; they land after this slot
        return schedule_mm(state, self.speedup, rng)

    def after_slot(self, arrivals):
        pass


class _OqStepper:
    def decide(self, state, arrivals, rng):
        return schedule_oq(state, arrivals)

    def after_slot(self, arrivals):
        pass


class _IqFcfsStepper:
    def __init__(self, n_ports: int):
        self.fcfs = FcfsQueues(n_ports)

    def decide(self, state, arrivals, rng):
        return schedule_iq_fcfs(state, self.fcfs, rng)

    def after_slot(self, arrivals):
        self.fcfs.record_arrivals(arrivals)


def stepper_for(policy: PolicyKind, n_ports: int):
    """Fresh per-run stepper: decide(state, arrivals, rng) -> ScheduleDecision,
    plus an after_slot(arrivals) hook for policies carrying auxiliary state."""
    if isinstance(policy, MaximalMatching):
        return _MmStepper(policy.speedup)
    if isinstance(policy, OutputQueued):
        return _OqStepper()
    if isinstance(policy, InputQueuedFcfs):
        return _IqFcfsStepper(n_ports)
    raise ConfigError(f"unknown policy {policy!r}")
