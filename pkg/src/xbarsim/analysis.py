"""Closed-form backlog quantities and the per-slot trajectory verifier.

All formulas are parameterized by the port count N, the traffic intensity
load (lambda), and the speedup s.  With

    alpha1(s) = 1 / ((s-1)^2 - 1)
    alpha2(s) = (s-1) / ((s-1)^2 - 1)
    k1(s) = 1 + alpha1(s)
    k2(s) = 2 + (alpha1(s) + alpha2(s)) (s+1)
    k3(s) = 2 + 2 alpha1(s) + 2 alpha2(s)

the module provides:

* bound_mm_upper  -- upper bound on the steady-state average backlog of the
  maximal-matching CIOQ switch:
      (k1 (1 - 1/N) lam^2 + k2 lam - k3 lam^2) N / (2 (1 - lam))
* j_oq_exact      -- exact average backlog of the output-queued switch:
      ((1 - 1/N) lam^2 + 2 lam - 2 lam^2) N / (2 (1 - lam))
* ratio_bound     -- load-free ceiling on bound/exact:
      N/(N-1) * (2 (s-1)^2 + (s-1)) / ((s-1)^2 - 1)
* q_ij / verify_lemma2 -- the per-slot service-share quantity
      Q_ij = (1 + alpha1 + alpha2) lam
             - (alpha1 * colsum_j(d) + e_j + alpha2 * rowsum_i(d))
  which a maximal-matching schedule with s >= 3 must keep <= lam - 1 at every
  occupied virtual queue (the lemma2 check of the CLI and engine);
* lyapunov_h      -- the quadratic potential whose expected one-step drift
  yields bound_mm_upper, exposed for the empirical drift diagnostic.

Everything needs s >= 3 (so the alpha denominators are positive) and, except
for the Q_ij check (valid for lam <= 1), load < 1 for finiteness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import DomainError
from .switch import ScheduleDecision, SwitchState

__all__ = [
    "BoundInputs",
    "Coefficients",
    "coefficients",
    "q_ij",
    "verify_lemma2",
    "count_lemma2_violations",
    "bound_mm_upper",
    "j_oq_exact",
    "ratio_bound",
    "lyapunov_h",
]

_LEMMA2_TOL = 1e-9


@dataclass(frozen=True)
class BoundInputs:
    """Validated (N, load, speedup) triple parameterizing the closed forms."""

    n_ports: int
    load: float
    speedup: int

    def __post_init__(self):
        if self.n_ports < 2:
            raise DomainError("bounds need n_ports >= 2")
        if not 0.0 <= self.load < 1.0:
            raise DomainError("bounds need 0 <= load < 1")
        _check_speedup(self.speedup)


@dataclass(frozen=True)
class Coefficients:
    alpha1: float
    alpha2: float
    k1: float
    k2: float
    k3: float


def _check_speedup(speedup: int) -> None:
    if not isinstance(speedup, (int, np.integer)) or speedup < 3:
        raise DomainError(
            f"analytic forms need speedup >= 3 ((s-1)^2 - 1 must be positive), got {speedup}"
        )


def coefficients(speedup: int) -> Coefficients:
    """alpha and k coefficients for a given speedup (requires speedup >= 3)."""
    _check_speedup(speedup)
    den = (speedup - 1) ** 2 - 1
    alpha1 = 1.0 / den
    alpha2 = (speedup - 1.0) / den
    return Coefficients(
        alpha1=alpha1,
        alpha2=alpha2,
        k1=1.0 + alpha1,
        k2=2.0 + (alpha1 + alpha2) * (speedup + 1),
        k3=2.0 + 2.0 * alpha1 + 2.0 * alpha2,
    )


def _check_load(load: float, upper_inclusive: bool = False) -> None:
    if upper_inclusive:
        if not 0.0 <= load <= 1.0:
            raise DomainError(f"load must lie in [0, 1], got {load}")
    elif not 0.0 <= load < 1.0:
        raise DomainError(f"load must lie in [0, 1), got {load}")


def q_ij(
    load: float,
    d: np.ndarray,
    e: np.ndarray,
    speedup: int,
    i: int,
    j: int,
) -> float:
    """Service-share quantity at virtual queue (i, j) for a slot's schedule:

        (1 + alpha1 + alpha2) load
        - (alpha1 * sum_l d[l, j] + e[j] + alpha2 * sum_l d[i, l])

    Defined for load <= 1 and speedup >= 3.
    """
    c = coefficients(speedup)
    _check_load(load, upper_inclusive=True)
    d = np.asarray(d)
    e = np.asarray(e)
    return float(
        (1.0 + c.alpha1 + c.alpha2) * load
        - (c.alpha1 * d[:, j].sum() + e[j] + c.alpha2 * d[i, :].sum())
    )


def _q_matrix(x: np.ndarray, dec: ScheduleDecision, load: float, speedup: int) -> np.ndarray:
    c = coefficients(speedup)
    col = dec.d.sum(axis=0)
    row = dec.d.sum(axis=1)
    return (1.0 + c.alpha1 + c.alpha2) * load - (
        c.alpha1 * col[None, :] + dec.e[None, :] + c.alpha2 * row[:, None]
    )


def verify_lemma2(
    state: SwitchState,
    dec: ScheduleDecision,
    load: float,
    speedup: int,
) -> List[Tuple[int, int, float]]:
    """Check Q_ij <= load - 1 at every occupied virtual queue of the state the
    scheduler saw (start of slot, before the slot's arrivals landed).

    Returns the violating (i, j, Q_ij) triples; an empty list is expected for
    any maximal-matching schedule with speedup >= 3 and load <= 1.  Violations
    are data, not errors - they mean the schedule was not maximal.
    """
    _check_load(load, upper_inclusive=True)
    q = _q_matrix(state.x, dec, load, speedup)
    bad = (state.x > 0) & (q > load - 1.0 + _LEMMA2_TOL)
    return [(int(i), int(j), float(q[i, j])) for i, j in np.argwhere(bad)]


def count_lemma2_violations(
    state: SwitchState,
    dec: ScheduleDecision,
    load: float,
    speedup: int,
) -> int:
    """Violation count only (cheaper per-slot form used by the engine)."""
    _check_load(load, upper_inclusive=True)
    q = _q_matrix(state.x, dec, load, speedup)
    return int(((state.x > 0) & (q > load - 1.0 + _LEMMA2_TOL)).sum())


def bound_mm_upper(b: BoundInputs) -> float:
    """Upper bound on the average backlog under maximal matching with speedup."""
    c = coefficients(b.speedup)
    lam = b.load
    n = b.n_ports
    return (c.k1 * (1.0 - 1.0 / n) * lam**2 + c.k2 * lam - c.k3 * lam**2) * n / (2.0 * (1.0 - lam))


def j_oq_exact(n_ports: int, load: float) -> float:
    """Exact average backlog of the output-queued switch.

    Each output queue is a discrete-time single-server queue fed by the
    superposed arrival column; its stationary mean is
    (E[(sum_i A_ij)^2] + lam - 2 lam^2) / (2 (1 - lam)) with
    E[(sum_i A_ij)^2] = (1 - 1/N) lam^2 + lam, summed over the N outputs.
    """
    if n_ports < 1:
        raise DomainError("n_ports must be positive")
    _check_load(load)
    lam = load
    return ((1.0 - 1.0 / n_ports) * lam**2 + 2.0 * lam - 2.0 * lam**2) * n_ports / (2.0 * (1.0 - lam))


def ratio_bound(n_ports: int, speedup: int) -> float:
    """Load-free ceiling on (maximal-matching backlog) / (output-queued backlog):

        N/(N-1) * (2 (s-1)^2 + (s-1)) / ((s-1)^2 - 1)

    Decreasing in both N and s; approaches 2 as both grow.
    """
    if n_ports < 2:
        raise DomainError("ratio bound needs n_ports >= 2")
    _check_speedup(speedup)
    sm = speedup - 1
    return n_ports / (n_ports - 1.0) * (2.0 * sm**2 + sm) / (sm**2 - 1.0)


def lyapunov_h(state: SwitchState, load: float, speedup: int) -> float:
    """Quadratic potential h(x, y) = h1 + h2 + h3 with

        h1 = alpha1/(2(1-lam)) * sum_j [ colsum_j(x)^2 + (s - 2 lam) colsum_j(x) ]
        h2 = alpha2/(2(1-lam)) * sum_i [ rowsum_i(x)^2 + (s - 2 lam) rowsum_i(x) ]
        h3 = 1/(2(1-lam)) * sum_j (colsum_j(x) + y_j)^2
             + (1-2 lam)/(2(1-lam)) * sum_j (colsum_j(x) + y_j)

    Non-negative on every feasible state for s >= 3.  Used only as a
    diagnostic: the long-run average of backlog(t) + h(t+1) - h(t) along a
    maximal-matching trajectory must stay below bound_mm_upper's constant.
    """
    c = coefficients(speedup)
    _check_load(load)
    lam = load
    col = state.x.sum(axis=0).astype(np.float64)
    row = state.x.sum(axis=1).astype(np.float64)
    z = col + state.y
    denom = 2.0 * (1.0 - lam)
    h1 = c.alpha1 / denom * float(np.sum(col**2 + (speedup - 2.0 * lam) * col))
    h2 = c.alpha2 / denom * float(np.sum(row**2 + (speedup - 2.0 * lam) * row))
    h3 = float(np.sum(z**2)) / denom + (1.0 - 2.0 * lam) / denom * float(np.sum(z))
    return h1 + h2 + h3
