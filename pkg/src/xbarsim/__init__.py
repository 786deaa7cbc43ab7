"""Slotted-time Monte-Carlo simulator of an N x N crossbar packet switch with
an analytic toolkit for its closed-form backlog bounds.

Three disciplines: greedy maximal-matching combined input-output queueing with
speedup, pure output queueing, and input-queued FCFS.  The analysis module
evaluates the corresponding backlog bounds and verifies them against
simulation; the engine provides seeded, reproducible runs and sweeps with
batch-means confidence intervals.
"""

from .analysis import (
    BoundInputs,
    Coefficients,
    bound_mm_upper,
    coefficients,
    count_lemma2_violations,
    j_oq_exact,
    lyapunov_h,
    q_ij,
    ratio_bound,
    verify_lemma2,
)
from .engine import (
    DriftDiagnostic,
    RunConfig,
    RunResult,
    SweepCell,
    default_horizon,
    run,
    run_drift_diagnostic,
    sweep,
)
from .errors import ConfigError, DomainError, InfeasibleDecisionError
from .matching import (
    Matching,
    RequestGraph,
    greedy_maximal_matching,
    is_matching,
    is_maximal,
)
from .policies import (
    FcfsQueues,
    InputQueuedFcfs,
    MaximalMatching,
    OutputQueued,
    PolicyKind,
    schedule_iq_fcfs,
    schedule_mm,
    schedule_mm_rounds,
    schedule_oq,
)
from .switch import (
    ArrivalMatrix,
    ScheduleDecision,
    SwitchState,
    TrafficConfig,
    apply_slot,
    sample_arrivals,
    total_backlog,
)

__version__ = "0.1.0"
