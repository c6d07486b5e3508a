"""Discrete-event replay of a probabilistic deadline scheduler.

Jobs are single-slot. On submission a job's class predictor supplies a
budget (forecast inflated by an empirical error quantile); the job is
admitted only if some slot has a free interval of that length finishing by
the deadline, and the interval is reserved. Dispatch is earliest deadline
first; a job may jump ahead into an idle gap only when its budget ends before
the next reservation on that slot (conservative backfilling), so every
admission promise stays honoured unless a running job overruns its budget.
Overrunning jobs are never killed.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping

from ._validation import check_confidence
from .forecasters.base import Forecast

log = logging.getLogger(__name__)

ACCEPTED = "accepted"
REJECTED = "rejected"
UNMODELLABLE = "unmodellable"

_COMPLETE, _START, _SUBMIT = 0, 1, 2


@dataclass(frozen=True)
class ClusterSpec:
    nodes: tuple = (("node00", 1),)
    homogeneous: bool = True

    def __post_init__(self):
        nodes = tuple((str(n), int(s)) for n, s in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if any(s < 1 for _, s in nodes):
            raise ValueError("every node needs at least one slot")
        if not nodes:
            raise ValueError("cluster needs at least one node")
        if not self.homogeneous:
            raise ValueError("only homogeneous clusters are supported")

    @classmethod
    def uniform(cls, n_nodes: int, slots_per_node: int = 1) -> "ClusterSpec":
        return cls(tuple((f"node{i:02d}", slots_per_node) for i in range(n_nodes)))

    @property
    def total_slots(self) -> int:
        return sum(s for _, s in self.nodes)


@dataclass
class JobRequest:
    job_number: int
    class_key: str
    submit_time: float
    deadline: float
    true_duration: float
    requested_confidence: float = 0.9

    def __post_init__(self):
        if not self.deadline > self.submit_time:
            raise ValueError(f"job {self.job_number}: deadline must follow submit_time")
        if not self.true_duration > 0:
            raise ValueError(f"job {self.job_number}: true_duration must be positive")


@dataclass
class Decision:
    verdict: str
    budget: float | None = None
    planned_node: str | None = None
    planned_start: float | None = None
    planned_slot: int | None = None


def safety_margin(recent_abs_pct_errors, confidence: float) -> float:
    """Nearest-rank empirical quantile: the ``ceil(confidence * n)``-th smallest.

    ``confidence * n`` is rounded to 9 decimals first so that e.g.
    ``0.9 * 10000`` selects rank 9000 despite binary floating point.
    """
    confidence = check_confidence(confidence)
    errs = sorted(float(e) for e in recent_abs_pct_errors)
    if not errs:
        raise ValueError("need at least one error value")
    n = len(errs)
    rank = min(max(math.ceil(round(confidence * n, 9)), 1), n)
    return errs[rank - 1]


@dataclass
class _Reservation:
    job: JobRequest
    start: float
    budget: float

    @property
    def end(self) -> float:
        return self.start + self.budget


class _Slot:
    __slots__ = ("index", "node_id", "running", "running_start", "running_budget",
                 "reservations", "last_end", "busy_time")

    def __init__(self, index, node_id):
        self.index = index
        self.node_id = node_id
        self.running: JobRequest | None = None
        self.running_start = 0.0
        self.running_budget = 0.0
        self.reservations: list[_Reservation] = []
        self.last_end = -math.inf
        self.busy_time = 0.0

    def busy_until(self, now: float) -> float:
        if self.running is None:
            return now
        # an overrunning job is assumed to finish imminently
        return max(self.running_start + self.running_budget, now)

    def effective(self, now: float, exclude: int | None = None) -> list[tuple[float, float, _Reservation]]:
        """Reservations pushed back behind the running job and each other."""
        out = []
        cursor = self.busy_until(now)
        for res in self.reservations:
            if exclude is not None and res.job.job_number == exclude:
                continue
            start = max(res.start, cursor)
            out.append((start, start + res.budget, res))
            cursor = start + res.budget
        return out

    def earliest_fit(self, budget: float, now: float) -> float:
        t = self.busy_until(now)
        for start, end, _ in self.effective(now):
            if t + budget <= start:
                return t
            t = max(t, end)
        return t


class ClusterState:
    """Mutable slot table: running jobs and reservations."""

    def __init__(self, spec: ClusterSpec):
        self.spec = spec
        self.slots = [_Slot(i, node) for i, (node, n) in enumerate(
            (node, n) for node, n in spec.nodes for _ in range(n))]
        self.reserved: dict[int, _Slot] = {}
        self.checks = 0

    def reserve(self, job: JobRequest, slot_index: int, start: float, budget: float) -> None:
        slot = self.slots[slot_index]
        slot.reservations.append(_Reservation(job, start, budget))
        slot.reservations.sort(key=lambda r: (r.start, r.job.job_number))
        self.reserved[job.job_number] = slot

    def release(self, job_number: int) -> None:
        slot = self.reserved.pop(job_number, None)
        if slot is not None:
            slot.reservations = [r for r in slot.reservations if r.job.job_number != job_number]

    def plan(self, budget: float, now: float) -> tuple[int, float]:
        """Earliest (slot, start) where ``budget`` fits; lowest slot wins ties."""
        best = None
        for slot in self.slots:
            t = slot.earliest_fit(budget, now)
            if best is None or t < best[1]:
                best = (slot.index, t)
        return best

    def next_other_reservation(self, slot: _Slot, job_number: int, now: float) -> float:
        eff = slot.effective(now, exclude=job_number)
        return eff[0][0] if eff else math.inf

    def start(self, job: JobRequest, slot: _Slot, now: float, budget: float) -> None:
        if slot.running is not None or now < slot.last_end:
            raise AssertionError(f"slot {slot.index} double-booked at t={now}")
        self.release(job.job_number)
        slot.running = job
        slot.running_start = now
        slot.running_budget = budget

    def finish(self, slot: _Slot, now: float) -> None:
        slot.busy_time += now - slot.running_start
        slot.last_end = now
        slot.running = None

    def check_invariants(self) -> None:
        """No slot runs two jobs; every slot's history is non-overlapping."""
        self.checks += 1
        running = [s.running.job_number for s in self.slots if s.running is not None]
        if len(running) != len(set(running)):
            raise AssertionError("a job is running on two slots")
        for s in self.slots:
            if s.running is not None and s.running_start < s.last_end:
                raise AssertionError(f"slot {s.index} overlaps its previous job")


def admit(job: JobRequest, forecast: Forecast | float | None, margin: float | None,
          cluster: ClusterState, now: float, unmodellable: bool = False) -> Decision:
    """Admission test; reserves the slot interval on acceptance.

    Jobs without a forecast or flagged ``unmodellable`` are routed to
    best-effort execution and get no reservation.
    """
    if unmodellable or forecast is None or margin is None:
        return Decision(UNMODELLABLE)
    point = forecast.point if isinstance(forecast, Forecast) else float(forecast)
    budget = max(1.0, point) * (1.0 + float(margin))
    slot_index, start = cluster.plan(budget, now)
    if start + budget > job.deadline:
        return Decision(REJECTED, budget)
    cluster.reserve(job, slot_index, start, budget)
    slot = cluster.slots[slot_index]
    return Decision(ACCEPTED, budget, slot.node_id, start, slot_index)


def dispatch(queue: Iterable[tuple[JobRequest, float | None]], cluster: ClusterState,
             now: float) -> list[tuple[int, int, float]]:
    """Start jobs on idle slots.

    ``queue`` holds ``(job, budget)`` pairs; ``budget=None`` marks best-effort
    work that only runs on slots without pending reservations. Returns
    ``(job_number, slot_index, start_time)`` for each job started.
    """
    waiting = sorted(queue, key=lambda jb: (
        jb[1] is None, jb[0].deadline if jb[1] is not None else math.inf, jb[0].job_number))
    started = []
    for slot in cluster.slots:
        if slot.running is not None:
            continue
        for i, (job, budget) in enumerate(waiting):
            if budget is None:
                ok = not slot.reservations
                run_budget = job.true_duration if ok else 0.0
            else:
                owner = cluster.reserved.get(job.job_number) is slot and \
                    slot.effective(now)[0][2].job.job_number == job.job_number
                ok = owner or now + budget <= cluster.next_other_reservation(slot, job.job_number, now)
                run_budget = budget
            if ok:
                cluster.start(job, slot, now, run_budget)
                started.append((job.job_number, slot.index, now))
                del waiting[i]
                break
    return started


@dataclass
class JobLog:
    job_number: int
    class_key: str
    verdict: str
    budget: float | None
    planned_start: float | None
    actual_start: float | None = None
    completion: float | None = None
    deadline: float = 0.0
    hit: bool | None = None
    slot: int | None = None


@dataclass
class SimReport:
    admitted: int = 0
    rejected: int = 0
    unmodellable: int = 0
    deadline_hits: int = 0
    deadline_misses: int = 0
    utilisation: float = 0.0
    makespan: float = 0.0
    invariant_checks: int = 0
    per_class: dict = field(default_factory=dict)
    jobs: list[JobLog] = field(default_factory=list, repr=False)

    @property
    def hit_rate(self) -> float:
        done = self.deadline_hits + self.deadline_misses
        return self.deadline_hits / done if done else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("jobs")
        rate = self.hit_rate
        d["hit_rate"] = None if math.isnan(rate) else rate
        return d


class ExactPredictor:
    """Predictor stub with a known duration and zero error margin."""

    def __init__(self, duration: float):
        self.duration = float(duration)

    def admission_budget(self, confidence):
        return self.duration, 0.0

    def observe(self, duration):
        pass


def run_simulation(requests: Iterable[JobRequest], cluster: ClusterSpec,
                   predictors: Mapping[str, object] | Callable[[str], object],
                   unmodellable: Iterable[str] = (), run_rejected: bool = True) -> SimReport:
    """Replay ``requests`` (sorted by submit time) through the scheduler.

    ``predictors`` maps a class key to an object with
    ``admission_budget(confidence) -> (forecast_point, margin) | None`` and
    ``observe(duration)``; completions are fed back through ``observe``.
    Same-time events are processed completions first, then starts, then
    submissions, each in job-number order.

    With ``run_rejected`` a rejected job still runs best-effort, without a
    deadline guarantee. Its completion keeps feeding the class predictor;
    otherwise one wild forecast can reject every later job of the class and
    the predictor never sees another observation.
    """
    get_pred = predictors if callable(predictors) else predictors.__getitem__
    pred_cache: dict[str, object] = {}
    unmodellable = set(unmodellable)
    state = ClusterState(cluster)
    report = SimReport()
    events: list = []
    seq = 0
    for req in requests:
        heapq.heappush(events, (req.submit_time, _SUBMIT, req.job_number, seq, req))
        seq += 1

    queue: dict[int, tuple[JobRequest, float | None]] = {}
    logs: dict[int, JobLog] = {}
    running_slot: dict[int, _Slot] = {}
    first_submit = None
    last_end = None

    def predictor(key):
        if key not in pred_cache:
            pred_cache[key] = get_pred(key)
        return pred_cache[key]

    def class_stats(key):
        return report.per_class.setdefault(key, {
            "admitted": 0, "rejected": 0, "unmodellable": 0, "hits": 0, "misses": 0})

    def do_dispatch(now):
        nonlocal seq
        for job_number, slot_index, t in dispatch(queue.values(), state, now):
            job, _ = queue.pop(job_number)
            slot = state.slots[slot_index]
            running_slot[job_number] = slot
            logs[job_number].actual_start = t
            logs[job_number].slot = slot_index
            heapq.heappush(events, (t + job.true_duration, _COMPLETE, job_number, seq, job))
            seq += 1

    while events:
        now = events[0][0]
        batch = []
        while events and events[0][0] == now:
            batch.append(heapq.heappop(events))
        batch.sort(key=lambda e: (e[1], e[2]))
        completions = [e[4] for e in batch if e[1] == _COMPLETE]
        submits = [e[4] for e in batch if e[1] == _SUBMIT]

        for job in completions:
            slot = running_slot.pop(job.job_number)
            state.finish(slot, now)
            last_end = now if last_end is None else max(last_end, now)
            rec = logs[job.job_number]
            rec.completion = now
            if rec.verdict == ACCEPTED:
                rec.hit = now <= job.deadline
                stats = class_stats(job.class_key)
                if rec.hit:
                    report.deadline_hits += 1
                    stats["hits"] += 1
                else:
                    report.deadline_misses += 1
                    stats["misses"] += 1
            if job.class_key not in unmodellable:
                predictor(job.class_key).observe(job.true_duration)
        state.check_invariants()
        do_dispatch(now)

        for job in submits:
            if first_submit is None:
                first_submit = now
            is_unmod = job.class_key in unmodellable
            point = margin = None
            if not is_unmod:
                got = predictor(job.class_key).admission_budget(job.requested_confidence)
                if got is not None:
                    point, margin = got
            decision = admit(job, point, margin, state, now, is_unmod)
            logs[job.job_number] = JobLog(job.job_number, job.class_key, decision.verdict,
                                          decision.budget, decision.planned_start,
                                          deadline=job.deadline)
            stats = class_stats(job.class_key)
            if decision.verdict == ACCEPTED:
                report.admitted += 1
                stats["admitted"] += 1
                queue[job.job_number] = (job, decision.budget)
            elif decision.verdict == REJECTED:
                report.rejected += 1
                stats["rejected"] += 1
                if run_rejected:
                    queue[job.job_number] = (job, None)
            else:
                report.unmodellable += 1
                stats["unmodellable"] += 1
                queue[job.job_number] = (job, None)
        if submits:
            do_dispatch(now)
        state.check_invariants()

    if queue:
        raise AssertionError(f"{len(queue)} jobs never started")
    busy = sum(s.busy_time for s in state.slots)
    if first_submit is not None and last_end is not None and last_end > first_submit:
        report.makespan = last_end - first_submit
        report.utilisation = busy / (cluster.total_slots * report.makespan)
    report.invariant_checks = state.checks
    report.jobs = [logs[k] for k in sorted(logs)]
    return report
