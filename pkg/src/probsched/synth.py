"""Synthetic job-duration series and mixed accounting workloads.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``. A single class series uses ``SeedSequence(spec.seed)``; in a
workload, class ``i`` (0-based, in the order given) draws from
``SeedSequence([mix.seed, i + 1, class_spec.seed])`` and the record-level
draws (tail assignment, tail durations) from ``SeedSequence([mix.seed, 0])``.
The generator id written to trace headers pins this scheme.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, TextIO

import numpy as np
from scipy.special import ndtr

from .classing import ClassKey
from .trace import JobRecord, format_accounting_line

GENERATOR_ID = "probsched-synth/1 numpy-PCG64 SeedSequence"
LOGNORMAL = "lognormal"
AR1 = "ar1"


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


@dataclass(frozen=True)
class ClassGenSpec:
    """One job class: ``base_level * exp(noise)`` with exponential interarrivals.

    ``noise="lognormal"`` draws i.i.d. N(0, sigma_log^2) log-deviations;
    ``noise="ar1"`` uses a stationary AR(1) ``x_t = phi x_{t-1} + sigma e_t``.
    """

    base_level: float = 600.0
    noise: str = LOGNORMAL
    sigma_log: float = 0.2
    phi: float = 0.0
    sigma: float = 0.2
    n_jobs: int = 1000
    interarrival_mean: float = 600.0
    seed: int = 0
    start_time: float = 1_000_000_000.0

    def __post_init__(self):
        if not self.base_level > 0:
            raise ValueError("base_level must be positive")
        if self.noise not in (LOGNORMAL, AR1):
            raise ValueError(f"noise must be {LOGNORMAL!r} or {AR1!r}")
        if not self.sigma_log > 0 or not self.sigma > 0:
            raise ValueError("sigma_log and sigma must be positive")
        if not abs(self.phi) < 1:
            raise ValueError("need |phi| < 1")
        if self.n_jobs < 0 or not self.interarrival_mean > 0:
            raise ValueError("n_jobs must be >= 0 and interarrival_mean > 0")


def _log_deviations(spec: ClassGenSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.n_jobs
    z = rng.standard_normal(n)
    if spec.noise == LOGNORMAL:
        return spec.sigma_log * z
    x = np.empty(n)
    if n:
        x[0] = spec.sigma / math.sqrt(1.0 - spec.phi ** 2) * z[0]
        for i in range(1, n):
            x[i] = spec.phi * x[i - 1] + spec.sigma * z[i]
    return x


def _stationary_sd(spec: ClassGenSpec) -> float:
    if spec.noise == LOGNORMAL:
        return spec.sigma_log
    return spec.sigma / math.sqrt(1.0 - spec.phi ** 2)


def gen_class_series(spec: ClassGenSpec, rng: np.random.Generator | None = None
                     ) -> list[tuple[float, float]]:
    """``(submit_time, duration)`` pairs, fully determined by the seed."""
    rng = rng if rng is not None else _rng(spec.seed)
    gaps = rng.exponential(spec.interarrival_mean, spec.n_jobs)
    dev = _log_deviations(spec, rng)
    submit = spec.start_time + np.cumsum(gaps)
    dur = spec.base_level * np.exp(dev)
    return list(zip(submit.tolist(), dur.tolist()))


def inject_mode_change(series, at: int, factor: float):
    """Multiply durations at positions ``>= at`` by ``factor``.

    Accepts plain durations or ``(submit_time, duration)`` pairs and returns
    the same shape.
    """
    items = list(series)
    if not 0 <= at < len(items):
        raise ValueError(f"at={at} outside [0, {len(items)})")
    if not factor > 0:
        raise ValueError("factor must be positive")
    out = []
    for i, item in enumerate(items):
        scale = factor if i >= at else 1.0
        if isinstance(item, tuple):
            out.append((item[0], item[1] * scale))
        else:
            out.append(item * scale)
    return out


@dataclass(frozen=True)
class WorkloadMixSpec:
    """A multi-class accounting workload.

    Bulk durations are log-uniform on ``duration_bounds``; each class owns a
    contiguous slice of that log range (ordered by ``base_level``, width
    proportional to ``n_jobs``) and fills it through a Gaussian copula of its
    noise process, so its own series keeps its autocorrelation. A
    ``short_fail_fraction`` of records last 1-9 s (half of them marked failed)
    and a ``long_fraction`` run log-uniformly between ``long_threshold`` and
    ten times that.
    """

    classes: tuple = ()
    short_fail_fraction: float = 0.04
    long_fraction: float = 0.025
    long_threshold: float = 1e5
    duration_bounds: tuple[float, float] = (50.0, 5000.0)
    seed: int = 0

    def __post_init__(self):
        classes = tuple((k if isinstance(k, ClassKey) else ClassKey.parse(str(k)), c)
                        for k, c in self.classes)
        object.__setattr__(self, "classes", classes)
        if not classes:
            raise ValueError("need at least one class")
        if len({k for k, _ in classes}) != len(classes):
            raise ValueError("class keys must be distinct")
        if min(self.short_fail_fraction, self.long_fraction) < 0 or \
                self.short_fail_fraction + self.long_fraction >= 1:
            raise ValueError("tail fractions must be >= 0 and sum to < 1")
        lo, hi = self.duration_bounds
        if not 10 <= lo < hi:
            raise ValueError("duration_bounds need 10 <= lo < hi")
        if not self.long_threshold > hi:
            raise ValueError("long_threshold must exceed the bulk upper bound")

    @property
    def n_jobs(self) -> int:
        return sum(c.n_jobs for _, c in self.classes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = [{"key": str(k), **asdict(c)} for k, c in self.classes]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadMixSpec":
        d = dict(d)
        classes = []
        for c in d.pop("classes", []):
            c = dict(c)
            key = ClassKey.parse(c.pop("key"))
            classes.append((key, ClassGenSpec(**c)))
        if "duration_bounds" in d:
            d["duration_bounds"] = tuple(d["duration_bounds"])
        return cls(classes=tuple(classes), **d)


def default_mix(n_jobs: int = 50_000, n_classes: int = 8, seed: int = 0,
                interarrival_mean: float = 600.0, **kwargs) -> WorkloadMixSpec:
    """Evenly sized classes with alternating i.i.d. and autocorrelated noise."""
    per = [n_jobs // n_classes + (1 if i < n_jobs % n_classes else 0) for i in range(n_classes)]
    classes = []
    for i, n in enumerate(per):
        key = ClassKey(group=f"grp{i % 4}", owner=f"user{i:02d}", submit_host=f"node{i % 3:02d}")
        noise = dict(noise=AR1, phi=0.6, sigma=0.25) if i % 2 else dict(noise=LOGNORMAL)
        classes.append((key, ClassGenSpec(base_level=100.0 * 2 ** i, n_jobs=n,
                                          interarrival_mean=interarrival_mean * n_classes,
                                          seed=i, **noise)))
    return WorkloadMixSpec(classes=tuple(classes), seed=seed, **kwargs)


def _class_slices(mix: WorkloadMixSpec) -> list[tuple[float, float]]:
    lo, hi = (math.log(b) for b in mix.duration_bounds)
    total = max(mix.n_jobs, 1)
    order = sorted(range(len(mix.classes)), key=lambda i: (mix.classes[i][1].base_level, i))
    slices = [None] * len(mix.classes)
    cursor = lo
    for i in order:
        width = (hi - lo) * mix.classes[i][1].n_jobs / total
        slices[i] = (cursor, cursor + width)
        cursor += width
    return slices


def gen_workload(mix: WorkloadMixSpec) -> list[JobRecord]:
    """Accounting records sorted by submit time, numbered from 1."""
    rows = []
    for i, ((key, spec), (a, b)) in enumerate(zip(mix.classes, _class_slices(mix))):
        rng = _rng(mix.seed, i + 1, spec.seed)
        gaps = rng.exponential(spec.interarrival_mean, spec.n_jobs)
        u = ndtr(_log_deviations(spec, rng) / _stationary_sd(spec))
        submit = np.floor(spec.start_time + np.cumsum(gaps)).astype(np.int64)
        dur = np.exp(a + u * (b - a))
        rows.extend((int(t), i, j, float(d)) for j, (t, d) in enumerate(zip(submit, dur)))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    rng = _rng(mix.seed, 0)
    n = len(rows)
    pick = rng.random(n)
    short_dur = rng.integers(1, 10, n)
    short_failed = rng.random(n) < 0.5
    long_dur = mix.long_threshold * 10.0 ** rng.random(n)
    records = []
    for idx, (t, ci, j, d) in enumerate(rows):
        key = mix.classes[ci][0]
        failed = 0
        if pick[idx] < mix.short_fail_fraction:
            dur = int(short_dur[idx])
            failed = int(short_failed[idx])
        elif pick[idx] < mix.short_fail_fraction + mix.long_fraction:
            dur = int(math.ceil(long_dur[idx]))
        else:
            dur = max(1, int(round(d)))
        records.append(JobRecord(
            queue_name="all.q",
            exec_host=key.submit_host or "node00",
            group=key.group or "users",
            owner=key.owner or "user",
            job_name=f"c{ci}j{j}",
            job_number=idx + 1,
            submit_time=t,
            start_time=t,
            end_time=t + dur,
            failed_code=failed,
            exit_status=failed,
            ru_wallclock=dur,
        ))
    return records


def trace_header(mix: WorkloadMixSpec) -> str:
    spec = json.dumps(mix.to_dict(), sort_keys=True, separators=(",", ":"))
    return f"# generator={GENERATOR_ID} spec={spec}"


def write_workload(records: Iterable[JobRecord], mix: WorkloadMixSpec, out: TextIO) -> None:
    out.write(trace_header(mix) + "\n")
    for r in records:
        out.write(format_accounting_line(r) + "\n")


def durations(records: Iterable[JobRecord]) -> np.ndarray:
    return np.array([r.ru_wallclock for r in records], dtype=float)
