"""Sun Grid Engine accounting file ingestion.

The accounting file is colon-delimited with one finished job per line. Only
the leading 14 fields are interpreted; trailing fields vary between Grid
Engine releases and are ignored.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .exceptions import (
    ExcludedRecordError,
    InvalidRecordError,
    MalformedLineError,
    TraceRejectedError,
)

log = logging.getLogger(__name__)

# Positional layout of the classic SGE accounting(5) record.
ACCOUNTING_FIELDS = (
    "qname", "hostname", "group", "owner", "job_name", "job_number",
    "account", "priority", "submission_time", "start_time", "end_time",
    "failed", "exit_status", "ru_wallclock",
)
MIN_FIELDS = len(ACCOUNTING_FIELDS)


@dataclass(frozen=True)
class JobRecord:
    queue_name: str
    exec_host: str
    group: str
    owner: str
    job_name: str
    job_number: int
    submit_time: int
    start_time: int
    end_time: int
    failed_code: int = 0
    exit_status: int = 0
    ru_wallclock: int = 0

    @property
    def failed(self) -> bool:
        return self.failed_code != 0

    @property
    def is_ordered(self) -> bool:
        return self.submit_time <= self.start_time <= self.end_time


@dataclass(frozen=True)
class TraceLoadOptions:
    min_duration_filter: float = 10.0
    drop_failed: bool = True
    max_malformed_fraction: float = 0.05

    def __post_init__(self):
        if self.min_duration_filter < 0:
            raise ValueError("min_duration_filter must be >= 0")
        if not 0.0 <= self.max_malformed_fraction <= 1.0:
            raise ValueError("max_malformed_fraction must lie in [0, 1]")


@dataclass
class IngestStats:
    """Per-trace counters.

    ``parsed + malformed + invalid + duplicate + failed + filtered_short``
    equals the number of non-comment, non-blank input lines. ``skipped``
    counts comments and blank lines.
    """

    parsed: int = 0
    skipped: int = 0
    malformed: int = 0
    invalid: int = 0
    duplicate: int = 0
    failed: int = 0
    filtered_short: int = 0
    malformed_lines: list[int] = field(default_factory=list, repr=False)

    @property
    def data_lines(self) -> int:
        return (self.parsed + self.malformed + self.invalid + self.duplicate
                + self.failed + self.filtered_short)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("malformed_lines")
        d["data_lines"] = self.data_lines
        return d


def _as_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    # some exporters write integral floats such as "300.0"
    try:
        value = float(text)
    except ValueError:
        raise MalformedLineError(f"field {name!r} is not numeric: {text!r}") from None
    if not value.is_integer():
        raise MalformedLineError(f"field {name!r} is not integral: {text!r}")
    return int(value)


def parse_accounting_line(line: str) -> JobRecord | None:
    """Parse one accounting line.

    Returns ``None`` for comment and blank lines. Raises
    :class:`MalformedLineError` when the line is short or a numeric field
    does not parse.
    """
    line = line.rstrip("\r\n")
    if line.startswith("#") or not line.strip():
        return None
    parts = line.split(":")
    if len(parts) < MIN_FIELDS:
        raise MalformedLineError(
            f"expected at least {MIN_FIELDS} fields, got {len(parts)}")
    job_number = _as_int(parts[5], "job_number")
    if job_number <= 0:
        raise MalformedLineError(f"job_number must be positive, got {job_number}")
    ru_wallclock = _as_int(parts[13], "ru_wallclock")
    if ru_wallclock < 0:
        raise MalformedLineError(f"ru_wallclock must be >= 0, got {ru_wallclock}")
    return JobRecord(
        queue_name=parts[0],
        exec_host=parts[1],
        group=parts[2],
        owner=parts[3],
        job_name=parts[4],
        job_number=job_number,
        submit_time=_as_int(parts[8], "submission_time"),
        start_time=_as_int(parts[9], "start_time"),
        end_time=_as_int(parts[10], "end_time"),
        failed_code=_as_int(parts[11], "failed"),
        exit_status=_as_int(parts[12], "exit_status"),
        ru_wallclock=ru_wallclock,
    )


def format_accounting_line(record: JobRecord, account: str = "sge",
                           priority: int = 0) -> str:
    """Serialise ``record`` into the 14-field accounting layout (no newline)."""
    text_fields = (record.queue_name, record.exec_host, record.group,
                   record.owner, record.job_name, account)
    for value in text_fields:
        if ":" in value or "\n" in value:
            raise ValueError(f"text field {value!r} cannot contain ':' or newlines")
    return ":".join(str(v) for v in (
        record.queue_name, record.exec_host, record.group, record.owner,
        record.job_name, record.job_number, account, priority,
        record.submit_time, record.start_time, record.end_time,
        record.failed_code, record.exit_status, record.ru_wallclock,
    ))


def derive_wallclock(record: JobRecord) -> int:
    """Wall-clock duration in seconds.

    ``ru_wallclock`` wins when positive, otherwise ``end_time - start_time``.
    """
    if record.end_time < record.start_time:
        raise InvalidRecordError(
            f"job {record.job_number}: end_time {record.end_time} precedes "
            f"start_time {record.start_time}")
    if record.failed:
        raise ExcludedRecordError(
            f"job {record.job_number} failed with code {record.failed_code}")
    if record.ru_wallclock > 0:
        return record.ru_wallclock
    return record.end_time - record.start_time


def wallclock_or_none(record: JobRecord) -> int | None:
    """Duration for usable records, ``None`` for failed or inconsistent ones."""
    try:
        return derive_wallclock(record)
    except (InvalidRecordError, ExcludedRecordError):
        return None


def load_trace(source: Iterable[str], opts: TraceLoadOptions | None = None
               ) -> tuple[list[JobRecord], IngestStats]:
    """Read an accounting stream into records sorted by completion.

    Records are ordered by ``(end_time, job_number)``. Failed jobs are
    counted and dropped unless ``opts.drop_failed`` is false, in which case
    they are kept (the job classing step still excludes them).

    Raises
    ------
    TraceRejectedError
        If the malformed fraction of data lines exceeds
        ``opts.max_malformed_fraction``.
    """
    opts = opts or TraceLoadOptions()
    stats = IngestStats()
    records: list[JobRecord] = []
    seen: set[int] = set()
    for lineno, line in enumerate(source, start=1):
        try:
            rec = parse_accounting_line(line)
        except MalformedLineError as exc:
            stats.malformed += 1
            stats.malformed_lines.append(lineno)
            log.debug("line %d malformed: %s", lineno, exc)
            continue
        if rec is None:
            stats.skipped += 1
            continue
        if rec.job_number in seen:
            stats.duplicate += 1
            continue
        seen.add(rec.job_number)
        if not rec.is_ordered:
            stats.invalid += 1
            continue
        if rec.failed:
            if opts.drop_failed:
                stats.failed += 1
                continue
            stats.parsed += 1
            records.append(rec)
            continue
        if derive_wallclock(rec) < opts.min_duration_filter:
            stats.filtered_short += 1
            continue
        stats.parsed += 1
        records.append(rec)

    total = stats.data_lines
    if total and stats.malformed / total > opts.max_malformed_fraction:
        raise TraceRejectedError(
            f"{stats.malformed} of {total} lines malformed "
            f"(limit {opts.max_malformed_fraction:.1%})")
    records.sort(key=lambda r: (r.end_time, r.job_number))
    return records, stats


def read_trace(path, opts: TraceLoadOptions | None = None):
    with open(path, encoding="utf-8") as fh:
        return load_trace(fh, opts)
