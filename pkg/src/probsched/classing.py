"""Meta-data job classing.

Jobs are grouped by a key built from submitter group, owner, submit host and
an office-hours tag so that each class is a narrower statistical stream than
the raw cluster workload.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable

from .trace import JobRecord, wallclock_or_none

OFFICE = "office"
OFFHOURS = "offhours"

_FLAG_NAMES = {"group": "use_group", "owner": "use_owner", "host": "use_submit_host",
               "win": "use_time_window", "window": "use_time_window"}


@dataclass(frozen=True)
class ClassKeySpec:
    use_group: bool = True
    use_owner: bool = False
    use_submit_host: bool = False
    use_time_window: bool = False
    office_hours: tuple[int, int] = (9, 18)
    utc_offset_minutes: int = 0

    def __post_init__(self):
        start, end = self.office_hours
        if not 0 <= start < end <= 24:
            raise ValueError(f"office_hours must satisfy 0 <= start < end <= 24, got {self.office_hours}")
        if not (self.use_group or self.use_owner or self.use_submit_host or self.use_time_window):
            raise ValueError("at least one key component must be enabled")

    @classmethod
    def parse(cls, text: str, **kwargs) -> "ClassKeySpec":
        """Build a spec from a comma list such as ``"group,owner,win"``."""
        flags = dict.fromkeys(("use_group", "use_owner", "use_submit_host", "use_time_window"), False)
        for token in filter(None, (t.strip().lower() for t in text.split(","))):
            if token not in _FLAG_NAMES:
                raise ValueError(f"unknown class key component {token!r}")
            flags[_FLAG_NAMES[token]] = True
        return cls(**flags, **kwargs)

    def to_dict(self) -> dict:
        return {"use_group": self.use_group, "use_owner": self.use_owner,
                "use_submit_host": self.use_submit_host,
                "use_time_window": self.use_time_window,
                "office_hours": list(self.office_hours),
                "utc_offset_minutes": self.utc_offset_minutes}


@dataclass(frozen=True, order=True)
class ClassKey:
    group: str | None = None
    owner: str | None = None
    submit_host: str | None = None
    window_tag: str | None = None

    def __str__(self) -> str:
        parts = []
        for label, value in (("group", self.group), ("owner", self.owner),
                             ("host", self.submit_host), ("win", self.window_tag)):
            if value is not None:
                parts.append(f"{label}={value}")
        return "|".join(parts)

    @classmethod
    def parse(cls, text: str) -> "ClassKey":
        fields = {"group": None, "owner": None, "host": None, "win": None}
        for part in filter(None, text.split("|")):
            label, _, value = part.partition("=")
            if label not in fields:
                raise ValueError(f"unknown class key field {label!r}")
            fields[label] = value
        return cls(fields["group"], fields["owner"], fields["host"], fields["win"])

    def slug(self) -> str:
        """File-name safe form of the canonical text."""
        text = str(self) or "all"
        return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in text.replace("|", "__"))


@dataclass
class JobClass:
    key: ClassKey
    observations: list[tuple[int, float, int]] = field(default_factory=list)
    min_class_size: int = 20

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def durations(self) -> list[float]:
        return [d for _, d, _ in self.observations]

    @property
    def unmodellable(self) -> bool:
        return len(self.observations) < self.min_class_size


def time_window_tag(t: int, spec: ClassKeySpec) -> str:
    """``office`` on local weekdays within ``[start_hour, end_hour)``, else ``offhours``."""
    local = datetime.fromtimestamp(t, tz=timezone.utc) + timedelta(minutes=spec.utc_offset_minutes)
    start, end = spec.office_hours
    if local.weekday() < 5 and start <= local.hour < end:
        return OFFICE
    return OFFHOURS


def make_class_key(r: JobRecord, spec: ClassKeySpec) -> ClassKey:
    # Grid Engine records the execution host, not the submit host; the
    # exec_host field is the closest proxy available in the accounting file.
    return ClassKey(
        group=r.group if spec.use_group else None,
        owner=r.owner if spec.use_owner else None,
        submit_host=r.exec_host if spec.use_submit_host else None,
        window_tag=time_window_tag(r.submit_time, spec) if spec.use_time_window else None,
    )


def partition(records: Iterable[JobRecord], spec: ClassKeySpec,
              min_class_size: int = 20) -> dict[ClassKey, JobClass]:
    """Group usable records into classes.

    Failed, inconsistent and zero-duration records are left out. The returned
    mapping is ordered by the canonical key text so the result does not depend
    on input iteration order beyond the within-class observation order.
    """
    classes: dict[ClassKey, JobClass] = {}
    for r in records:
        duration = wallclock_or_none(r)
        if duration is None or duration <= 0:
            continue
        key = make_class_key(r, spec)
        cls = classes.get(key)
        if cls is None:
            cls = classes[key] = JobClass(key, min_class_size=min_class_size)
        cls.observations.append((r.end_time, float(duration), r.job_number))
    return {k: classes[k] for k in sorted(classes, key=str)}
