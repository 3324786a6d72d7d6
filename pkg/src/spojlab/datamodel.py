"""Typed Online Judge entities (logs, problems, tests, users, scores).

A :class:`CohortDataset` is the normalized, validated collection of one
course offering. Its on-disk form is a directory::

    manifest.json   label, tz, counts, time range, content digest
    logs.jsonl      one LogRecord per line, sorted by (in_time, id)
    problems.json   tests.json   users.json   scores.json

All timestamps are timezone-aware UTC datetimes truncated to the second.
Day boundaries are computed in the dataset's local offset (UTC+8 default).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional

DEFAULT_TZ_OFFSET_HOURS = 8.0

VERDICT_KINDS = (
    "Accepted",
    "WrongAnswer",
    "TimeLimitExceeded",
    "MemoryLimitExceeded",
    "RuntimeError",
    "CompileError",
    "PresentationError",
    "Pending",
    "Other",
)
_OTHER_PREFIX = "Other:"

EMPTY_CODE_HASH = hashlib.sha256(b"").hexdigest()

DATASET_FILES = ("logs.jsonl", "problems.json", "tests.json", "users.json", "scores.json")


@dataclass(frozen=True, order=True)
class Verdict:
    """Judge result. ``raw`` is only set (and always set) for ``Other``."""

    kind: str
    raw: Optional[str] = None

    def __post_init__(self):
        if self.kind not in VERDICT_KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")
        if (self.kind == "Other") != (self.raw is not None):
            raise ValueError("raw text is carried by Other verdicts only")

    @classmethod
    def other(cls, raw: str) -> "Verdict":
        return cls("Other", raw)

    @property
    def accepted(self) -> bool:
        return self.kind == "Accepted"

    def to_text(self) -> str:
        return f"{_OTHER_PREFIX}{self.raw}" if self.kind == "Other" else self.kind

    @classmethod
    def from_text(cls, text: str) -> "Verdict":
        if text.startswith(_OTHER_PREFIX):
            return cls.other(text[len(_OTHER_PREFIX):])
        if text in VERDICT_KINDS and text != "Other":
            return cls(text)
        return cls.other(text)

    def __str__(self) -> str:
        return f"Other({self.raw})" if self.kind == "Other" else self.kind


ACCEPTED = Verdict("Accepted")


@dataclass(frozen=True)
class LogRecord:
    id: int
    problem_id: str
    test_id: str
    user_id: str
    in_time: datetime
    language: str
    verdict: Verdict
    time_ms: int
    memory_kb: int
    code_length: int
    code_hash: str
    ip: Optional[str] = None
    location: Optional[str] = None

    @property
    def sort_key(self) -> tuple[datetime, int]:
        return (self.in_time, self.id)


@dataclass(frozen=True)
class TestWindow:
    id: str
    title: str
    start: datetime
    end: datetime

    __test__ = False  # not a pytest class

    def contains(self, t: datetime) -> bool:
        return self.start <= t <= self.end


@dataclass(frozen=True)
class ProblemMeta:
    id: str
    title: str
    test_id: str
    release_rank: int


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    username: str
    roster_no: Optional[str] = None

    @property
    def rostered(self) -> bool:
        return self.roster_no is not None


@dataclass(frozen=True)
class ExamScores:
    user_id: str
    msc: float
    wsc: float


@dataclass(frozen=True)
class CohortDataset:
    label: str
    logs: tuple[LogRecord, ...]
    problems: tuple[ProblemMeta, ...]
    tests: tuple[TestWindow, ...]
    users: tuple[UserRecord, ...]
    scores: tuple[ExamScores, ...]
    semester_start: Optional[datetime]
    tz_offset_hours: float = DEFAULT_TZ_OFFSET_HOURS

    @property
    def tz(self) -> timezone:
        return timezone(timedelta(hours=self.tz_offset_hours))

    def local_date(self, t: datetime) -> date:
        return t.astimezone(self.tz).date()

    def test_by_id(self) -> dict[str, TestWindow]:
        return {t.id: t for t in self.tests}

    def problem_by_id(self) -> dict[str, ProblemMeta]:
        return {p.id: p for p in self.problems}

    def user_ids(self) -> list[str]:
        return [u.user_id for u in self.users]

    def logs_by_user(self) -> dict[str, list[LogRecord]]:
        grouped: dict[str, list[LogRecord]] = {u.user_id: [] for u in self.users}
        for log in self.logs:
            grouped.setdefault(log.user_id, []).append(log)
        return grouped


# -- ordering ---------------------------------------------------------------

_DIGITS = re.compile(r"(\d+)")


def natural_key(text: str) -> tuple:
    """Sort key that orders 'P2' before 'P10' and '999' before '1000'."""
    parts = _DIGITS.split(text)
    return tuple((0, int(p), p) if p.isdigit() else (1, 0, p) for p in parts if p != "")


def truncate_to_second(t: datetime) -> datetime:
    if t.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    return t.astimezone(timezone.utc).replace(microsecond=0)


def assign_release_ranks(
    problems: Iterable[ProblemMeta], tests: Iterable[TestWindow]
) -> list[ProblemMeta]:
    """Rank problems by (test start, problem id); ranks start at 0."""
    starts = {t.id: t.start for t in tests}
    far_future = datetime.max.replace(tzinfo=timezone.utc)
    ordered = sorted(
        problems, key=lambda p: (starts.get(p.test_id, far_future), natural_key(p.id))
    )
    return [ProblemMeta(p.id, p.title, p.test_id, rank) for rank, p in enumerate(ordered)]


def normalize(
    label: str,
    logs: Iterable[LogRecord],
    problems: Iterable[ProblemMeta],
    tests: Iterable[TestWindow],
    users: Iterable[UserRecord],
    scores: Iterable[ExamScores],
    tz_offset_hours: float = DEFAULT_TZ_OFFSET_HOURS,
) -> CohortDataset:
    """Canonical ordering plus derived fields (release_rank, semester_start).

    Does not validate; see :func:`validate`.
    """
    tests = sorted(tests, key=lambda t: (t.start, natural_key(t.id)))
    problems = assign_release_ranks(problems, tests)
    logs = sorted(logs, key=lambda lg: lg.sort_key)
    users = sorted(users, key=lambda u: natural_key(u.user_id))
    scores = sorted(scores, key=lambda s: natural_key(s.user_id))
    semester_start = min((t.start for t in tests), default=None)
    return CohortDataset(
        label=label,
        logs=tuple(logs),
        problems=tuple(problems),
        tests=tuple(tests),
        users=tuple(users),
        scores=tuple(scores),
        semester_start=semester_start,
        tz_offset_hours=tz_offset_hours,
    )


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    rule: str
    entity: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:  # truthy when there is something to report
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def by_rule(self, rule: str) -> list[Violation]:
        return [v for v in self.violations if v.rule == rule]


def validate(dataset: CohortDataset) -> ValidationReport:
    """Check every CohortDataset invariant and report all violations."""
    out: list[Violation] = []

    def bad(rule: str, entity: str, detail: str) -> None:
        out.append(Violation(rule, entity, detail))

    for kind, ids in (
        ("test", [t.id for t in dataset.tests]),
        ("problem", [p.id for p in dataset.problems]),
        ("user", [u.user_id for u in dataset.users]),
        ("score", [s.user_id for s in dataset.scores]),
    ):
        seen: set[str] = set()
        for i in ids:
            if i in seen:
                bad("duplicate-id", f"{kind}:{i}", f"{kind} id appears more than once")
            seen.add(i)

    tests = dataset.test_by_id()
    problems = dataset.problem_by_id()
    users = {u.user_id for u in dataset.users}

    for t in dataset.tests:
        if t.start.tzinfo is None or t.end.tzinfo is None:
            bad("naive-time", f"test:{t.id}", "test window times must be timezone-aware")
        elif not t.start < t.end:
            bad("window-order", f"test:{t.id}", "test start must precede end")

    expected_start = min((t.start for t in dataset.tests), default=None)
    if dataset.semester_start != expected_start:
        bad("semester-start", "dataset", f"semester_start should be {expected_start}")

    for p in dataset.problems:
        if p.test_id not in tests:
            bad("ref-integrity", f"problem:{p.id}", f"unknown test_id {p.test_id!r}")
        if p.release_rank < 0:
            bad("release-rank", f"problem:{p.id}", "negative release_rank")
    expected_ranks = {p.id: p.release_rank for p in assign_release_ranks(dataset.problems, dataset.tests)}
    for p in dataset.problems:
        if expected_ranks.get(p.id) != p.release_rank:
            bad("release-rank", f"problem:{p.id}", "release_rank inconsistent with (test start, problem id)")

    for s in dataset.scores:
        if s.user_id not in users:
            bad("ref-integrity", f"score:{s.user_id}", "scores for unknown user")
        for name, value in (("msc", s.msc), ("wsc", s.wsc)):
            if not 0.0 <= value <= 100.0:
                bad("score-range", f"score:{s.user_id}", f"{name}={value} outside [0, 100]")

    seen_logs: set[int] = set()
    prev = None
    for log in dataset.logs:
        ent = f"log:{log.id}"
        if log.id in seen_logs:
            bad("duplicate-id", ent, "log id appears more than once")
        seen_logs.add(log.id)
        if log.id <= 0:
            bad("log-field", ent, "id must be positive")
        if log.in_time.tzinfo is None:
            bad("naive-time", ent, "in_time must be timezone-aware")
        else:
            if log.in_time.microsecond:
                bad("time-precision", ent, "in_time must have second precision")
            if prev is not None and prev.in_time.tzinfo is not None and not prev.sort_key < log.sort_key:
                bad("log-order", ent, f"not strictly after log {prev.id} in (in_time, id) order")
        prev = log
        if log.user_id not in users:
            bad("ref-integrity", ent, f"unknown user_id {log.user_id!r}")
        if log.test_id not in tests:
            bad("ref-integrity", ent, f"unknown test_id {log.test_id!r}")
        prob = problems.get(log.problem_id)
        if prob is None:
            bad("ref-integrity", ent, f"unknown problem_id {log.problem_id!r}")
        elif prob.test_id != log.test_id:
            bad("ref-integrity", ent, f"problem {prob.id} belongs to test {prob.test_id}, not {log.test_id}")
        for name in ("time_ms", "memory_kb", "code_length"):
            if getattr(log, name) < 0:
                bad("log-field", ent, f"{name} must be non-negative")
        if not re.fullmatch(r"[0-9a-f]{64}", log.code_hash):
            bad("log-field", ent, "code_hash must be a 64-digit hex sha256")
    return ValidationReport(tuple(out))


# -- serialization ----------------------------------------------------------


def format_time(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_time(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    t = datetime.fromisoformat(text)
    if t.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no offset")
    return truncate_to_second(t)


def log_to_dict(log: LogRecord) -> dict:
    return {
        "id": log.id,
        "problem_id": log.problem_id,
        "test_id": log.test_id,
        "user_id": log.user_id,
        "in_time": format_time(log.in_time),
        "language": log.language,
        "verdict": log.verdict.to_text(),
        "time_ms": log.time_ms,
        "memory_kb": log.memory_kb,
        "code_length": log.code_length,
        "code_hash": log.code_hash,
        "ip": log.ip,
        "location": log.location,
    }


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=1) + "\n"


def serialize(dataset: CohortDataset) -> dict[str, bytes]:
    """Byte-deterministic file contents keyed by file name (manifest included)."""
    files: dict[str, str] = {
        "logs.jsonl": "".join(
            json.dumps(log_to_dict(lg), ensure_ascii=False, separators=(",", ":")) + "\n"
            for lg in dataset.logs
        ),
        "problems.json": _dump(
            [{"id": p.id, "title": p.title, "test_id": p.test_id, "release_rank": p.release_rank}
             for p in dataset.problems]
        ),
        "tests.json": _dump(
            [{"id": t.id, "title": t.title, "start": format_time(t.start), "end": format_time(t.end)}
             for t in dataset.tests]
        ),
        "users.json": _dump(
            [{"user_id": u.user_id, "username": u.username, "roster_no": u.roster_no}
             for u in dataset.users]
        ),
        "scores.json": _dump(
            [{"user_id": s.user_id, "msc": s.msc, "wsc": s.wsc} for s in dataset.scores]
        ),
    }
    blobs = {name: text.encode("utf-8") for name, text in files.items()}
    manifest = {
        "label": dataset.label,
        "tz_offset_hours": dataset.tz_offset_hours,
        "semester_start": format_time(dataset.semester_start) if dataset.semester_start else None,
        "counts": {
            "logs": len(dataset.logs),
            "problems": len(dataset.problems),
            "tests": len(dataset.tests),
            "users": len(dataset.users),
            "scores": len(dataset.scores),
        },
        "time_range": {
            "first": format_time(dataset.logs[0].in_time) if dataset.logs else None,
            "last": format_time(dataset.logs[-1].in_time) if dataset.logs else None,
        },
        "files": {name: hashlib.sha256(blob).hexdigest() for name, blob in blobs.items()},
        "digest": _content_digest(dataset, blobs),
    }
    blobs["manifest.json"] = _dump(manifest).encode("utf-8")
    return blobs


def _content_digest(dataset: CohortDataset, blobs: dict[str, bytes]) -> str:
    h = hashlib.sha256()
    h.update(json.dumps([dataset.label, dataset.tz_offset_hours]).encode("utf-8"))
    for name in DATASET_FILES:
        h.update(name.encode("utf-8") + b"\0")
        h.update(hashlib.sha256(blobs[name]).digest())
    return h.hexdigest()


def dataset_digest(dataset: CohortDataset) -> str:
    return json.loads(serialize(dataset)["manifest.json"])["digest"]


def write_dataset(dataset: CohortDataset, outdir: Path | str) -> dict[str, bytes]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    blobs = serialize(dataset)
    for name, blob in blobs.items():
        (outdir / name).write_bytes(blob)
    return blobs


def problems_from_json(items: list[dict]) -> list[ProblemMeta]:
    return [
        ProblemMeta(str(d["id"]), str(d.get("title", d["id"])), str(d["test_id"]), int(d.get("release_rank", 0)))
        for d in items
    ]


def tests_from_json(items: list[dict]) -> list[TestWindow]:
    return [
        TestWindow(str(d["id"]), str(d.get("title", d["id"])), parse_time(d["start"]), parse_time(d["end"]))
        for d in items
    ]


def users_from_json(items: list[dict]) -> list[UserRecord]:
    return [
        UserRecord(str(d["user_id"]), str(d.get("username") or d["user_id"]),
                   None if d.get("roster_no") is None else str(d["roster_no"]))
        for d in items
    ]


def scores_from_json(items: list[dict]) -> list[ExamScores]:
    return [ExamScores(str(d["user_id"]), float(d["msc"]), float(d["wsc"])) for d in items]


@dataclass
class DatasetManifest:
    label: str
    tz_offset_hours: float
    digest: str
    counts: dict = field(default_factory=dict)


def read_manifest(path: Path | str) -> DatasetManifest:
    doc = json.loads((Path(path) / "manifest.json").read_text(encoding="utf-8"))
    return DatasetManifest(doc["label"], float(doc["tz_offset_hours"]), doc["digest"], doc["counts"])
