"""Acquisition stage: OJ exports -> CohortDataset.

Exports are read with a :class:`SchemaProfile` that maps source columns onto
canonical LogRecord fields. Profiles are JSON documents; ``hustoj``,
``qduoj``, ``generic`` (the plain Solution/Status table layout) and
``canonical`` (this package's own logs.jsonl) ship with the package.
"""

from __future__ import annotations

import csv
import hashlib
import io
import ipaddress
import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Optional

from . import datamodel as dm
from .datamodel import (
    CohortDataset,
    ExamScores,
    LogRecord,
    ProblemMeta,
    TestWindow,
    UserRecord,
    Verdict,
)
from .errors import BadVerdictMap, MissingField, ProfileError, ValidationFailed

MANDATORY_FIELDS = ("id", "problem_id", "user_id", "in_time", "verdict")
OPTIONAL_FIELDS = (
    "test_id", "language", "time_ms", "memory_kb", "code_length",
    "code", "code_hash", "ip", "location",
)
ROW_NUMBER = "@row"  # field_map value: use the 1-based data row number as id

_MEMORY_FACTORS = {"kb": 1.0, "k": 1.0, "mb": 1024.0, "m": 1024.0, "bytes": 1 / 1024, "b": 1 / 1024}
_TIME_FACTORS = {"ms": 1.0, "s": 1000.0}
_QUANTITY = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*([A-Za-z]*)\s*$")


@dataclass(frozen=True)
class SchemaProfile:
    name: str
    field_map: dict[str, str]
    verdict_map: dict[str, Verdict]
    time_format: str = "%Y-%m-%d %H:%M:%S"
    memory_unit: str = "KB"
    time_unit: str = "ms"
    tz_offset_hours: float = dm.DEFAULT_TZ_OFFSET_HOURS
    language_map: dict[str, str] = field(default_factory=dict)
    # lets the canonical profile read back Verdict.to_text() losslessly
    canonical_verdicts: bool = False


def load_profile(document: str) -> SchemaProfile:
    """Parse and validate a JSON profile document.

    ``verdicts`` maps canonical verdict names to lists of raw values; a raw
    value listed twice (under one or several verdicts) is rejected.
    """
    doc = json.loads(document)
    if not isinstance(doc, dict):
        raise ProfileError("profile document must be a JSON object")
    field_map = {str(k): str(v) for k, v in (doc.get("fields") or {}).items()}
    for name in MANDATORY_FIELDS:
        if not field_map.get(name):
            raise MissingField(name)
    unknown = set(field_map) - set(MANDATORY_FIELDS) - set(OPTIONAL_FIELDS)
    if unknown:
        raise ProfileError(f"profile maps unknown canonical fields: {sorted(unknown)}")

    verdict_map: dict[str, Verdict] = {}
    for kind, raws in (doc.get("verdicts") or {}).items():
        if kind not in dm.VERDICT_KINDS or kind == "Other":
            raise ProfileError(f"unknown verdict name {kind!r} in profile")
        if isinstance(raws, (str, int)):
            raws = [raws]
        for raw in raws:
            raw = str(raw)
            if raw in verdict_map:
                raise BadVerdictMap(raw)
            verdict_map[raw] = Verdict(kind)

    memory_unit = str(doc.get("memory_unit", "KB"))
    time_unit = str(doc.get("time_unit", "ms"))
    if memory_unit.lower() not in ("kb", "mb", "bytes"):
        raise ProfileError(f"memory_unit must be KB, MB or bytes, got {memory_unit!r}")
    if time_unit.lower() not in _TIME_FACTORS:
        raise ProfileError(f"time_unit must be ms or s, got {time_unit!r}")

    return SchemaProfile(
        name=str(doc.get("name", "custom")),
        field_map=field_map,
        verdict_map=verdict_map,
        time_format=str(doc.get("time_format", "%Y-%m-%d %H:%M:%S")),
        memory_unit=memory_unit,
        time_unit=time_unit,
        tz_offset_hours=float(doc.get("tz_offset_hours", dm.DEFAULT_TZ_OFFSET_HOURS)),
        language_map={str(k): str(v) for k, v in (doc.get("languages") or {}).items()},
        canonical_verdicts=bool(doc.get("canonical_verdicts", False)),
    )


def shipped_profiles() -> list[str]:
    root = resources.files("spojlab") / "profiles"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json") and p.name != "campus_demo.json")


def get_profile(name_or_path: str) -> SchemaProfile:
    """Load a shipped profile by name, or a profile JSON file by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return load_profile(path.read_text(encoding="utf-8"))
    res = resources.files("spojlab") / "profiles" / f"{name_or_path}.json"
    if not res.is_file():
        raise ProfileError(f"no such profile: {name_or_path!r} (shipped: {', '.join(shipped_profiles())})")
    return load_profile(res.read_text(encoding="utf-8"))


def map_verdict(raw: str, profile: SchemaProfile) -> Verdict:
    raw = str(raw)
    hit = profile.verdict_map.get(raw)
    if hit is not None:
        return hit
    if profile.canonical_verdicts:
        return Verdict.from_text(raw)
    return Verdict.other(raw)


# -- campus IP map ----------------------------------------------------------


@dataclass(frozen=True)
class CampusIpMap:
    """Ordered CIDR blocks; the first block containing an address wins."""

    blocks: tuple[tuple[ipaddress.IPv4Network | ipaddress.IPv6Network, str], ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "CampusIpMap":
        return cls(tuple((ipaddress.ip_network(cidr, strict=False), label) for cidr, label in pairs))

    @classmethod
    def from_json(cls, document: str) -> "CampusIpMap":
        doc = json.loads(document)
        items = doc["blocks"] if isinstance(doc, dict) else doc
        pairs = []
        for item in items:
            if isinstance(item, dict):
                pairs.append((item["cidr"], item["label"]))
            else:
                pairs.append((item[0], item[1]))
        try:
            return cls.from_pairs(pairs)
        except ValueError as exc:
            raise ProfileError(f"bad CIDR block in IP map: {exc}") from None


def demo_campus_map() -> CampusIpMap:
    res = resources.files("spojlab") / "profiles" / "campus_demo.json"
    return CampusIpMap.from_json(res.read_text(encoding="utf-8"))


def resolve_location(ip: Optional[str], ip_map: CampusIpMap) -> str:
    if not ip:
        return "unknown"
    try:
        addr = ipaddress.ip_address(ip.strip())
    except ValueError:
        return "unknown"
    for network, label in ip_map.blocks:
        if addr.version == network.version and addr in network:
            return label
    return "off-campus"


def locate(logs: Iterable[LogRecord], ip_map: CampusIpMap) -> list[LogRecord]:
    return [replace(lg, location=resolve_location(lg.ip, ip_map)) for lg in logs]


# -- parsing ----------------------------------------------------------------


@dataclass(frozen=True)
class ParseError:
    line: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.reason}"


class _RowError(Exception):
    pass


def _quantity(text, unit: str, factors: dict[str, float], what: str) -> int:
    if text is None or text == "":
        return 0
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        value, suffix = float(text), ""
    else:
        m = _QUANTITY.match(str(text))
        if not m:
            raise _RowError(f"{what}: not a non-negative number: {text!r}")
        value, suffix = float(m.group(1)), m.group(2).lower()
    if suffix:
        if suffix not in factors:
            raise _RowError(f"{what}: unknown unit {suffix!r}")
        factor = factors[suffix]
    else:
        factor = factors[unit.lower()]
    return int(round(value * factor))


def _timestamp(text, profile: SchemaProfile) -> datetime:
    if text is None or str(text).strip() == "":
        raise _RowError("in_time is empty")
    text = str(text).strip()
    try:
        if profile.time_format == "epoch":
            return datetime.fromtimestamp(int(float(text)), tz=timezone.utc)
        if profile.time_format == "iso":
            if text.endswith("Z"):
                text = text[:-1] + "+00:00"
            t = datetime.fromisoformat(text)
        else:
            t = datetime.strptime(text, profile.time_format)
    except ValueError as exc:
        raise _RowError(f"in_time: {exc}") from None
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone(timedelta(hours=profile.tz_offset_hours)))
    return dm.truncate_to_second(t)


def _row_to_log(row: dict, row_no: int, profile: SchemaProfile) -> LogRecord:
    fm = profile.field_map

    def get(name: str, default=None):
        col = fm.get(name)
        if col is None:
            return default
        if col not in row:
            raise _RowError(f"missing column {col!r}")
        value = row[col]
        return default if value is None else value

    if fm["id"] == ROW_NUMBER:
        log_id = row_no
    else:
        try:
            log_id = int(str(get("id")).strip())
        except ValueError:
            raise _RowError(f"id is not an integer: {get('id')!r}") from None
    if log_id <= 0:
        raise _RowError(f"id must be positive, got {log_id}")

    ids = {}
    for name in ("problem_id", "user_id"):
        value = str(get(name, "")).strip()
        if not value:
            raise _RowError(f"{name} is empty")
        ids[name] = value

    code = get("code")
    code_hash = get("code_hash")
    if code_hash:
        code_hash = str(code_hash).strip().lower()
        if not re.fullmatch(r"[0-9a-f]{64}", code_hash):
            raise _RowError("code_hash is not a sha256 hex digest")
        code_bytes = None
    else:
        code_bytes = str(code or "").encode("utf-8")
        code_hash = hashlib.sha256(code_bytes).hexdigest()
    if fm.get("code_length"):
        code_length = _quantity(get("code_length"), "b", {"b": 1.0}, "code_length")
    else:
        code_length = len(code_bytes) if code_bytes is not None else 0

    language = str(get("language", "") or "")
    language = profile.language_map.get(language, language)
    ip = str(get("ip", "") or "").strip() or None
    location = get("location")
    location = str(location) if location not in (None, "") else None

    return LogRecord(
        id=log_id,
        problem_id=ids["problem_id"],
        test_id=str(get("test_id", "") or "").strip(),
        user_id=ids["user_id"],
        in_time=_timestamp(get("in_time"), profile),
        language=language,
        verdict=map_verdict(str(get("verdict", "")).strip(), profile),
        time_ms=_quantity(get("time_ms"), profile.time_unit, _TIME_FACTORS, "time_ms"),
        memory_kb=_quantity(get("memory_kb"), profile.memory_unit, _MEMORY_FACTORS, "memory_kb"),
        code_length=code_length,
        code_hash=code_hash,
        ip=ip,
        location=location,
    )


def _csv_rows(text: io.TextIOBase) -> Iterator[tuple[int, dict]]:
    reader = csv.DictReader(text)
    for row in reader:
        if None in row:  # more cells than header columns
            yield reader.line_num, {"__extra__": row[None]}
            continue
        yield reader.line_num, row


def _jsonl_rows(text: io.TextIOBase) -> Iterator[tuple[int, object]]:
    for line_no, line in enumerate(text, start=1):
        if not line.strip():
            continue
        try:
            yield line_no, json.loads(line)
        except json.JSONDecodeError as exc:
            yield line_no, _RowError(f"invalid JSON: {exc.msg}")


def parse_logs(
    stream: BinaryIO, format: str, profile: SchemaProfile
) -> tuple[list[LogRecord], list[ParseError]]:
    """Parse an export row by row; bad rows become ParseErrors, never abort.

    Undecodable bytes (not UTF-8) abort with UnicodeDecodeError.
    """
    text = io.TextIOWrapper(stream, encoding="utf-8-sig", newline="")
    if format == "csv":
        rows = _csv_rows(text)
    elif format == "jsonl":
        rows = _jsonl_rows(text)
    else:
        raise ValueError(f"unsupported format {format!r}")

    logs: list[LogRecord] = []
    errors: list[ParseError] = []
    for data_no, (line_no, row) in enumerate(rows, start=1):
        try:
            if isinstance(row, _RowError):
                raise row
            if not isinstance(row, dict):
                raise _RowError("row is not an object")
            if "__extra__" in row:
                raise _RowError("row has more cells than the header")
            logs.append(_row_to_log(row, data_no, profile))
        except _RowError as exc:
            errors.append(ParseError(line_no, str(exc)))
    text.detach()
    return logs, errors


def parse_logs_file(path: Path | str, format: Optional[str], profile: SchemaProfile):
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix in (".jsonl", ".ndjson") else "csv"
    with open(path, "rb") as fh:
        return parse_logs(fh, format, profile)


# -- rosters, scores, catalogs ------------------------------------------------


def read_roster(stream: io.TextIOBase) -> list[UserRecord]:
    """CSV of user_id,roster_no[,username] (header row required)."""
    users = []
    for row in csv.DictReader(stream):
        uid = row["user_id"].strip()
        roster_no = (row.get("roster_no") or "").strip() or None
        users.append(UserRecord(uid, (row.get("username") or "").strip() or uid, roster_no))
    return users


def read_scores(stream: io.TextIOBase) -> list[ExamScores]:
    """CSV of user_id,msc,wsc (header row required)."""
    return [
        ExamScores(row["user_id"].strip(), float(row["msc"]), float(row["wsc"]))
        for row in csv.DictReader(stream)
    ]


def infer_catalog(logs: Iterable[LogRecord]) -> tuple[list[ProblemMeta], list[TestWindow]]:
    """Problems and test windows spanned by the logs, for exports without them."""
    spans: dict[str, list[datetime]] = {}
    owner: dict[str, str] = {}
    for lg in logs:
        tid = lg.test_id or "default"
        span = spans.setdefault(tid, [lg.in_time, lg.in_time])
        span[0] = min(span[0], lg.in_time)
        span[1] = max(span[1], lg.in_time)
        owner.setdefault(lg.problem_id, tid)
    tests = [
        TestWindow(tid, tid, lo, hi if hi > lo else lo + timedelta(seconds=1))
        for tid, (lo, hi) in spans.items()
    ]
    problems = [ProblemMeta(pid, pid, tid, 0) for pid, tid in owner.items()]
    return problems, tests


def merge_users(logs: Iterable[LogRecord], roster: Iterable[UserRecord]) -> list[UserRecord]:
    """Roster entries plus an unrostered record for every other log author."""
    users = {u.user_id: u for u in roster}
    for lg in logs:
        if lg.user_id not in users:
            users[lg.user_id] = UserRecord(lg.user_id, lg.user_id, None)
    return list(users.values())


def build_dataset(
    logs: Iterable[LogRecord],
    problems: Iterable[ProblemMeta],
    tests: Iterable[TestWindow],
    users: Iterable[UserRecord],
    scores: Iterable[ExamScores],
    label: str,
    tz: float = dm.DEFAULT_TZ_OFFSET_HOURS,
    ip_map: Optional[CampusIpMap] = None,
) -> CohortDataset:
    """Assemble, normalize and validate; raises ValidationFailed.

    Logs without a test_id take it from their problem (the contest-problem
    join some OJ schemas need).
    """
    problems = list(problems)
    owner = {p.id: p.test_id for p in problems}
    logs = [lg if lg.test_id else replace(lg, test_id=owner.get(lg.problem_id, "")) for lg in logs]
    if ip_map is not None:
        logs = locate(logs, ip_map)
    dataset = dm.normalize(label, logs, problems, tests, users, scores, tz)
    report = dm.validate(dataset)
    if not report.ok:
        raise ValidationFailed(report)
    return dataset


def read_dataset(path: Path | str) -> CohortDataset:
    """Load a normalized dataset directory written by ``write_dataset``."""
    path = Path(path)
    manifest = dm.read_manifest(path)
    logs, errors = parse_logs_file(path / "logs.jsonl", "jsonl", get_profile("canonical"))
    if errors:
        raise ValueError(f"{path / 'logs.jsonl'}: {errors[0]}")

    def load(name):
        return json.loads((path / name).read_text(encoding="utf-8"))

    return build_dataset(
        logs,
        dm.problems_from_json(load("problems.json")),
        dm.tests_from_json(load("tests.json")),
        dm.users_from_json(load("users.json")),
        dm.scores_from_json(load("scores.json")),
        label=manifest.label,
        tz=manifest.tz_offset_hours,
    )
