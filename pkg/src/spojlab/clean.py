"""Cleaning stage: deduplication, test-window filtering, alt accounts, and
z-test screening of judge resource variables.

Stage order is fixed by :func:`clean`: dedup -> window_filter -> alts ->
prune. Every step is a pure dataset -> dataset transformation and reports
exactly what it removed, so log counts always balance.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

from . import stats
from .datamodel import EMPTY_CODE_HASH, CohortDataset, natural_key
from .errors import SampleTooSmall, ZeroVariance

DEFAULT_MU0 = {"time_ms": 22.89, "memory_kb": 2032.0}
VARIABLE_SYMBOLS = {"time_ms": "t", "memory_kb": "m"}
ALT_POLICIES = ("reassign", "delete")


@dataclass(frozen=True)
class AltCluster:
    members: tuple[str, ...]
    primary: Optional[str]
    evidence: tuple[tuple[str, int], ...]

    def to_dict(self) -> dict:
        return {
            "members": list(self.members),
            "primary": self.primary,
            "evidence": [list(e) for e in self.evidence],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AltCluster":
        return cls(tuple(d["members"]), d["primary"], tuple((h, int(c)) for h, c in d["evidence"]))


@dataclass(frozen=True)
class ZTestConfig:
    variable: str
    mu0: Optional[float] = None
    alpha_prune: float = 0.05
    two_sided: bool = True

    def __post_init__(self):
        if self.variable not in DEFAULT_MU0:
            raise ValueError(f"z-test variable must be one of {sorted(DEFAULT_MU0)}")
        if not 0.0 < self.alpha_prune < 1.0:
            raise ValueError("alpha_prune must lie in (0, 1)")
        if self.mu0 is None:
            object.__setattr__(self, "mu0", DEFAULT_MU0[self.variable])


def default_ztest_configs(alpha: float = 0.05) -> list[ZTestConfig]:
    return [ZTestConfig("time_ms", alpha_prune=alpha), ZTestConfig("memory_kb", alpha_prune=alpha)]


@dataclass(frozen=True)
class PruneRow:
    variable: str
    symbol: str
    mu0: float
    n: int
    mean: float
    stddev: float
    z: float
    p: float
    alpha: float
    decision: str  # "prune" | "keep"

    @property
    def result(self) -> str:
        return "Accept H_0" if self.decision == "prune" else "Reject H_0"


@dataclass(frozen=True)
class VariablePruneReport:
    rows: tuple[PruneRow, ...]

    @property
    def excluded_from_models(self) -> list[str]:
        return [r.variable for r in self.rows if r.decision == "prune"]


@dataclass(frozen=True)
class StageCount:
    stage: str
    logs_in: int
    logs_out: int
    removed: int


@dataclass
class CleanReport:
    input_logs: int = 0
    output_logs: int = 0
    out_of_window: int = 0
    out_of_window_ids: list[int] = field(default_factory=list)
    duplicates_removed: int = 0
    alt_policy: str = "reassign"
    alt_clusters: list[AltCluster] = field(default_factory=list)
    logs_reassigned: int = 0
    logs_deleted: int = 0
    users_removed: list[str] = field(default_factory=list)
    stages: list[StageCount] = field(default_factory=list)
    prune_rows: list[PruneRow] = field(default_factory=list)
    prune_note: Optional[str] = None

    @property
    def balanced(self) -> bool:
        removed = self.out_of_window + self.duplicates_removed + self.logs_deleted
        return self.input_logs == self.output_logs + removed and all(
            s.logs_in == s.logs_out + s.removed for s in self.stages
        )

    def to_dict(self) -> dict:
        return {
            "input_logs": self.input_logs,
            "output_logs": self.output_logs,
            "out_of_window": self.out_of_window,
            "out_of_window_ids": list(self.out_of_window_ids),
            "duplicates_removed": self.duplicates_removed,
            "alt_policy": self.alt_policy,
            "alt_clusters": [c.to_dict() for c in self.alt_clusters],
            "logs_reassigned": self.logs_reassigned,
            "logs_deleted": self.logs_deleted,
            "users_removed": list(self.users_removed),
            "stages": [asdict(s) for s in self.stages],
            "prune_rows": [asdict(r) for r in self.prune_rows],
            "prune_note": self.prune_note,
            "balanced": self.balanced,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CleanReport":
        return cls(
            input_logs=d["input_logs"],
            output_logs=d["output_logs"],
            out_of_window=d["out_of_window"],
            out_of_window_ids=list(d.get("out_of_window_ids", [])),
            duplicates_removed=d["duplicates_removed"],
            alt_policy=d["alt_policy"],
            alt_clusters=[AltCluster.from_dict(c) for c in d["alt_clusters"]],
            logs_reassigned=d["logs_reassigned"],
            logs_deleted=d["logs_deleted"],
            users_removed=list(d["users_removed"]),
            stages=[StageCount(**s) for s in d["stages"]],
            prune_rows=[PruneRow(**r) for r in d["prune_rows"]],
            prune_note=d.get("prune_note"),
        )


def window_filter(dataset: CohortDataset) -> tuple[CohortDataset, list[int]]:
    """Keep logs inside their test window, both ends inclusive."""
    tests = dataset.test_by_id()
    kept, excluded = [], []
    for log in dataset.logs:
        if tests[log.test_id].contains(log.in_time):
            kept.append(log)
        else:
            excluded.append(log.id)
    return replace(dataset, logs=tuple(kept)), excluded


def dedup(dataset: CohortDataset) -> tuple[CohortDataset, int]:
    """Drop logs repeating (user, problem, in_time, code_hash); lowest id wins."""
    seen: set[tuple] = set()
    kept = []
    # logs are ordered by (in_time, id), so the first occurrence has the lowest id
    for log in dataset.logs:
        key = (log.user_id, log.problem_id, log.in_time, log.code_hash)
        if key in seen:
            continue
        seen.add(key)
        kept.append(log)
    return replace(dataset, logs=tuple(kept)), len(dataset.logs) - len(kept)


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # deterministic root regardless of call order
            if natural_key(rb) < natural_key(ra):
                ra, rb = rb, ra
            self.parent[rb] = ra


def detect_alts(
    dataset: CohortDataset,
    roster: Optional[Iterable[str]] = None,
    min_shared_hashes: int = 3,
) -> list[AltCluster]:
    """Link accounts sharing at least ``min_shared_hashes`` identical code
    digests and return the connected components of size two or more.

    ``roster`` is the set of roster-matched user ids; by default every user
    with a roster number. Empty submissions are never evidence.
    """
    if roster is None:
        rostered = {u.user_id for u in dataset.users if u.rostered}
    else:
        rostered = set(roster)

    authors: dict[str, set[str]] = defaultdict(set)
    for log in dataset.logs:
        if log.code_hash != EMPTY_CODE_HASH:
            authors[log.code_hash].add(log.user_id)

    shared: dict[tuple[str, str], int] = defaultdict(int)
    for users in authors.values():
        if len(users) < 2:
            continue
        ordered = sorted(users)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                shared[(a, b)] += 1

    uf = _UnionFind()
    for (a, b), count in shared.items():
        if count >= min_shared_hashes:
            uf.union(a, b)

    groups: dict[str, set[str]] = defaultdict(set)
    for user in list(uf.parent):
        groups[uf.find(user)].add(user)

    clusters = []
    for members in groups.values():
        if len(members) < 2:
            continue
        matched = [m for m in members if m in rostered]
        evidence: dict[str, int] = defaultdict(int)
        for log in dataset.logs:
            if log.user_id in members and log.code_hash != EMPTY_CODE_HASH:
                if len(authors[log.code_hash] & members) >= 2:
                    evidence[log.code_hash] += 1
        clusters.append(
            AltCluster(
                members=tuple(sorted(members, key=natural_key)),
                primary=matched[0] if len(matched) == 1 else None,
                evidence=tuple(sorted(evidence.items())),
            )
        )
    clusters.sort(key=lambda c: natural_key(c.members[0]))
    return clusters


@dataclass(frozen=True)
class AltPolicyDelta:
    policy: str
    logs_reassigned: int
    logs_deleted: int
    users_removed: tuple[str, ...]


def apply_alt_policy(
    dataset: CohortDataset, clusters: Sequence[AltCluster], policy: str = "reassign"
) -> tuple[CohortDataset, AltPolicyDelta]:
    """Merge (reassign) or drop (delete) alt-account activity.

    Clusters without a primary are deleted under either policy. Non-primary
    accounts and their exam scores are removed from the dataset.
    """
    if policy not in ALT_POLICIES:
        raise ValueError(f"alt policy must be one of {ALT_POLICIES}, got {policy!r}")
    reassign_to: dict[str, str] = {}
    drop: set[str] = set()
    for c in clusters:
        for m in c.members:
            if m == c.primary:
                continue
            if policy == "reassign" and c.primary is not None:
                reassign_to[m] = c.primary
            else:
                drop.add(m)

    logs = []
    reassigned = deleted = 0
    for log in dataset.logs:
        if log.user_id in drop:
            deleted += 1
        elif log.user_id in reassign_to:
            logs.append(replace(log, user_id=reassign_to[log.user_id]))
            reassigned += 1
        else:
            logs.append(log)
    removed = set(reassign_to) | drop
    out = replace(
        dataset,
        logs=tuple(logs),
        users=tuple(u for u in dataset.users if u.user_id not in removed),
        scores=tuple(s for s in dataset.scores if s.user_id not in removed),
    )
    delta = AltPolicyDelta(policy, reassigned, deleted, tuple(sorted(removed, key=natural_key)))
    return out, delta


def prune_variables(dataset: CohortDataset, configs: Sequence[ZTestConfig]) -> VariablePruneReport:
    """z-test each resource variable's mean against its baseline; variables
    whose mean is indistinguishable from the baseline (p > alpha) are marked
    "prune". Data is left untouched."""
    n = len(dataset.logs)
    if n < stats.Z_TEST_MIN_N:
        raise SampleTooSmall(f"variable screening needs >= {stats.Z_TEST_MIN_N} logs, got {n}")
    rows = []
    for cfg in configs:
        values = [float(getattr(log, cfg.variable)) for log in dataset.logs]
        try:
            res = stats.z_test(values, cfg.mu0, cfg.two_sided)
            mean, sd, z, p = res.mean, res.stddev, res.z, res.p
        except ZeroVariance:
            mean, sd = values[0], 0.0
            if mean == cfg.mu0:
                z, p = 0.0, 1.0
            else:
                z = float("inf") if mean > cfg.mu0 else float("-inf")
                p = 0.0
        rows.append(
            PruneRow(
                variable=cfg.variable,
                symbol=VARIABLE_SYMBOLS[cfg.variable],
                mu0=cfg.mu0,
                n=n,
                mean=mean,
                stddev=sd,
                z=z,
                p=p,
                alpha=cfg.alpha_prune,
                decision="prune" if p > cfg.alpha_prune else "keep",
            )
        )
    return VariablePruneReport(tuple(rows))


def clean(
    dataset: CohortDataset,
    policy: str = "reassign",
    configs: Optional[Sequence[ZTestConfig]] = None,
    min_shared_hashes: int = 3,
    roster: Optional[Iterable[str]] = None,
) -> tuple[CohortDataset, CleanReport]:
    """Run the full cleaning stage and return the cleaned dataset and report.

    Stages: dedup, window filter, alt detection + policy, a second dedup for
    logs that became identical after a merge, then variable screening.
    """
    configs = default_ztest_configs() if configs is None else configs
    report = CleanReport(input_logs=len(dataset.logs), alt_policy=policy)

    n0 = len(dataset.logs)
    ds, removed = dedup(dataset)
    report.duplicates_removed = removed
    report.stages.append(StageCount("dedup", n0, len(ds.logs), removed))

    n1 = len(ds.logs)
    ds, excluded = window_filter(ds)
    report.out_of_window = len(excluded)
    report.out_of_window_ids = sorted(excluded)
    report.stages.append(StageCount("window_filter", n1, len(ds.logs), len(excluded)))

    n2 = len(ds.logs)
    clusters = detect_alts(ds, roster=roster, min_shared_hashes=min_shared_hashes)
    ds, delta = apply_alt_policy(ds, clusters, policy)
    report.alt_clusters = clusters
    report.logs_reassigned = delta.logs_reassigned
    report.logs_deleted = delta.logs_deleted
    report.users_removed = list(delta.users_removed)
    report.stages.append(StageCount("alts", n2, len(ds.logs), delta.logs_deleted))

    # reassigned alt logs can coincide exactly with the primary's own logs
    n3 = len(ds.logs)
    ds, merged_dups = dedup(ds)
    report.duplicates_removed += merged_dups
    report.stages.append(StageCount("merge_dedup", n3, len(ds.logs), merged_dups))

    try:
        report.prune_rows = list(prune_variables(ds, configs).rows)
    except SampleTooSmall as exc:
        report.prune_note = str(exc)
    report.output_logs = len(ds.logs)
    return ds, report
