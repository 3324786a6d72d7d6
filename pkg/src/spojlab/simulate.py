"""Seeded synthetic cohorts with planted ground truth.

Generative model, per student:

* Persistence. Students are stratified over the dropout distribution: the
  i-th ranked student gets quantile ``u = (rank + U) / N`` and stops after
  release rank ``X = -ln(1 - u) / dropout_lambda``, so problem k is
  attempted with probability ``exp(-dropout_lambda * k)`` while the cohort
  curve stays close to its expectation.
* Ability is the standardized (capped) persistence, so it is high for
  students who stay longer; per-attempt pass probability is logistic in it.
* Each attempted problem is retried until Accepted or abandoned, with an
  occasional resubmission after Accepted.
* Steady students work early in each test window; deadline-bursters work in
  the last day and a half.
* Exam scores are affine in ability and habit plus Gaussian noise, which
  makes the population AC/score correlation available in closed form.

Planted artifacts: alt accounts copying a student's code, late submissions
after the deadline, and exact duplicate rows.

Randomness: one ``random.Random`` (Mersenne Twister) per named substream,
seeded from ``sha256(f"{seed}:{stream}:{index}")``.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from statistics import NormalDist
from typing import Optional

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
from .errors import ConfigInvalid
from .ingest import demo_campus_map, resolve_location

HELLO_WORLD = '#include <iostream>\nint main() { std::cout << "Hello, World!" << std::endl; }\n'
MAX_ATTEMPTS = 30
_FAIL_VERDICTS = (
    ("WrongAnswer", 0.55),
    ("CompileError", 0.15),
    ("TimeLimitExceeded", 0.1),
    ("RuntimeError", 0.12),
    ("PresentationError", 0.05),
    ("MemoryLimitExceeded", 0.03),
)

# exam score model: score = base + w_ability * ability + w_habit * steady + noise
MSC_MODEL = (55.0, 9.0, 4.0)
WSC_MODEL = (58.0, 6.0, 8.0)


@dataclass(frozen=True)
class SimConfig:
    label: str = "sim"
    students: int = 96
    tests: int = 11
    problems_per_test: tuple[int, int] = (4, 8)
    problems_total: Optional[int] = None
    semester_days: int = 90
    start_date: str = "2017-09-11"
    dropout_lambda: float = 0.15
    ability_spread: float = 1.0
    base_pass_rate: float = 0.35
    abandon_rate: float = 0.06
    post_accept_rate: float = 0.1
    procrastination_mix: float = 0.3
    alt_fraction: float = 0.1
    late_fraction: float = 0.05
    duplicate_count: int = 10
    score_noise: float = 9.0
    tz_offset_hours: float = dm.DEFAULT_TZ_OFFSET_HOURS

    def check(self) -> None:
        problems = []
        if self.students < 0 or self.tests < 1:
            problems.append("students must be >= 0 and tests >= 1")
        lo, hi = self.problems_per_test
        if not 1 <= lo <= hi:
            problems.append("problems_per_test must be a range 1 <= lo <= hi")
        if self.problems_total is not None and not self.tests * lo <= self.problems_total <= self.tests * hi:
            problems.append("problems_total must fit tests * problems_per_test")
        if self.semester_days < 14:
            problems.append("semester_days must be >= 14")
        if self.dropout_lambda < 0 or self.ability_spread < 0 or self.score_noise < 0:
            problems.append("dropout_lambda, ability_spread and score_noise must be >= 0")
        for name in ("base_pass_rate",):
            if not 0 < getattr(self, name) < 1:
                problems.append(f"{name} must lie in (0, 1)")
        for name in ("abandon_rate", "post_accept_rate", "procrastination_mix", "alt_fraction", "late_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                problems.append(f"{name} must lie in [0, 1]")
        if self.duplicate_count < 0:
            problems.append("duplicate_count must be >= 0")
        try:
            datetime.strptime(self.start_date, "%Y-%m-%d")
        except ValueError:
            problems.append("start_date must be YYYY-MM-DD")
        if problems:
            raise ConfigInvalid("; ".join(problems))

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(f"unknown simulator settings: {sorted(unknown)}")
        d = dict(d)
        if "problems_per_test" in d:
            d["problems_per_test"] = tuple(d["problems_per_test"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["problems_per_test"] = list(self.problems_per_test)
        return d


# Cohort sizes follow the three course offerings (2017: 96 students, 11 tests,
# 76 problems, 10,491 logs; 2018: 104 students on the reused tests, 8,493
# logs; 2019: 26 students, 12 tests, 68 problems, 2,609 logs). Decay rates and
# pass rates are calibrated so the expected log totals land on those counts.
def _preset(**kw) -> SimConfig:
    return replace(SimConfig(), **kw)


PRESETS: dict[str, SimConfig] = {
    "y2017": _preset(label="2017", students=96, tests=11, problems_total=76,
                     start_date="2017-09-11", dropout_lambda=0.015, base_pass_rate=0.41),
    "y2018": _preset(label="2018", students=104, tests=11, problems_total=76,
                     start_date="2018-09-10", dropout_lambda=0.05, base_pass_rate=0.18,
                     procrastination_mix=0.5),
    "y2019": _preset(label="2019", students=26, tests=12, problems_total=68,
                     start_date="2019-09-09", dropout_lambda=0.03, base_pass_rate=0.24),
}
PRESET_TARGET_LOGS = {"y2017": 10491, "y2018": 8493, "y2019": 2609}


def preset(name: str, **overrides) -> SimConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigInvalid(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base


@dataclass
class StudentTruth:
    user_id: str
    ability: float
    pass_rate: float
    habit: str  # "steady" | "burster"
    dropout_index: Optional[int]  # first release rank not attempted; None if all attempted
    alt_accounts: list[str] = field(default_factory=list)
    canonical_count: int = 0  # clean logs attributable to the student (alts included)
    effort: int = 0  # corrected submissions: up to and including first Accepted


@dataclass
class GroundTruth:
    seed: int
    config: dict
    dropout_lambda: float
    students: list[StudentTruth]
    alt_map: dict[str, str]  # alt account -> canonical student
    late_log_ids: list[int]
    duplicate_log_ids: list[int]
    corr_target_msc: Optional[float]
    corr_target_wsc: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        d = dict(d)
        d["students"] = [StudentTruth(**s) for s in d["students"]]
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def student(self, user_id: str) -> StudentTruth:
        for s in self.students:
            if s.user_id == user_id:
                return s
        raise KeyError(user_id)


def substream(seed: int, stream: str, index: int = 0) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{stream}:{index}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _capped_exp_moments(lam: float, cap: float) -> tuple[float, float]:
    """Mean and sd of min(X, cap) for X ~ Exponential(rate=lam)."""
    e = math.exp(-lam * cap)
    mean = (1.0 - e) / lam
    second = 2.0 / lam**2 * (1.0 - e * (1.0 + lam * cap))
    return mean, math.sqrt(max(second - mean * mean, 0.0))


def corr_target(model: tuple[float, float, float], steady_share: float, noise: float) -> Optional[float]:
    """Population Pearson correlation between ability and an exam score."""
    _, wa, wh = model
    denom = wa * wa + wh * wh * steady_share * (1 - steady_share) + noise * noise
    return wa / math.sqrt(denom) if denom > 0 else None


def _logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _problem_counts(cfg: SimConfig, rng: random.Random) -> list[int]:
    lo, hi = cfg.problems_per_test
    if cfg.problems_total is None:
        return [rng.randint(lo, hi) for _ in range(cfg.tests)]
    base, extra = divmod(cfg.problems_total, cfg.tests)
    counts = [base] * cfg.tests
    for i in sorted(rng.sample(range(cfg.tests), extra)):
        counts[i] += 1
    return counts


def _random_ip(rng: random.Random, habit: str) -> str:
    on_campus = rng.random() < (0.75 if habit == "steady" else 0.5)
    if on_campus:
        second = rng.choice((10, 10, 20, 30, 31))
        return f"10.{second}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"
    return f"{rng.choice((47, 112, 180, 223))}.{rng.randint(0, 255)}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"


def _hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class _Draft:
    """A log before ids are assigned; ``order`` breaks timestamp ties."""

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
    ip: str
    order: tuple = ()
    tag: str = "clean"  # clean | late | dup


def simulate_cohort(config: SimConfig, seed: int) -> tuple[CohortDataset, GroundTruth]:
    """Generate one cohort. Output is a pure function of (config, seed)."""
    config.check()
    cfg = config
    tz = timezone(timedelta(hours=cfg.tz_offset_hours))
    crng = substream(seed, "cohort")
    ip_map = demo_campus_map()

    # -- tests and problems ----------------------------------------------
    counts = _problem_counts(cfg, crng)
    first_day = datetime.strptime(cfg.start_date, "%Y-%m-%d").replace(tzinfo=tz)
    tests: list[TestWindow] = []
    problems: list[ProblemMeta] = []
    test_of_rank: list[TestWindow] = []
    span = cfg.semester_days - 14
    for i in range(cfg.tests):
        offset = round(i * span / (cfg.tests - 1)) if cfg.tests > 1 else 0
        duration = crng.randint(7, 14)
        start = first_day + timedelta(days=offset, hours=8)
        end = first_day + timedelta(days=offset + duration) - timedelta(seconds=1)
        t = TestWindow(f"T{i + 1:02d}", f"Test {i + 1}", start.astimezone(timezone.utc), end.astimezone(timezone.utc))
        tests.append(t)
        for _ in range(counts[i]):
            rank = len(problems)
            problems.append(ProblemMeta(f"P{1001 + rank}", f"Problem {rank + 1}", t.id, rank))
            test_of_rank.append(t)
    n_problems = len(problems)
    position = []  # (index within its test, problems in that test) per rank
    for i, c in enumerate(counts):
        position.extend((j, c) for j in range(c))

    # -- students: persistence strata, ability, habit -----------------------
    n = cfg.students
    n_alts = round(cfg.alt_fraction * n)
    account_numbers = list(range(1, n + n_alts + 1))
    crng.shuffle(account_numbers)
    student_ids = [f"u{num:04d}" for num in account_numbers[:n]]
    alt_ids = [f"u{num:04d}" for num in account_numbers[n:]]

    strata = list(range(n))
    crng.shuffle(strata)
    habits = ["burster" if crng.random() < cfg.procrastination_mix else "steady" for _ in range(n)]
    lam = cfg.dropout_lambda
    if lam > 0:
        mu, sd = _capped_exp_moments(lam, n_problems)
    truths: list[StudentTruth] = []
    drafts: list[_Draft] = []
    by_student: dict[str, list[_Draft]] = {}
    attempted: dict[str, list[int]] = {}
    seq = 0

    for i, uid in enumerate(student_ids):
        srng = substream(seed, "student", i)
        u = (strata[i] + srng.random()) / n
        if lam > 0:
            persist = -math.log1p(-u) / lam
            reach = min(n_problems, math.ceil(persist)) if persist > 0 else 1
            ability = (min(persist, n_problems) - mu) / sd if sd > 0 else 0.0
        else:
            reach = n_problems
            ability = NormalDist().inv_cdf(min(max(u, 1e-12), 1 - 1e-12))
        reach = max(reach, 1)
        pass_rate = _logistic(math.log(cfg.base_pass_rate / (1 - cfg.base_pass_rate)) + 0.5 * cfg.ability_spread * ability)
        habit = habits[i]
        truth = StudentTruth(uid, ability, pass_rate, habit, reach if reach < n_problems else None)
        language = "C" if srng.random() < 0.15 else "C++"
        mine: list[_Draft] = []

        for rank in range(reach):
            prob = problems[rank]
            test = test_of_rank[rank]
            window = (test.end - test.start).total_seconds()
            idx_in_test, m = position[rank]
            if habit == "steady":
                start_s = (idx_in_test / m) * 0.5 * window + srng.uniform(0, 0.12 * window)
            else:
                start_s = window - srng.uniform(0, min(window, 36 * 3600))
            t = test.start + timedelta(seconds=int(start_s))
            solved = False
            for attempt in range(MAX_ATTEMPTS):
                if srng.random() < pass_rate:
                    verdict = Verdict("Accepted")
                    solved = True
                else:
                    verdict = Verdict(_choose(srng, _FAIL_VERDICTS))
                code = HELLO_WORLD if rank == 0 and solved else f"sim:{seed}:{uid}:{prob.id}:{attempt}"
                mine.append(_make_draft(srng, prob, test, uid, t, language, verdict, code, habit, (seq,)))
                seq += 1
                truth.effort += 1
                if solved:
                    break
                if srng.random() < cfg.abandon_rate:
                    break
                t = min(test.end, t + timedelta(seconds=srng.randint(60, 1500)))
            if solved and srng.random() < cfg.post_accept_rate:
                for extra in range(srng.randint(1, 2)):
                    t = min(test.end, t + timedelta(seconds=srng.randint(120, 3600)))
                    verdict = Verdict("Accepted") if srng.random() < 0.7 else Verdict("WrongAnswer")
                    code = f"sim:{seed}:{uid}:{prob.id}:post{extra}"
                    mine.append(_make_draft(srng, prob, test, uid, t, language, verdict, code, habit, (seq,)))
                    seq += 1
        truths.append(truth)
        drafts.extend(mine)
        by_student[uid] = mine
        attempted[uid] = list(range(reach))

    # -- alt accounts --------------------------------------------------------
    alt_map: dict[str, str] = {}
    eligible = [uid for uid in student_ids if len(by_student[uid]) >= 4]
    owners = crng.sample(eligible, min(n_alts, len(eligible)))
    tests_by_id = {t.id: t for t in tests}
    for j, (alt_id, owner) in enumerate(zip(alt_ids, owners)):
        arng = substream(seed, "alt", j)
        source = by_student[owner]
        picked = [d for d in source if arng.random() < 0.5]
        if len(picked) < 3:
            picked = arng.sample(source, 3)
        copies = []
        for d in sorted(picked, key=lambda d: d.order):
            test = tests_by_id[d.test_id]
            t = d.in_time + timedelta(seconds=arng.randint(-3600, 3600))
            t = min(max(t, test.start), test.end)
            copies.append(replace(d, user_id=alt_id, in_time=t, ip=_random_ip(arng, "burster"), order=(seq,)))
            seq += 1
        for k in range(arng.randint(0, 3)):
            rank = arng.choice(attempted[owner])
            prob, test = problems[rank], test_of_rank[rank]
            t = test.start + timedelta(seconds=arng.randint(0, int((test.end - test.start).total_seconds())))
            verdict = Verdict(_choose(arng, _FAIL_VERDICTS))
            copies.append(_make_draft(arng, prob, test, alt_id, t, "C++", verdict,
                                      f"sim:{seed}:{alt_id}:own{k}", "burster", (seq,)))
            seq += 1
        drafts.extend(copies)
        alt_map[alt_id] = owner
    alt_ids = [a for a in alt_ids if a in alt_map]

    # -- planted late submissions and duplicate rows -------------------------
    clean_drafts = list(drafts)
    lrng = substream(seed, "late")
    n_late = round(cfg.late_fraction * len(clean_drafts))
    student_drafts = [d for d in clean_drafts if d.user_id not in alt_map]
    late = []
    for k in range(min(n_late, len(student_drafts)) if student_drafts else 0):
        src = lrng.choice(student_drafts)
        test = tests_by_id[src.test_id]
        t = test.end + timedelta(seconds=lrng.randint(1, 3 * 86400))
        verdict = Verdict("Accepted") if lrng.random() < 0.4 else Verdict("WrongAnswer")
        late.append(replace(src, in_time=t, verdict=verdict, code_hash=_hash(f"sim:{seed}:late:{k}"),
                            order=(seq,), tag="late"))
        seq += 1
    drng = substream(seed, "dup")
    dups = [
        replace(src, order=src.order + (1,), tag="dup")
        for src in drng.sample(clean_drafts, min(cfg.duplicate_count, len(clean_drafts)))
    ]
    everything = clean_drafts + late + dups
    everything.sort(key=lambda d: (d.in_time, d.order))

    logs: list[LogRecord] = []
    late_ids, dup_ids = [], []
    for log_id, d in enumerate(everything, start=1):
        logs.append(LogRecord(
            id=log_id, problem_id=d.problem_id, test_id=d.test_id, user_id=d.user_id,
            in_time=d.in_time, language=d.language, verdict=d.verdict, time_ms=d.time_ms,
            memory_kb=d.memory_kb, code_length=d.code_length, code_hash=d.code_hash,
            ip=d.ip, location=resolve_location(d.ip, ip_map),
        ))
        if d.tag == "late":
            late_ids.append(log_id)
        elif d.tag == "dup":
            dup_ids.append(log_id)

    # -- users, scores, truth bookkeeping ------------------------------------
    year = cfg.start_date[:4]
    users = [UserRecord(uid, f"stu{uid[1:]}", f"{year}{i + 1:04d}") for i, uid in enumerate(student_ids)]
    users += [UserRecord(aid, f"user{aid[1:]}", None) for aid in alt_ids]

    steady_share = 1.0 - cfg.procrastination_mix
    scores = []
    for i, truth in enumerate(truths):
        srng = substream(seed, "score", i)
        steady = 1.0 if truth.habit == "steady" else 0.0
        msc = _score(MSC_MODEL, truth.ability, steady, cfg.score_noise, srng)
        wsc = _score(WSC_MODEL, truth.ability, steady, cfg.score_noise, srng)
        scores.append(ExamScores(truth.user_id, msc, wsc))

    counts_clean: dict[str, int] = {}
    for d in clean_drafts:
        canon = alt_map.get(d.user_id, d.user_id)
        counts_clean[canon] = counts_clean.get(canon, 0) + 1
    for truth in truths:
        truth.canonical_count = counts_clean.get(truth.user_id, 0)
        truth.alt_accounts = sorted(a for a, o in alt_map.items() if o == truth.user_id)

    dataset = dm.normalize(cfg.label, logs, problems, tests, users, scores, cfg.tz_offset_hours)
    truth = GroundTruth(
        seed=seed,
        config=cfg.to_dict(),
        dropout_lambda=lam,
        students=truths,
        alt_map=dict(sorted(alt_map.items())),
        late_log_ids=late_ids,
        duplicate_log_ids=dup_ids,
        corr_target_msc=corr_target(MSC_MODEL, steady_share, cfg.score_noise) if n else None,
        corr_target_wsc=corr_target(WSC_MODEL, steady_share, cfg.score_noise) if n else None,
    )
    return dataset, truth


def _choose(rng: random.Random, weighted: tuple[tuple[str, float], ...]) -> str:
    names = [w[0] for w in weighted]
    return rng.choices(names, weights=[w[1] for w in weighted])[0]


def _make_draft(rng, prob, test, uid, t, language, verdict, code, habit, order) -> _Draft:
    # centred on the historical baselines, so screening should find nothing
    time_ms = max(0, round(rng.gammavariate(2.0, 22.89 / 2.0)))
    memory_kb = max(0, round(rng.gauss(2032.0, 350.0)))
    return _Draft(
        problem_id=prob.id, test_id=test.id, user_id=uid, in_time=t, language=language,
        verdict=verdict, time_ms=time_ms, memory_kb=memory_kb,
        code_length=len(code.encode("utf-8")) if code == HELLO_WORLD else rng.randint(150, 1500),
        code_hash=_hash(code), ip=_random_ip(rng, habit), order=order,
    )


def _score(model, ability: float, steady: float, noise: float, rng: random.Random) -> float:
    base, wa, wh = model
    value = base + wa * ability + wh * steady + (rng.gauss(0.0, noise) if noise > 0 else 0.0)
    return round(min(100.0, max(0.0, value)), 1)


def write_simulation(dataset: CohortDataset, truth: GroundTruth, outdir: Path | str) -> None:
    outdir = Path(outdir)
    dm.write_dataset(dataset, outdir)
    (outdir / "truth.json").write_text(truth.to_json(), encoding="utf-8")


def read_truth(path: Path | str) -> Optional[GroundTruth]:
    p = Path(path)
    if p.is_dir():
        p = p / "truth.json"
    if not p.exists():
        return None
    return GroundTruth.from_dict(json.loads(p.read_text(encoding="utf-8")))


# -- recovery scoring -------------------------------------------------------


@dataclass(frozen=True)
class RecoveryRow:
    metric: str
    planted: Optional[float]
    estimate: Optional[float]
    error: Optional[float]  # relative for lambda, absolute otherwise
    note: str = ""


@dataclass(frozen=True)
class RecoveryReport:
    rows: tuple[RecoveryRow, ...]

    def get(self, metric: str) -> RecoveryRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows]}


def alt_pair_scores(clusters, truth: GroundTruth) -> tuple[float, float]:
    """Pairwise precision and recall of detected clusters against planted alts.

    A pair is two accounts in the same cluster; empty sets score 1.0.
    """
    def pairs(groups):
        out = set()
        for g in groups:
            g = sorted(g)
            out.update((a, b) for i, a in enumerate(g) for b in g[i + 1:])
        return out

    planted: dict[str, set[str]] = {}
    for alt, owner in truth.alt_map.items():
        planted.setdefault(owner, {owner}).add(alt)
    truth_pairs = pairs(planted.values())
    found = pairs(c.members for c in clusters)
    hit = len(found & truth_pairs)
    precision = hit / len(found) if found else 1.0
    recall = hit / len(truth_pairs) if truth_pairs else 1.0
    return precision, recall


def truth_check(dataset: CohortDataset, truth: GroundTruth, analyses, clean_report=None) -> RecoveryReport:
    """Score pipeline estimates against the planted truth.

    ``dataset`` is the raw simulated cohort (before cleaning); it is only
    consulted for late logs when no ``clean_report`` is given. ``analyses``
    come from models.analyze on the cleaned cohort.
    """
    from . import stats
    from .clean import window_filter

    rows: list[RecoveryRow] = []
    pf = analyses.participation_fit
    if pf is not None:
        lam = truth.dropout_lambda
        err = abs(pf.lam - lam) / lam if lam > 0 else abs(pf.lam)
        rows.append(RecoveryRow("dropout_lambda", lam, pf.lam, err,
                                "relative error" if lam > 0 else "absolute error (planted 0)"))

    effort = {s.user_id: s.effort for s in truth.students}
    ok = [ln for ln in analyses.submit_lines if ln.ok and ln.user_id in effort]
    if len(ok) >= 3 and len({ln.k_b for ln in ok}) > 1 and len({effort[ln.user_id] for ln in ok}) > 1:
        rho = stats.spearman([ln.k_b for ln in ok], [float(effort[ln.user_id]) for ln in ok])
        rows.append(RecoveryRow("k_b_vs_effort_spearman", 1.0, rho, 1.0 - rho,
                                "rank agreement of Submit Line slope with planted effort"))

    if clean_report is not None:
        precision, recall = alt_pair_scores(clean_report.alt_clusters, truth)
        rows.append(RecoveryRow("alt_precision", 1.0, precision, 1.0 - precision))
        rows.append(RecoveryRow("alt_recall", 1.0, recall, 1.0 - recall))

    c = analyses.correlation
    if c is not None:
        for name, est, target in (("rho_ac_msc", c.rho_ac_msc, truth.corr_target_msc),
                                  ("rho_ac_wsc", c.rho_ac_wsc, truth.corr_target_wsc)):
            if target is not None:
                same_sign = (est >= 0) == (target >= 0)
                rows.append(RecoveryRow(name, target, est, abs(est - target),
                                        "sign agrees" if same_sign else "SIGN DIFFERS"))

    if clean_report is not None:
        excluded = clean_report.out_of_window_ids
    else:
        _, excluded = window_filter(dataset)
    late_ok = sorted(excluded) == sorted(truth.late_log_ids)
    rows.append(RecoveryRow("late_logs", float(len(truth.late_log_ids)), float(len(excluded)),
                            0.0 if late_ok else 1.0, "exact id match" if late_ok else "id sets differ"))
    return RecoveryReport(tuple(rows))
