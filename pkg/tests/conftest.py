import hashlib
from datetime import datetime, timedelta, timezone

import pytest

from spojlab import clean, models, simulate
from spojlab.datamodel import (
    ExamScores,
    LogRecord,
    ProblemMeta,
    TestWindow,
    UserRecord,
    Verdict,
    normalize,
)

UTC = timezone.utc
T0 = datetime(2017, 9, 11, 0, 0, tzinfo=UTC)


def code(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def make_log(id, user="u1", problem="P1", test="T1", at=None, verdict="Accepted", text=None, **kw):
    fields = dict(
        id=id,
        problem_id=problem,
        test_id=test,
        user_id=user,
        in_time=at or T0 + timedelta(hours=id),
        language="C++",
        verdict=Verdict.from_text(verdict),
        time_ms=20,
        memory_kb=2000,
        code_length=100,
        code_hash=code(text if text is not None else f"{user}-{id}"),
    )
    fields.update(kw)
    return LogRecord(**fields)


def tiny_dataset(logs=None, users=("u1", "u2"), scores=(), tests=None, problems=None, label="tiny"):
    tests = tests or [TestWindow("T1", "Test 1", T0, T0 + timedelta(days=30))]
    problems = problems or [ProblemMeta("P1", "A", "T1", 0), ProblemMeta("P2", "B", "T1", 0)]
    users = [UserRecord(u, u, f"R{i}") for i, u in enumerate(users)]
    if logs is None:
        logs = [make_log(1), make_log(2, user="u2", problem="P2"), make_log(3, verdict="WrongAnswer")]
    return normalize(label, logs, problems, tests, users, list(scores))


@pytest.fixture
def small():
    return tiny_dataset()


@pytest.fixture(scope="session")
def sim2017():
    """A 2017-scale simulated cohort with planted truth (raw, cleaned, analyzed)."""
    ds, truth = simulate.simulate_cohort(simulate.preset("y2017"), 7)
    cleaned, report = clean.clean(ds)
    analyses = models.analyze(cleaned)
    return ds, truth, cleaned, report, analyses


@pytest.fixture(scope="session")
def sim_default():
    ds, truth = simulate.simulate_cohort(simulate.SimConfig(), 3)
    cleaned, report = clean.clean(ds)
    analyses = models.analyze(cleaned)
    return ds, truth, cleaned, report, analyses
