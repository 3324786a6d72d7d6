"""Property-based checks of the statistical and model invariants."""

import io
import math
from datetime import timedelta

from hypothesis import assume, given, settings
from hypothesis import strategies as st

from spojlab import datamodel as dm
from spojlab import ingest, models, stats
from spojlab.datamodel import ProblemMeta

from conftest import T0, make_log, tiny_dataset

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


def _spread(values, tol=1e-6):
    return max(values) - min(values) > tol


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=30),
       st.floats(min_value=0.1, max_value=10), finite)
def test_pearson_affine_invariance(pairs, a, b):
    xs, ys = [p[0] for p in pairs], [p[1] for p in pairs]
    assume(_spread(xs, 1e-3) and _spread(ys, 1e-3))
    r = stats.pearson(xs, ys)
    assert math.isclose(stats.pearson([a * x + b for x in xs], ys), r, abs_tol=1e-7)
    assert math.isclose(stats.pearson([-a * x + b for x in xs], ys), -r, abs_tol=1e-7)
    assert -1.0 <= r <= 1.0


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=30), st.randoms())
def test_pearson_permutation_invariance(pairs, rnd):
    xs, ys = [p[0] for p in pairs], [p[1] for p in pairs]
    assume(_spread(xs, 1e-3) and _spread(ys, 1e-3))
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    assert math.isclose(stats.pearson([p[0] for p in shuffled], [p[1] for p in shuffled]),
                        stats.pearson(xs, ys), abs_tol=1e-9)


@given(st.lists(st.tuples(st.floats(0, 100), st.integers(0, 50)), min_size=2, max_size=40))
def test_ols_slope_non_negative_for_comonotone_input(pairs):
    xs = sorted(p[0] for p in pairs)
    ys = sorted(p[1] for p in pairs)
    assume(_spread(xs, 1e-3))
    fit = stats.ols(list(zip(xs, ys)))
    assert fit.slope >= 0
    assert 0.0 <= fit.r2 <= 1.0


@given(st.lists(st.floats(min_value=0, max_value=100), min_size=30, max_size=80), finite)
def test_z_test_two_sided_symmetric(samples, mu0):
    assume(_spread(samples, 1e-2))
    a = stats.z_test(samples, mu0)
    b = stats.z_test([2 * mu0 - s for s in samples], mu0)
    assert math.isclose(a.p, b.p, rel_tol=1e-9, abs_tol=1e-300)
    assert 0.0 < a.p <= 1.0


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=40), st.floats(0, 100))
def test_percentile_within_range(values, q):
    p = stats.percentile(values, q)
    assert min(values) <= p <= max(values)


@given(st.lists(st.sampled_from(["Accepted", "WrongAnswer", "CompileError"]), min_size=1, max_size=20),
       st.sampled_from(["Accepted", "WrongAnswer"]))
def test_ac_monotonicity(verdicts, extra):
    problems = [ProblemMeta(f"P{i}", "", "T1", 0) for i in range(1, 4)]
    logs = [make_log(i + 1, problem=f"P{i % 3 + 1}", verdict=v) for i, v in enumerate(verdicts)]
    before = models.ac_index(tiny_dataset(logs=logs, problems=problems), "u1").ac
    logs.append(make_log(len(logs) + 1, problem="P2", verdict=extra))
    after = models.ac_index(tiny_dataset(logs=logs, problems=problems), "u1").ac
    if extra == "Accepted":
        assert after >= before
    else:
        assert after == before


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 29), st.integers(0, 23), st.booleans()), min_size=1, max_size=40))
def test_submit_line_slope_non_negative(events):
    logs = [make_log(i + 1, at=T0 + timedelta(days=d, hours=h, seconds=i),
                     verdict="Accepted" if ok else "WrongAnswer", problem="P1" if i % 2 else "P2")
            for i, (d, h, ok) in enumerate(events)]
    fit = models.submit_line(tiny_dataset(logs=logs), "u1")
    if fit.ok:
        assert fit.k_b >= 0 and 0 <= fit.st_b <= 1
    else:
        assert len({x for x, _ in fit.points}) < 2 or len(fit.points) < 3


@given(st.text(min_size=0, max_size=30))
def test_resolve_location_total(text):
    assert ingest.resolve_location(text, ingest.demo_campus_map()) in {
        "unknown", "off-campus", "computer room", "library", "dormitory", "campus (other)"}


@given(st.text(min_size=0, max_size=20).filter(lambda s: "\x00" not in s))
def test_other_verdict_round_trip(raw):
    v = dm.Verdict.other(raw)
    assert dm.Verdict.from_text(v.to_text()) == v


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["u1", "u2"]), st.sampled_from(["P1", "P2"]),
                          st.integers(0, 10 ** 6), st.sampled_from(["Accepted", "WrongAnswer", "Other:SE"])),
                max_size=25))
def test_dataset_serialization_round_trip(rows):
    logs = [make_log(i + 1, user=u, problem=p, at=T0 + timedelta(seconds=s), verdict=v)
            for i, (u, p, s, v) in enumerate(rows)]
    ds = tiny_dataset(logs=logs)
    blobs = dm.serialize(ds)
    parsed, errors = ingest.parse_logs(io.BytesIO(blobs["logs.jsonl"]), "jsonl", ingest.get_profile("canonical"))
    assert errors == []
    rebuilt = ingest.build_dataset(parsed, ds.problems, ds.tests, ds.users, ds.scores, ds.label)
    assert dm.serialize(rebuilt) == blobs
