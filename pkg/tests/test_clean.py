import json
from dataclasses import replace
from datetime import timedelta

import pytest

from spojlab import clean, simulate
from spojlab.clean import AltCluster, CleanReport, ZTestConfig
from spojlab.datamodel import EMPTY_CODE_HASH, TestWindow, validate
from spojlab.errors import SampleTooSmall
from spojlab.report import ztest_table

from conftest import T0, code, make_log, tiny_dataset


def test_window_filter_inclusive_bounds():
    end = T0 + timedelta(days=30)
    logs = [make_log(1, at=T0), make_log(2, at=end), make_log(3, at=end + timedelta(seconds=1))]
    ds, excluded = clean.window_filter(tiny_dataset(logs=logs))
    assert [lg.id for lg in ds.logs] == [1, 2]
    assert excluded == [3]


def test_dedup_keeps_lowest_id():
    at = T0 + timedelta(hours=1)
    logs = [make_log(5, at=at, text="x"), make_log(9, at=at, text="x"), make_log(7, at=at, text="y")]
    ds, removed = clean.dedup(tiny_dataset(logs=logs))
    assert removed == 1
    assert [lg.id for lg in ds.logs] == [5, 7]


def _alt_dataset(shared=3, extra_users=()):
    users = ("u1", "alt1", "u2") + tuple(extra_users)
    logs = []
    i = 1
    for k in range(shared):
        logs.append(make_log(i, user="u1", text=f"sol{k}")); i += 1
        logs.append(make_log(i, user="alt1", text=f"sol{k}")); i += 1
    logs.append(make_log(i, user="u2", text="own")); i += 1
    ds = tiny_dataset(logs=logs, users=users)
    # alt1 has no roster number
    users = tuple(replace(u, roster_no=None) if u.user_id.startswith("alt") else u for u in ds.users)
    return replace(ds, users=users)


def test_detect_alts_threshold():
    assert clean.detect_alts(_alt_dataset(shared=2)) == []
    (cluster,) = clean.detect_alts(_alt_dataset(shared=3))
    assert set(cluster.members) == {"u1", "alt1"}
    assert cluster.primary == "u1"
    assert len(cluster.evidence) == 3


def test_empty_code_is_not_evidence():
    logs = []
    for k in range(4):
        logs.append(make_log(2 * k + 1, user="u1", code_hash=EMPTY_CODE_HASH))
        logs.append(make_log(2 * k + 2, user="u2", code_hash=EMPTY_CODE_HASH))
    assert clean.detect_alts(tiny_dataset(logs=logs)) == []


def test_cluster_without_unique_primary():
    ds = _alt_dataset()
    ds = replace(ds, users=tuple(replace(u, roster_no=None) for u in ds.users))
    (cluster,) = clean.detect_alts(ds)
    assert cluster.primary is None
    out, delta = clean.apply_alt_policy(ds, [cluster], "reassign")
    assert delta.logs_deleted == 6 and delta.logs_reassigned == 0
    assert {u.user_id for u in out.users} == {"u2"}


def test_reassign_conserves_logs_and_validates():
    ds = _alt_dataset()
    clusters = clean.detect_alts(ds)
    out, delta = clean.apply_alt_policy(ds, clusters, "reassign")
    assert len(out.logs) == len(ds.logs)
    assert delta.logs_reassigned == 3
    assert "alt1" not in {lg.user_id for lg in out.logs}
    assert validate(out).ok


def test_delete_policy_drops_alt_logs():
    ds = _alt_dataset()
    out, delta = clean.apply_alt_policy(ds, clean.detect_alts(ds), "delete")
    assert delta.logs_deleted == 3
    assert len(out.logs) == len(ds.logs) - 3
    with pytest.raises(ValueError):
        clean.apply_alt_policy(ds, [], "merge")


def test_prune_needs_thirty_logs(small):
    with pytest.raises(SampleTooSmall):
        clean.prune_variables(small, clean.default_ztest_configs())
    _, report = clean.clean(small)
    assert report.prune_rows == [] and "30" in report.prune_note


def _resource_dataset(times, memories):
    logs = [make_log(i + 1, time_ms=t, memory_kb=m) for i, (t, m) in enumerate(zip(times, memories))]
    return tiny_dataset(logs=logs, tests=[TestWindow("T1", "", T0, T0 + timedelta(days=90))])


def test_prune_decisions():
    times = [22, 24] * 20  # mean 23 vs 22.89: indistinguishable
    memories = [3000, 3100] * 20  # far above 2032
    report = clean.prune_variables(_resource_dataset(times, memories), clean.default_ztest_configs())
    by_var = {r.variable: r for r in report.rows}
    assert by_var["time_ms"].decision == "prune" and by_var["time_ms"].result == "Accept H_0"
    assert by_var["memory_kb"].decision == "keep" and by_var["memory_kb"].result == "Reject H_0"
    assert report.excluded_from_models == ["time_ms"]


def test_prune_zero_variance():
    report = clean.prune_variables(_resource_dataset([20] * 30, [2032] * 30), clean.default_ztest_configs())
    by_var = {r.variable: r for r in report.rows}
    assert by_var["memory_kb"].p == 1.0 and by_var["memory_kb"].decision == "prune"
    assert by_var["time_ms"].p == 0.0 and by_var["time_ms"].decision == "keep"


def test_ztest_config_defaults_and_checks():
    assert ZTestConfig("time_ms").mu0 == 22.89
    assert ZTestConfig("memory_kb").mu0 == 2032
    with pytest.raises(ValueError):
        ZTestConfig("code_length")
    with pytest.raises(ValueError):
        ZTestConfig("time_ms", alpha_prune=1.5)


def test_table_row_rendering():
    text = ztest_table([("2017", "t", 22.89, 0.6936, "Accept H_0")])
    assert "| 2017 | t | μ = μ_0 | 22.89 | 0.6936 | Accept H_0 |" in text


def test_clean_report_balance_and_json_round_trip(sim2017):
    raw, truth, cleaned, report, _ = sim2017
    assert report.balanced
    assert report.input_logs == len(raw.logs)
    assert report.output_logs == len(cleaned.logs)
    for s in report.stages:
        assert s.logs_in == s.logs_out + s.removed
    back = CleanReport.from_dict(json.loads(json.dumps(report.to_dict())))
    assert back.to_dict() == report.to_dict()
    assert validate(cleaned).ok


def test_clean_is_idempotent(sim2017):
    _, _, cleaned, _, _ = sim2017
    again, report = clean.clean(cleaned)
    assert again == cleaned
    assert report.duplicates_removed == 0 and report.out_of_window == 0
    assert report.alt_clusters == []


def test_clean_recovers_planted_alts(sim2017):
    _, truth, _, report, _ = sim2017
    precision, recall = simulate.alt_pair_scores(report.alt_clusters, truth)
    assert precision == 1.0 and recall == 1.0
    assert sorted(report.out_of_window_ids) == sorted(truth.late_log_ids)


def test_alt_cluster_dict_round_trip():
    c = AltCluster(("a", "b"), "a", (("h", 3),))
    assert AltCluster.from_dict(c.to_dict()) == c
