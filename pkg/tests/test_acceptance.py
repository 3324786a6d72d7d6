"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL: ...`` line (visible with
``pytest -v -s`` or in the tee'd log) before asserting.
"""

import math
import random
import statistics
import time
import tracemalloc
import xml.etree.ElementTree as ET
from pathlib import Path

import mpmath
import numpy as np
import pytest

from spojlab import clean, ingest, models, report, simulate, stats
from spojlab.cli import main
from spojlab.datamodel import serialize, validate, write_dataset
from spojlab.simulate import SimConfig


def verdict(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


# -- 1. statistical oracle equivalence -------------------------------------------


def _oracle_ols(xs, ys):
    x, y = np.asarray(xs), np.asarray(ys)
    slope = np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2)
    intercept = y.mean() - slope * x.mean()
    resid = y - (intercept + slope * x)
    r2 = 1 - np.sum(resid ** 2) / np.sum((y - y.mean()) ** 2)
    return slope, intercept, r2


def _oracle_pearson(xs, ys):
    x, y = np.asarray(xs), np.asarray(ys)
    dx, dy = x - x.mean(), y - y.mean()
    return np.sum(dx * dy) / math.sqrt(np.sum(dx ** 2) * np.sum(dy ** 2))


def _oracle_z(samples, mu0):
    s = np.asarray(samples)
    z = (s.mean() - mu0) / (s.std(ddof=1) / math.sqrt(len(s)))
    p = float(mpmath.erfc(mpmath.mpf(abs(z)) / mpmath.sqrt(2)))
    return z, p


def test_criterion_1_stat_oracles(capsys):
    rng = random.Random(20240501)
    mpmath.mp.dps = 50
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = rng.randint(3, 60)
        xs = [rng.uniform(-50, 50) for _ in range(n)]
        ys = [rng.uniform(-2, 2) * x + rng.gauss(0, 10) for x in xs]
        fit = stats.ols(zip(xs, ys))
        slope, intercept, r2 = _oracle_ols(xs, ys)
        worst = max(worst, abs(fit.slope - slope), abs(fit.intercept - intercept), abs(fit.r2 - r2))
    for _ in range(1000):
        n = rng.randint(3, 60)
        xs = [rng.gauss(0, 5) for _ in range(n)]
        ys = [rng.uniform(-1, 1) * x + rng.gauss(0, 3) for x in xs]
        worst = max(worst, abs(stats.pearson(xs, ys) - _oracle_pearson(xs, ys)))
    for _ in range(1000):
        n = rng.randint(30, 200)
        mu = rng.uniform(0, 50)
        samples = [rng.gauss(mu, rng.uniform(0.5, 10)) for _ in range(n)]
        mu0 = mu + rng.uniform(-2, 2)
        res = stats.z_test(samples, mu0)
        z, p = _oracle_z(samples, mu0)
        worst = max(worst, abs(res.z - z), abs(res.p - p))
    grid = [k / 4 for k in range(-40, 41)]
    cdf_worst = max(abs(stats.std_normal_cdf(z) - float(mpmath.ncdf(z))) for z in grid)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and cdf_worst <= 1e-10 and elapsed < 5.0
    verdict(capsys, 1, ok, f"max |diff| {worst:.2e} (ols/pearson/z), cdf {cdf_worst:.2e}, {elapsed:.2f}s")


# -- 2. year-on-year fixture ---------------------------------------------------


def test_criterion_2_yoy(capsys):
    text = stats.format_yoy(stats.yoy_change(10491, 8493))
    verdict(capsys, 2, text == "−19%", f"yoy(10491 → 8493) renders {text!r}")


# -- 3. decay recovery ------------------------------------------------------------


def test_criterion_3_decay_recovery(capsys):
    t0 = time.perf_counter()
    cfg = simulate.preset("y2017", dropout_lambda=0.15)
    errors = []
    for seed in range(20):
        ds, truth = simulate.simulate_cohort(cfg, seed)
        cleaned, _ = clean.clean(ds)
        fit = models.fit_participation(models.participation_series(cleaned))
        errors.append(abs(fit.lam - 0.15) / 0.15)
    med = statistics.median(errors)
    elapsed = time.perf_counter() - t0

    exact = models.fit_participation([(k, 96 * math.exp(-0.15 * k)) for k in range(76)])
    exact_err = max(abs(exact.lam - 0.15), abs(exact.n0 - 96))
    ok = med <= 0.10 and exact_err <= 1e-9 and elapsed < 30.0
    verdict(capsys, 3, ok, f"median rel. error {med:.3f} over 20 seeds; noiseless error {exact_err:.1e}; "
                           f"{elapsed:.1f}s")


# -- 4. Submit Line recovery --------------------------------------------------------


def test_criterion_4_submit_line(capsys):
    pts = [(math.log(d), round(5 * math.log(d) + 3)) for d in range(1, 15)]
    fit = models.fit_submit_line("constructed", pts)
    constructed_ok = fit.ok and abs(fit.k_b - 5) <= 0.1 and fit.st_b >= 0.99

    few_ok = all(
        models.fit_submit_line("few", [(math.log(d), c) for d, c in sample]).status == "insufficient_data"
        for sample in ([], [(1, 1)], [(1, 2), (3, 5)], [(2, 1), (2, 2), (2, 3)])
    )

    users = ok_fits = negative = 0
    cfg = SimConfig(students=1000, tests=3, problems_per_test=(2, 3))
    for seed in range(10):
        ds, truth = simulate.simulate_cohort(cfg, seed)
        users += len(truth.students)
        for line in models.submit_lines(ds):
            if line.ok:
                ok_fits += 1
                negative += line.k_b < 0
            elif len(line.points) >= 3 and len({x for x, _ in line.points}) >= 2:
                negative += 1  # should have been fitted
    ok = constructed_ok and few_ok and negative == 0 and users >= 10000
    verdict(capsys, 4, ok, f"k_b {fit.k_b:.4f} st_b {fit.st_b:.4f}; <3-day users insufficient: {few_ok}; "
                           f"{negative} negative slopes in {ok_fits} ok fits over {users} simulated students")


# -- 5. alt detection --------------------------------------------------------------------


def test_criterion_5_alt_detection(capsys):
    cfg = simulate.preset("y2017")
    assert cfg.alt_fraction == 0.1
    precisions, recalls, conserved = [], [], True
    for seed in range(20):
        ds, truth = simulate.simulate_cohort(cfg, seed)
        deduped, _ = clean.dedup(ds)
        windowed, _ = clean.window_filter(deduped)
        clusters = clean.detect_alts(windowed)
        p, r = simulate.alt_pair_scores(clusters, truth)
        precisions.append(p)
        recalls.append(r)
        merged, _ = clean.apply_alt_policy(windowed, clusters, "reassign")
        conserved &= len(merged.logs) == len(windowed.logs)
    ok = min(precisions) >= 0.95 and min(recalls) >= 0.90 and conserved
    verdict(capsys, 5, ok, f"min precision {min(precisions):.3f}, min recall {min(recalls):.3f} over 20 seeds; "
                           f"reassign conserves logs: {conserved}")


# -- 6. cleaning arithmetic ---------------------------------------------------------------


def test_criterion_6_clean_arithmetic(capsys):
    cases = [(simulate.preset(name), seed) for name in simulate.PRESETS for seed in range(3)]
    cases += [(SimConfig(), seed) for seed in range(3)]
    cases += [(SimConfig(students=20, alt_fraction=0.3, late_fraction=0.2, duplicate_count=40), 1)]
    failures = []
    for cfg, seed in cases:
        for policy in clean.ALT_POLICIES:
            ds, _ = simulate.simulate_cohort(cfg, seed)
            once, rep = clean.clean(ds, policy=policy)
            twice, rep2 = clean.clean(once, policy=policy)
            balanced = rep.balanced and all(s.logs_in == s.logs_out + s.removed for s in rep.stages)
            if not balanced or rep.input_logs != len(ds.logs) or rep.output_logs != len(once.logs):
                failures.append(f"unbalanced {policy} seed {seed}")
            if serialize(twice) != serialize(once) or rep2.output_logs != rep2.input_logs:
                failures.append(f"not idempotent {policy} seed {seed}")
    verdict(capsys, 6, not failures,
            f"{len(cases) * 2} clean runs balanced and idempotent" if not failures else "; ".join(failures))


# -- 7. band fixture --------------------------------------------------------------------------


def test_criterion_7_bands(capsys):
    values = (0.7131, 0.6074, 0.5440, 0.7265, 0.6697, 0.6922)
    bands = [models.classify_band(v) for v in values]
    verdict(capsys, 7, set(bands) == {"moderate"}, f"{len(values)} reference coefficients → {sorted(set(bands))}")


# -- 8. scale --------------------------------------------------------------------------------------


def _pipeline(data_dir: Path, out: Path):
    raw = ingest.read_dataset(data_dir)
    cleaned, rep = clean.clean(raw)
    analyses = models.analyze(cleaned)
    return report.render_report(cleaned, rep, analyses, out, raw=report.cohort_summary(raw))


def test_criterion_8_scale(tmp_path, capsys):
    ds, truth = simulate.simulate_cohort(simulate.preset("y2017"), 2017)
    write_dataset(ds, tmp_path / "data")
    t0 = time.perf_counter()
    _pipeline(tmp_path / "data", tmp_path / "r1")
    elapsed = time.perf_counter() - t0
    tracemalloc.start()
    _pipeline(tmp_path / "data", tmp_path / "r2")
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    peak_mb = peak / 2 ** 20
    ok = elapsed < 10.0 and peak_mb < 500 and len(truth.students) == 96 and len(ds.problems) == 76
    verdict(capsys, 8, ok, f"{len(ds.logs)} logs / 96 students / 76 problems: {elapsed:.2f}s, "
                           f"peak traced memory {peak_mb:.0f} MB")


# -- 9. determinism ---------------------------------------------------------------------------------


def test_criterion_9_determinism(tmp_path, capsys):
    for name in ("s1", "s2"):
        assert main(["simulate", "--preset", "y2017", "--seed", "42", "--out", str(tmp_path / name)]) == 0
    sim_same = all(
        (tmp_path / "s1" / f).read_bytes() == (tmp_path / "s2" / f).read_bytes()
        for f in ("manifest.json", "logs.jsonl", "problems.json", "tests.json", "users.json", "scores.json",
                  "truth.json")
    )
    for name in ("r1", "r2"):
        assert main(["all", "--data", str(tmp_path / "s1"), "--seed", "42", "--out", str(tmp_path / name)]) == 0
    m1 = (tmp_path / "r1" / "manifest.json").read_bytes()
    m2 = (tmp_path / "r2" / "manifest.json").read_bytes()
    verdict(capsys, 9, sim_same and m1 == m2,
            f"simulate byte-identical: {sim_same}; report manifests identical: {m1 == m2}")


# -- 10. report completeness -------------------------------------------------------------------------


def test_criterion_10_report_completeness(tmp_path, capsys):
    assert main(["simulate", "--preset", "y2017", "--seed", "10", "--out", str(tmp_path / "s")]) == 0
    assert main(["all", "--data", str(tmp_path / "s"), "--out", str(tmp_path / "r")]) == 0
    out = tmp_path / "r"
    missing = [t for t in report.TABLE_FILES if not (out / "tables" / t).is_file()]
    svgs = sorted((out / "figures").glob("*.svg"))
    names = [p.name for p in svgs]
    has_figures = "participation.svg" in names and any(n.startswith("submit_line_") for n in names)
    malformed = []
    for p in svgs:
        try:
            ET.parse(p)
        except ET.ParseError:
            malformed.append(p.name)
    ok = not missing and has_figures and not malformed
    verdict(capsys, 10, ok, f"{7 - len(missing)}/7 tables, {len(svgs)} figures, {len(malformed)} malformed SVG")
