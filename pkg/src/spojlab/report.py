"""Report bundle: markdown summary, CSV/JSON tables, SVG figures, manifest.

Layout under the output directory::

    summary.md
    tables/   clean_report.json ac.csv submit_lines.csv participation.csv
              correlations.csv ztests.csv warnings.csv [recovery.csv]
    figures/  participation.svg submit_line_<user>.svg daily_<user>.svg
              submit_lines_compare.svg [participation_<label>.svg ...]
    manifest.json   sha256 of every file above

Rendering is byte-deterministic: no clocks, no environment, fixed float
formats.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import median
from typing import Optional, Sequence

from . import stats
from .clean import CleanReport
from .datamodel import CohortDataset
from .errors import OutputUnwritable
from .models import Analyses, CorrelationRow, daily_counts, day_index
from .svg import FigureSpec, Series, render_svg

TABLE_FILES = (
    "clean_report.json",
    "ac.csv",
    "submit_lines.csv",
    "participation.csv",
    "correlations.csv",
    "ztests.csv",
    "warnings.csv",
)


@dataclass(frozen=True)
class CohortSummary:
    label: str
    students: int
    logs: int
    tests: int
    problems: int
    series: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class ReportBundle:
    outdir: Path
    files: dict[str, str]  # relative path -> sha256
    digest: str  # sha256 of manifest.json

    def path(self, rel: str) -> Path:
        return self.outdir / rel


def cohort_summary(dataset: CohortDataset, series: Sequence[tuple[int, int]] = ()) -> CohortSummary:
    rostered = sum(1 for u in dataset.users if u.rostered)
    return CohortSummary(
        label=dataset.label,
        students=rostered or len(dataset.users),
        logs=len(dataset.logs),
        tests=len(dataset.tests),
        problems=len(dataset.problems),
        series=tuple(series),
    )


def _num(v: Optional[float], places: int = 6) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{places}f}"


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


# -- markdown tables --------------------------------------------------------


def ztest_table(rows: Sequence[tuple[str, str, float, float, str]]) -> str:
    """Variable-screening table: (cohort, symbol, mu0, p, result) rows.

    The cohort label is printed on its first row only.
    """
    lines = [
        "| Year | Variable | H_0 | μ_0 | P_value | Result |",
        "|---|---|---|---|---|---|",
    ]
    prev = None
    for label, symbol, mu0, p, result in rows:
        shown = label if label != prev else ""
        prev = label
        lines.append(f"| {shown} | {symbol} | μ = μ_0 | {mu0:g} | {p:.4f} | {result} |")
    return "\n".join(lines) + "\n"


def correlation_table(rows: Sequence[CorrelationRow]) -> str:
    lines = [
        "| Year | ρ(AC, MSC) | ρ(AC, WSC) | band (MSC) | band (WSC) |",
        "|---|---|---|---|---|",
    ]
    for r in rows:
        lines.append(
            f"| {r.label} | {r.rho_ac_msc:.4f} | {r.rho_ac_wsc:.4f} | {r.band_msc} | {r.band_wsc} |"
        )
    return "\n".join(lines) + "\n"


# -- figures ------------------------------------------------------------------


def participation_figure(label: str, series: Sequence[tuple[int, int]], fit=None) -> str:
    pts = [(rank + 1, n) for rank, n in series]
    lines = [Series(f"{label} participants", pts, "markers")]
    if fit is not None:
        curve = [(rank + 1, fit.n0 * math.exp(-fit.lam * rank)) for rank, _ in series]
        lines.append(Series(f"fit λ={fit.lam:.4f}", curve, "line"))
    return render_svg(FigureSpec(
        title=f"Participation curve ({label})",
        x_label="problem (release order)",
        y_label="participants",
        series=lines,
        x_range=(1, max(len(pts), 2)),
    ))


def _line_series(fit, label: str) -> list[Series]:
    days = [round(math.exp(x)) for x, _ in fit.points]
    observed = Series(f"{label} cumulative", [(d, c) for d, (_, c) in zip(days, fit.points)], "markers")
    lo, hi = min(days), max(days)
    line = Series(
        f"{label} K_b={fit.k_b:.2f} St_b={fit.st_b:.3f}",
        [(lo, fit.intercept + fit.k_b * math.log(lo)), (hi, fit.intercept + fit.k_b * math.log(hi))],
        "line",
    )
    return [observed, line]


def submit_line_figure(fit, daily: Sequence[tuple[int, int]]) -> str:
    return render_svg(FigureSpec(
        title=f"Submit Line: {fit.user_id}",
        x_label="day of semester (log scale)",
        y_label="corrected cumulative submissions",
        series=_line_series(fit, fit.user_id),
        bars=[Series(fit.user_id, list(daily))] if daily else (),
        bars_label="submissions/day",
        log_x=True,
    ))


def compare_figure(fits, dailies) -> str:
    series, bars = [], []
    for fit, daily in zip(fits, dailies):
        series.extend(_line_series(fit, fit.user_id))
        if daily:
            bars.append(Series(fit.user_id, list(daily)))
    return render_svg(FigureSpec(
        title="Submit Lines compared",
        x_label="day of semester (log scale)",
        y_label="corrected cumulative submissions",
        series=series,
        bars=bars,
        bars_label="submissions/day",
        log_x=True,
    ))


def daily_figure(user_id: str, daily: Sequence[tuple[int, int]]) -> str:
    return render_svg(FigureSpec(
        title=f"Daily submissions: {user_id}",
        x_label="day of semester",
        y_label="submissions",
        series=[Series(user_id, list(daily), "both")],
    ))


def overlay_figure(cohorts: Sequence[CohortSummary]) -> str:
    series = [Series(c.label, [(r + 1, n) for r, n in c.series], "both") for c in cohorts if c.series]
    return render_svg(FigureSpec(
        title="Participation curves by cohort",
        x_label="problem (release order)",
        y_label="participants",
        series=series,
    ))


def exemplar_lines(analyses: Analyses):
    """Most and least regular Submit Lines (highest / lowest St_b)."""
    ok = sorted((s for s in analyses.submit_lines if s.ok), key=lambda s: (-s.st_b, s.user_id))
    if not ok:
        return []
    return [ok[0]] if len(ok) == 1 else [ok[0], ok[-1]]


# -- summary ------------------------------------------------------------------


def _summary(
    dataset: CohortDataset,
    clean_report: CleanReport,
    analyses: Analyses,
    raw: Optional[CohortSummary],
    baselines: Sequence[CohortSummary],
    figures: Sequence[str],
    recovery,
) -> str:
    label = dataset.label
    cur = cohort_summary(dataset)
    out = [f"# Education-intelligence report: {label}", ""]

    out += ["## Cohort overview", ""]
    if raw is not None:
        out.append(
            f"Raw export: {raw.students} students, {raw.tests} tests, {raw.problems} problems, "
            f"{raw.logs:,} logs."
        )
    out.append(
        f"After cleaning: {cur.logs:,} logs from {len(dataset.users)} accounts "
        f"({cur.students} on the roster), {len(dataset.scores)} with exam scores."
    )
    out.append("")
    for b in baselines:
        if b.logs > 0:
            change = stats.yoy_change(b.logs, raw.logs if raw else cur.logs)
            out.append(
                f"- Logs vs {b.label}: {b.logs:,} → {(raw or cur).logs:,} "
                f"({stats.format_yoy(change)} year on year); students {b.students} → {(raw or cur).students}."
            )
    if baselines:
        out.append("")

    out += ["## Cleaning", "", "| stage | logs in | logs out | removed |", "|---|---|---|---|"]
    for s in clean_report.stages:
        out.append(f"| {s.stage} | {s.logs_in} | {s.logs_out} | {s.removed} |")
    out += [
        "",
        f"- Duplicate rows removed: {clean_report.duplicates_removed}",
        f"- Logs outside their test window: {clean_report.out_of_window}",
        f"- Alt-account clusters (shared identical code): {len(clean_report.alt_clusters)}; "
        f"policy `{clean_report.alt_policy}`, {clean_report.logs_reassigned} logs reassigned, "
        f"{clean_report.logs_deleted} deleted, {len(clean_report.users_removed)} accounts removed",
        f"- Counts balance: {'yes' if clean_report.balanced else 'NO'}",
        "",
    ]

    out += ["## Variable screening (one-sample z-test)", ""]
    if clean_report.prune_rows:
        out.append(ztest_table([(label, r.symbol, r.mu0, r.p, r.result) for r in clean_report.prune_rows]))
        for r in clean_report.prune_rows:
            verdict = "excluded from models" if r.decision == "prune" else "kept"
            out.append(f"- {r.symbol} ({r.variable}): mean {r.mean:.2f} vs μ_0 {r.mu0:g}, z = {r.z:.3f}; {verdict}")
        out.append("")
    else:
        out += [f"Not run: {clean_report.prune_note}", ""]

    out += ["## Participation curve", ""]
    pf = analyses.participation_fit
    if pf is not None:
        out.append(
            f"Exponential fit n(k) = n0·exp(−λ·k) over release rank k: n0 = {pf.n0:.2f}, "
            f"λ = {pf.lam:.4f}, R² = {pf.r2:.4f} ({pf.skipped_zero} zero-participant problems skipped)."
        )
    out += ["", "![participation](figures/participation.svg)", ""]

    out += ["## AC index and exam scores", ""]
    if analyses.correlation is not None:
        out.append(correlation_table([analyses.correlation]))
        lo, hi = analyses.bands
        out.append(f"Bands on |ρ|: weak < {lo:g} ≤ moderate < {hi:g} ≤ strong; n = {analyses.correlation.n}.")
    else:
        out.append("Not available.")
    acs = [e.ac for e in analyses.ac]
    if acs:
        out.append(f"AC index: median {median(acs):g}, max {max(acs)} of {len(dataset.problems)} problems.")
    out.append("")

    out += ["## Submit Lines", ""]
    ok = [s for s in analyses.submit_lines if s.ok]
    out.append(
        f"{len(ok)} of {len(analyses.submit_lines)} accounts have a Submit Line "
        f"(at least 3 active days); the rest are marked insufficient_data."
    )
    if ok:
        out.append(
            f"Median K_b (slope, effort) {median(s.k_b for s in ok):.3f}; "
            f"median St_b (R², regularity) {median(s.st_b for s in ok):.3f}."
        )
    out.append("")
    for f in figures:
        if f.startswith("figures/submit_line") or f.startswith("figures/daily_"):
            out.append(f"- ![{Path(f).stem}]({f})")
    out.append("")

    out += ["## Early warning", ""]
    out.append(
        f"Flag rule: K_b and AC both strictly below the {analyses.warning_percentile:g}th percentile "
        f"of accounts with a Submit Line; accounts without one are flagged `inactive`. "
        f"This rule is a local heuristic, not a validated predictor."
    )
    out.append("")
    if analyses.warnings:
        for w in analyses.warnings:
            out.append(f"- {w.user_id}: {', '.join(w.reasons)}")
    else:
        out.append("No accounts flagged.")
    out.append("")

    if recovery is not None:
        out += ["## Recovery against planted truth", "", "| metric | planted | estimate | error |", "|---|---|---|---|"]
        for r in recovery.rows:
            out.append(f"| {r.metric} | {_num(r.planted, 4)} | {_num(r.estimate, 4)} | {_num(r.error, 4)} |")
        out.append("")

    out += [
        "## Method notes",
        "",
        "- Specified analytics: AC index (distinct Accepted problems), Pearson correlations, "
        "exponential participation fit, Submit Line OLS, z-test screening.",
        "- Choices made by this tool, not part of the specified analytics: (a) \"corrected\" "
        "cumulative submissions drop logs outside their test window; (b) they also drop resubmissions "
        "of a problem after the student's first Accepted on it"
        + ("" if analyses.drop_after_accept else " (switched off for this report)")
        + "; the early-warning rule; the correlation band edges; alt detection by exact code digest.",
    ]
    for note in analyses.notes:
        out.append(f"- {note}")
    out += ["", "## Files", ""]
    out += [f"- [tables/{t}](tables/{t})" for t in TABLE_FILES]
    if recovery is not None:
        out.append("- [tables/recovery.csv](tables/recovery.csv)")
    out += [f"- [{f}]({f})" for f in figures]
    return "\n".join(out) + "\n"


# -- bundle -------------------------------------------------------------------


def render_report(
    dataset: CohortDataset,
    clean_report: CleanReport,
    analyses: Analyses,
    outdir: Path | str,
    raw: Optional[CohortSummary] = None,
    baselines: Sequence[CohortSummary] = (),
    recovery=None,
) -> ReportBundle:
    """Write the full bundle for one cleaned cohort.

    ``raw`` describes the cohort before cleaning (for the overview line);
    ``baselines`` are earlier cohorts for year-on-year comparison;
    ``recovery`` is an optional simulate.RecoveryReport.
    """
    files: dict[str, bytes] = {}

    files["tables/clean_report.json"] = (json.dumps(clean_report.to_dict(), indent=1, sort_keys=True) + "\n").encode()
    files["tables/ac.csv"] = _csv(["user_id", "ac", "attempts"], [[e.user_id, e.ac, e.attempts] for e in analyses.ac])
    files["tables/submit_lines.csv"] = _csv(
        ["user_id", "k_b", "st_b", "status", "n_points"],
        [[s.user_id, _num(s.k_b), _num(s.st_b), s.status, len(s.points)] for s in analyses.submit_lines],
    )
    pid = {p.release_rank: p.id for p in dataset.problems}
    files["tables/participation.csv"] = _csv(
        ["release_rank", "problem_id", "participants"],
        [[r, pid.get(r, ""), n] for r, n in analyses.participation],
    )
    c = analyses.correlation
    files["tables/correlations.csv"] = _csv(
        ["label", "rho_ac_msc", "rho_ac_wsc", "band_msc", "band_wsc", "n"],
        [] if c is None else [[c.label, _num(c.rho_ac_msc), _num(c.rho_ac_wsc), c.band_msc, c.band_wsc, c.n]],
    )
    files["tables/ztests.csv"] = _csv(
        ["variable", "symbol", "mu0", "n", "mean", "stddev", "z", "p", "alpha", "decision", "result"],
        [[r.variable, r.symbol, f"{r.mu0:g}", r.n, _num(r.mean), _num(r.stddev), _num(r.z),
          f"{r.p:.6g}", f"{r.alpha:g}", r.decision, r.result] for r in clean_report.prune_rows],
    )
    files["tables/warnings.csv"] = _csv(
        ["user_id", "reasons"], [[w.user_id, ";".join(w.reasons)] for w in analyses.warnings]
    )
    if recovery is not None:
        files["tables/recovery.csv"] = _csv(
            ["metric", "planted", "estimate", "error", "note"],
            [[r.metric, _num(r.planted), _num(r.estimate), _num(r.error), r.note] for r in recovery.rows],
        )

    if analyses.participation:
        files["figures/participation.svg"] = participation_figure(
            dataset.label, analyses.participation, analyses.participation_fit).encode()
    picks = exemplar_lines(analyses)
    dailies = []
    for fit in picks:
        daily = daily_counts(dataset, fit.user_id)
        dailies.append(daily)
        files[f"figures/submit_line_{fit.user_id}.svg"] = submit_line_figure(fit, daily).encode()
        if daily:
            files[f"figures/daily_{fit.user_id}.svg"] = daily_figure(fit.user_id, daily).encode()
    if len(picks) == 2:
        files["figures/submit_lines_compare.svg"] = compare_figure(picks, dailies).encode()
    with_series = [b for b in baselines if b.series]
    if with_series:
        current = cohort_summary(dataset, analyses.participation)
        for b in with_series:
            files[f"figures/participation_{b.label}.svg"] = participation_figure(b.label, b.series).encode()
        files["figures/participation_overlay.svg"] = overlay_figure(list(with_series) + [current]).encode()

    figures = sorted(k for k in files if k.startswith("figures/"))
    files["summary.md"] = _summary(dataset, clean_report, analyses, raw, baselines, figures, recovery).encode()

    digests = {k: hashlib.sha256(v).hexdigest() for k, v in sorted(files.items())}
    manifest = (json.dumps({"label": dataset.label, "files": digests}, indent=1, sort_keys=True) + "\n").encode()

    outdir = Path(outdir)
    try:
        for rel, blob in files.items():
            path = outdir / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(blob)
        (outdir / "manifest.json").write_bytes(manifest)
    except OSError as exc:
        raise OutputUnwritable(f"cannot write report to {outdir}: {exc}") from exc
    return ReportBundle(outdir, digests, hashlib.sha256(manifest).hexdigest())
