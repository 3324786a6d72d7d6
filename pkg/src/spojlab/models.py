"""Behavioral models over a cleaned cohort.

* AC index: distinct problems a student has at least one Accepted log on.
* AC vs exam score Pearson correlations, labelled weak / moderate / strong.
* Participation curve: distinct participants per problem in release order,
  with a log-linear exponential-decay fit ``n(k) = n0 * exp(-lambda * k)``.
* Submit Line: OLS of a student's corrected cumulative submission count
  against ln(day index); slope ``k_b`` measures effort, R^2 ``st_b``
  measures how regularly the work is spread.
* Early warning: students low on both k_b and AC, plus inactive ones.
  This fusion rule is a local heuristic, not a validated model.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import stats
from .datamodel import CohortDataset, LogRecord, natural_key
from .errors import StatsError, TooFewPositive, UnknownUser

log = logging.getLogger(__name__)

DEFAULT_BANDS = (0.4, 0.8)
BAND_LABELS = ("weak", "moderate", "strong")
MIN_SUBMIT_LINE_POINTS = 3


@dataclass(frozen=True)
class AcEntry:
    user_id: str
    ac: int
    attempts: int


@dataclass(frozen=True)
class CorrelationRow:
    label: str
    rho_ac_msc: float
    rho_ac_wsc: float
    band_msc: str
    band_wsc: str
    n: int = 0


@dataclass(frozen=True)
class ParticipationFit:
    series: tuple[tuple[int, int], ...]
    n0: float
    lam: float
    r2: float
    skipped_zero: int = 0


@dataclass(frozen=True)
class SubmitLineFit:
    user_id: str
    k_b: Optional[float]
    st_b: Optional[float]
    points: tuple[tuple[float, int], ...]
    status: str  # "ok" | "insufficient_data"
    intercept: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class EarlyWarning:
    user_id: str
    reasons: tuple[str, ...]


def _require_user(dataset: CohortDataset, user_id: str) -> None:
    if user_id not in {u.user_id for u in dataset.users}:
        raise UnknownUser(user_id)


# -- AC index ---------------------------------------------------------------


def _ac_from_logs(user_id: str, logs: Iterable[LogRecord]) -> AcEntry:
    solved: set[str] = set()
    attempts = 0
    for lg in logs:
        attempts += 1
        if lg.verdict.accepted:
            solved.add(lg.problem_id)
    return AcEntry(user_id, len(solved), attempts)


def ac_index(dataset: CohortDataset, user_id: str) -> AcEntry:
    _require_user(dataset, user_id)
    return _ac_from_logs(user_id, (lg for lg in dataset.logs if lg.user_id == user_id))


def ac_table(dataset: CohortDataset) -> list[AcEntry]:
    grouped = dataset.logs_by_user()
    return [_ac_from_logs(uid, grouped.get(uid, ())) for uid in dataset.user_ids()]


# -- correlations -----------------------------------------------------------


def classify_band(rho: float, bands: Sequence[float] = DEFAULT_BANDS) -> str:
    lo, hi = bands
    r = abs(rho)
    if r < lo:
        return "weak"
    if r < hi:
        return "moderate"
    return "strong"


def ac_score_correlation(
    dataset: CohortDataset,
    bands: Sequence[float] = DEFAULT_BANDS,
    ac_entries: Optional[Sequence[AcEntry]] = None,
) -> CorrelationRow:
    """Pearson rho of AC against MSC and WSC over users that have scores."""
    entries = {e.user_id: e for e in (ac_entries if ac_entries is not None else ac_table(dataset))}
    pairs = [(entries[s.user_id].ac, s.msc, s.wsc) for s in dataset.scores if s.user_id in entries]
    ac = [float(p[0]) for p in pairs]
    rho_m = stats.pearson(ac, [p[1] for p in pairs])
    rho_w = stats.pearson(ac, [p[2] for p in pairs])
    return CorrelationRow(
        label=dataset.label,
        rho_ac_msc=rho_m,
        rho_ac_wsc=rho_w,
        band_msc=classify_band(rho_m, bands),
        band_wsc=classify_band(rho_w, bands),
        n=len(pairs),
    )


# -- participation ----------------------------------------------------------


def participation_series(dataset: CohortDataset) -> list[tuple[int, int]]:
    users_on: dict[str, set[str]] = {p.id: set() for p in dataset.problems}
    for lg in dataset.logs:
        users_on.setdefault(lg.problem_id, set()).add(lg.user_id)
    ordered = sorted(dataset.problems, key=lambda p: p.release_rank)
    return [(p.release_rank, len(users_on[p.id])) for p in ordered]


def fit_participation(series: Sequence[tuple[int, float]]) -> ParticipationFit:
    """Log-linear OLS of ln(participants) on release rank.

    Zero-participant problems are skipped (and counted); at least three
    positive entries are required.
    """
    positive = [(float(k), math.log(n)) for k, n in series if n > 0]
    skipped = sum(1 for _, n in series if n <= 0)
    if len(positive) < 3:
        raise TooFewPositive(f"participation fit needs >= 3 positive entries, got {len(positive)}")
    if skipped:
        log.debug("participation fit skipped %d zero-participant problem(s)", skipped)
    fit = stats.ols(positive)
    return ParticipationFit(
        series=tuple((int(k), n) for k, n in series),
        n0=math.exp(fit.intercept),
        lam=-fit.slope if fit.slope else 0.0,
        r2=fit.r2,
        skipped_zero=skipped,
    )


# -- Submit Line ------------------------------------------------------------


def day_index(dataset: CohortDataset, t) -> int:
    """1-based local calendar day counted from the semester start."""
    return 1 + (dataset.local_date(t) - dataset.local_date(dataset.semester_start)).days


def _corrected_points(
    dataset: CohortDataset, logs: Iterable[LogRecord], drop_after_accept: bool
) -> list[tuple[float, int]]:
    tests = dataset.test_by_id()
    solved: set[str] = set()
    per_day: dict[int, int] = {}
    for lg in sorted(logs, key=lambda x: x.sort_key):
        if not tests[lg.test_id].contains(lg.in_time):
            continue
        if drop_after_accept and lg.problem_id in solved:
            continue
        if lg.verdict.accepted:
            solved.add(lg.problem_id)
        d = day_index(dataset, lg.in_time)
        per_day[d] = per_day.get(d, 0) + 1
    points = []
    cum = 0
    for d in sorted(per_day):
        cum += per_day[d]
        points.append((math.log(d), cum))
    return points


def corrected_cumulative(
    dataset: CohortDataset, user_id: str, drop_after_accept: bool = True
) -> list[tuple[float, int]]:
    """(ln day, cumulative count) per active day.

    Only in-window logs count, and with ``drop_after_accept`` a student's
    logs on a problem after their first Accepted on it are ignored.
    """
    _require_user(dataset, user_id)
    return _corrected_points(
        dataset, (lg for lg in dataset.logs if lg.user_id == user_id), drop_after_accept
    )


def fit_submit_line(user_id: str, points: Sequence[tuple[float, float]]) -> SubmitLineFit:
    """OLS of cumulative count on ln(day); needs 3 points over 2+ distinct days."""
    distinct = len({x for x, _ in points})
    if len(points) < MIN_SUBMIT_LINE_POINTS or distinct < 2:
        return SubmitLineFit(user_id, None, None, tuple(points), "insufficient_data")
    fit = stats.ols(points)
    return SubmitLineFit(user_id, fit.slope, fit.r2, tuple(points), "ok", fit.intercept)


def submit_line(dataset: CohortDataset, user_id: str, drop_after_accept: bool = True) -> SubmitLineFit:
    return fit_submit_line(user_id, corrected_cumulative(dataset, user_id, drop_after_accept))


def submit_lines(dataset: CohortDataset, drop_after_accept: bool = True) -> list[SubmitLineFit]:
    grouped = dataset.logs_by_user()
    return [
        fit_submit_line(uid, _corrected_points(dataset, grouped.get(uid, ()), drop_after_accept))
        for uid in dataset.user_ids()
    ]


def daily_counts(dataset: CohortDataset, user_id: str) -> list[tuple[int, int]]:
    """Raw submissions per active day index (the bars under a Submit Line)."""
    per_day: dict[int, int] = {}
    for lg in dataset.logs:
        if lg.user_id == user_id:
            d = day_index(dataset, lg.in_time)
            per_day[d] = per_day.get(d, 0) + 1
    return sorted(per_day.items())


# -- early warning ----------------------------------------------------------


def early_warning(
    dataset: CohortDataset,
    percentile: float = 20.0,
    ac_entries: Optional[Sequence[AcEntry]] = None,
    lines: Optional[Sequence[SubmitLineFit]] = None,
) -> list[EarlyWarning]:
    """Flag students strictly below the cohort percentile on both k_b and AC.

    Percentiles are taken over students with a usable Submit Line; students
    without one are flagged "inactive".
    """
    ac_entries = ac_table(dataset) if ac_entries is None else ac_entries
    lines = submit_lines(dataset) if lines is None else lines
    ac_of = {e.user_id: e.ac for e in ac_entries}
    ok = [ln for ln in lines if ln.ok]
    flags: list[EarlyWarning] = []
    if ok:
        kb_cut = stats.percentile([ln.k_b for ln in ok], percentile)
        ac_cut = stats.percentile([float(ac_of.get(ln.user_id, 0)) for ln in ok], percentile)
    for ln in lines:
        if not ln.ok:
            flags.append(EarlyWarning(ln.user_id, ("inactive",)))
        elif ln.k_b < kb_cut and ac_of.get(ln.user_id, 0) < ac_cut:
            flags.append(EarlyWarning(ln.user_id, ("low_k_b", "low_ac")))
    flags.sort(key=lambda w: natural_key(w.user_id))
    return flags


# -- bundle of analyses -----------------------------------------------------


@dataclass
class Analyses:
    label: str
    ac: list[AcEntry]
    submit_lines: list[SubmitLineFit]
    participation: list[tuple[int, int]]
    participation_fit: Optional[ParticipationFit]
    correlation: Optional[CorrelationRow]
    warnings: list[EarlyWarning]
    bands: tuple[float, float] = DEFAULT_BANDS
    warning_percentile: float = 20.0
    drop_after_accept: bool = True
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        pf = self.participation_fit
        c = self.correlation
        return {
            "label": self.label,
            "bands": list(self.bands),
            "warning_percentile": self.warning_percentile,
            "drop_after_accept": self.drop_after_accept,
            "ac": [[e.user_id, e.ac, e.attempts] for e in self.ac],
            "submit_lines": [
                {
                    "user_id": s.user_id, "k_b": s.k_b, "st_b": s.st_b, "intercept": s.intercept,
                    "status": s.status, "points": [list(p) for p in s.points],
                }
                for s in self.submit_lines
            ],
            "participation": [list(p) for p in self.participation],
            "participation_fit": None if pf is None else {
                "n0": pf.n0, "lambda": pf.lam, "r2": pf.r2, "skipped_zero": pf.skipped_zero,
            },
            "correlation": None if c is None else {
                "rho_ac_msc": c.rho_ac_msc, "rho_ac_wsc": c.rho_ac_wsc,
                "band_msc": c.band_msc, "band_wsc": c.band_wsc, "n": c.n,
            },
            "warnings": [[w.user_id, list(w.reasons)] for w in self.warnings],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Analyses":
        series = [tuple(p) for p in d["participation"]]
        pf = d["participation_fit"]
        c = d["correlation"]
        return cls(
            label=d["label"],
            ac=[AcEntry(u, a, n) for u, a, n in d["ac"]],
            submit_lines=[
                SubmitLineFit(s["user_id"], s["k_b"], s["st_b"], tuple(tuple(p) for p in s["points"]),
                              s["status"], s["intercept"])
                for s in d["submit_lines"]
            ],
            participation=series,
            participation_fit=None if pf is None else ParticipationFit(
                tuple(series), pf["n0"], pf["lambda"], pf["r2"], pf["skipped_zero"]),
            correlation=None if c is None else CorrelationRow(
                d["label"], c["rho_ac_msc"], c["rho_ac_wsc"], c["band_msc"], c["band_wsc"], c["n"]),
            warnings=[EarlyWarning(u, tuple(r)) for u, r in d["warnings"]],
            bands=tuple(d["bands"]),
            warning_percentile=d["warning_percentile"],
            drop_after_accept=d["drop_after_accept"],
            notes=list(d["notes"]),
        )


def analyze(
    dataset: CohortDataset,
    bands: Sequence[float] = DEFAULT_BANDS,
    warning_percentile: float = 20.0,
    drop_after_accept: bool = True,
) -> Analyses:
    notes: list[str] = []
    ac = ac_table(dataset)
    lines = submit_lines(dataset, drop_after_accept)
    series = participation_series(dataset)
    try:
        pfit = fit_participation(series)
    except StatsError as exc:
        pfit = None
        notes.append(f"participation fit unavailable: {exc}")
    try:
        corr = ac_score_correlation(dataset, bands, ac)
    except StatsError as exc:
        corr = None
        notes.append(f"AC/score correlation unavailable: {exc}")
    warnings = early_warning(dataset, warning_percentile, ac, lines)
    return Analyses(
        label=dataset.label,
        ac=ac,
        submit_lines=lines,
        participation=series,
        participation_fit=pfit,
        correlation=corr,
        warnings=warnings,
        bands=(float(bands[0]), float(bands[1])),
        warning_percentile=warning_percentile,
        drop_after_accept=drop_after_accept,
        notes=notes,
    )
