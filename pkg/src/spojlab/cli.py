"""Command-line pipeline: ingest → clean → analyze → report.

Every stage reads and writes plain directories, so stages can be run one at
a time or all at once::

    spojlab simulate --preset y2017 --seed 42 --out sim/
    spojlab ingest --input export.csv --profile hustoj --out raw/
    spojlab clean --data raw/ --out cleaned/
    spojlab analyze --data cleaned/ --out analyzed/
    spojlab report --data analyzed/ --out report/
    spojlab all --data sim/ --out report/

Exit codes: 0 success, 1 usage error, 2 parse error, 3 validation error.
Options can also come from a JSON ``--config`` file; flags win over it.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Optional, Sequence

from . import clean as clean_mod
from . import datamodel as dm
from . import ingest, models, report, simulate
from .errors import (
    BadVerdictMap,
    ConfigInvalid,
    MissingField,
    ProfileError,
    ValidationFailed,
)

log = logging.getLogger("spojlab")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3

CLEAN_REPORT = "clean_report.json"
ANALYSIS = "analysis.json"
RAW_SUMMARY = "raw_summary.json"
TRUTH = "truth.json"

DEFAULTS: dict[str, Any] = {
    "alt_policy": "reassign",
    "alpha": 0.05,
    "bands": "0.4,0.8",
    "warning_percentile": 20.0,
    "seed": 0,
    "preset": None,
    "tz": dm.DEFAULT_TZ_OFFSET_HOURS,
}


class UsageError(Exception):
    pass


class ParseFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


# -- option resolution -------------------------------------------------------


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigInvalid(f"config {path} must be a JSON object")
    return doc


def _opt(args, config: dict, name: str):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, DEFAULTS.get(name))


def _bands(text) -> tuple[float, float]:
    try:
        parts = [float(x) for x in text] if isinstance(text, (list, tuple)) else [float(x) for x in str(text).split(",")]
    except ValueError as exc:
        raise UsageError(f"--bands expects two numbers like 0.4,0.8, got {text!r}") from exc
    if len(parts) != 2 or not 0 < parts[0] < parts[1] < 1:
        raise UsageError(f"--bands needs 0 < low < high < 1, got {text!r}")
    return parts[0], parts[1]


def _required_dir(path: Optional[str], flag: str) -> Path:
    if not path:
        raise UsageError(f"{flag} is required")
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{flag} {path}: not a directory")
    return p


# -- stage helpers ------------------------------------------------------------


def _ingest(args, config: dict) -> dm.CohortDataset:
    if not args.input:
        raise UsageError("--input is required")
    profile_name = args.profile or config.get("profile")
    if not profile_name:
        raise UsageError("--profile is required (a shipped name or a JSON file)")
    if not Path(profile_name).is_file() and profile_name not in ingest.shipped_profiles():
        raise UsageError(f"no such profile {profile_name!r} (shipped: {', '.join(ingest.shipped_profiles())})")
    profile = ingest.get_profile(profile_name)
    ip_map_path = args.ip_map or config.get("ip_map")
    ip_map = ingest.CampusIpMap.from_json(Path(ip_map_path).read_text(encoding="utf-8")) if ip_map_path else None

    try:
        logs, errors = ingest.parse_logs_file(args.input, args.format or config.get("format"), profile)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc
    for err in errors:
        print(f"{args.input}: {err}", file=sys.stderr)
    if errors and not args.skip_bad_rows:
        raise ParseFailed(f"{len(errors)} unparseable row(s); rerun with --skip-bad-rows to drop them")

    roster = []
    if args.roster:
        with open(args.roster, encoding="utf-8", newline="") as fh:
            roster = ingest.read_roster(fh)
    scores = []
    if args.scores:
        with open(args.scores, encoding="utf-8", newline="") as fh:
            scores = ingest.read_scores(fh)
    if args.problems and args.tests:
        problems = dm.problems_from_json(json.loads(Path(args.problems).read_text(encoding="utf-8")))
        tests = dm.tests_from_json(json.loads(Path(args.tests).read_text(encoding="utf-8")))
    elif args.problems or args.tests:
        raise UsageError("--problems and --tests must be given together")
    else:
        problems, tests = ingest.infer_catalog(logs)
    label = args.label or config.get("label") or Path(args.input).stem
    tz = float(_opt(args, config, "tz"))
    return ingest.build_dataset(
        logs, problems, tests, ingest.merge_users(logs, roster), scores, label, tz=tz, ip_map=ip_map
    )


def _clean(dataset: dm.CohortDataset, args, config: dict):
    policy = _opt(args, config, "alt_policy")
    if policy not in clean_mod.ALT_POLICIES:
        raise UsageError(f"--alt-policy must be one of {', '.join(clean_mod.ALT_POLICIES)}")
    alpha = float(_opt(args, config, "alpha"))
    if not 0 < alpha < 1:
        raise UsageError("--alpha must be in (0, 1)")
    return clean_mod.clean(dataset, policy=policy, configs=clean_mod.default_ztest_configs(alpha))


def _analyze(dataset: dm.CohortDataset, args, config: dict) -> models.Analyses:
    return models.analyze(
        dataset,
        bands=_bands(_opt(args, config, "bands")),
        warning_percentile=float(_opt(args, config, "warning_percentile")),
    )


def _baselines(args) -> list[report.CohortSummary]:
    out = []
    for path in args.baseline or ():
        ds = ingest.read_dataset(_required_dir(path, "--baseline"))
        out.append(report.cohort_summary(ds, models.participation_series(ds)))
    return out


def _summary_to_json(s: report.CohortSummary) -> str:
    d = asdict(s)
    d["series"] = [list(p) for p in s.series]
    return json.dumps(d, indent=1, sort_keys=True) + "\n"


def _summary_from_json(path: Path) -> Optional[report.CohortSummary]:
    if not path.exists():
        return None
    d = json.loads(path.read_text(encoding="utf-8"))
    d["series"] = tuple(tuple(p) for p in d["series"])
    return report.CohortSummary(**d)


def _carry(src: Path, dst: Path, names: Sequence[str]) -> None:
    for name in names:
        if (src / name).exists() and src.resolve() != dst.resolve():
            shutil.copyfile(src / name, dst / name)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _render(dataset, clean_report, analyses, raw, truth, args) -> report.ReportBundle:
    recovery = None
    if truth is not None:
        recovery = simulate.truth_check(None, truth, analyses, clean_report)
    bundle = report.render_report(
        dataset, clean_report, analyses, args.out, raw=raw, baselines=_baselines(args), recovery=recovery
    )
    print(f"report written to {args.out} (manifest sha256 {bundle.digest})")
    return bundle


# -- subcommands --------------------------------------------------------------


def cmd_ingest(args, config) -> int:
    out = Path(args.out)
    dataset = _ingest(args, config)
    dm.write_dataset(dataset, out)
    print(f"{len(dataset.logs)} logs, {len(dataset.users)} users, {len(dataset.problems)} problems → {out}")
    return EXIT_OK


def cmd_simulate(args, config) -> int:
    name = _opt(args, config, "preset")
    overrides = dict(config.get("simulation", {}))
    try:
        cfg = simulate.preset(name, **overrides) if name else simulate.SimConfig.from_dict(overrides)
        cfg.check()
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad simulation config: {exc}") from exc
    seed = int(_opt(args, config, "seed"))
    dataset, truth = simulate.simulate_cohort(cfg, seed)
    simulate.write_simulation(dataset, truth, args.out)
    print(f"simulated {len(dataset.logs)} logs for {len(truth.students)} students (seed {seed}) → {args.out}")
    return EXIT_OK


def cmd_clean(args, config) -> int:
    src = _required_dir(args.data, "--data")
    out = Path(args.out)
    raw = ingest.read_dataset(src)
    cleaned, rep = _clean(raw, args, config)
    dm.write_dataset(cleaned, out)
    _write_json(out / CLEAN_REPORT, rep.to_dict())
    prior = _summary_from_json(src / RAW_SUMMARY)
    (out / RAW_SUMMARY).write_text(_summary_to_json(prior or report.cohort_summary(raw)), encoding="utf-8")
    _carry(src, out, [TRUTH])
    print(f"{rep.input_logs} → {rep.output_logs} logs; {len(rep.alt_clusters)} alt cluster(s) → {out}")
    return EXIT_OK


def cmd_analyze(args, config) -> int:
    src = _required_dir(args.data, "--data")
    if not (src / CLEAN_REPORT).exists():
        raise UsageError(f"{src} has no {CLEAN_REPORT}; run `clean` first")
    out = Path(args.out)
    dataset = ingest.read_dataset(src)
    analyses = _analyze(dataset, args, config)
    dm.write_dataset(dataset, out)
    _write_json(out / ANALYSIS, analyses.to_dict())
    _carry(src, out, [CLEAN_REPORT, RAW_SUMMARY, TRUTH])
    print(f"analyzed {len(analyses.ac)} accounts; {len(analyses.warnings)} flagged → {out}")
    return EXIT_OK


def cmd_report(args, config) -> int:
    src = _required_dir(args.data, "--data")
    for name in (CLEAN_REPORT, ANALYSIS):
        if not (src / name).exists():
            raise UsageError(f"{src} has no {name}; run `clean` and `analyze` first")
    dataset = ingest.read_dataset(src)
    clean_report = clean_mod.CleanReport.from_dict(json.loads((src / CLEAN_REPORT).read_text(encoding="utf-8")))
    analyses = models.Analyses.from_dict(json.loads((src / ANALYSIS).read_text(encoding="utf-8")))
    _render(dataset, clean_report, analyses, _summary_from_json(src / RAW_SUMMARY), simulate.read_truth(src), args)
    return EXIT_OK


def cmd_all(args, config) -> int:
    if args.data:
        src = _required_dir(args.data, "--data")
        raw = ingest.read_dataset(src)
        truth = simulate.read_truth(src)
    elif args.input:
        raw = _ingest(args, config)
        truth = None
    else:
        raise UsageError("`all` needs --data (a dataset directory) or --input (a raw export)")
    cleaned, clean_report = _clean(raw, args, config)
    analyses = _analyze(cleaned, args, config)
    # Round-trip the intermediate documents so `all` matches the staged path byte for byte.
    clean_report = clean_mod.CleanReport.from_dict(json.loads(json.dumps(clean_report.to_dict())))
    analyses = models.Analyses.from_dict(json.loads(json.dumps(analyses.to_dict())))
    _render(cleaned, clean_report, analyses, report.cohort_summary(raw), truth, args)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "clean": cmd_clean,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "report": cmd_report,
    "all": cmd_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spojlab", description="Online Judge course analytics pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(p, out_required=True):
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--config", help="JSON file of option defaults")

    def ingest_opts(p, required=False):
        p.add_argument("--input", required=required, help="raw log export (CSV or JSONL)")
        p.add_argument("--format", choices=("csv", "jsonl"), help="default: from the file extension")
        p.add_argument("--profile", required=required, help="schema profile: hustoj, qduoj, generic, canonical, or a JSON path")
        p.add_argument("--ip-map", dest="ip_map", help="JSON CIDR→location map")
        p.add_argument("--roster", help="CSV user_id,roster_no[,username]")
        p.add_argument("--scores", help="CSV user_id,msc,wsc")
        p.add_argument("--problems", help="problems.json catalog (needs --tests)")
        p.add_argument("--tests", help="tests.json windows (needs --problems)")
        p.add_argument("--label", help="cohort label, e.g. 2017")
        p.add_argument("--tz", type=float, help="UTC offset in hours for day boundaries (default 8)")
        p.add_argument("--skip-bad-rows", dest="skip_bad_rows", action="store_true",
                       help="drop unparseable rows instead of failing")

    def clean_opts(p):
        p.add_argument("--alt-policy", dest="alt_policy", choices=clean_mod.ALT_POLICIES)
        p.add_argument("--alpha", type=float, help="z-test significance level (default 0.05)")

    def analyze_opts(p):
        p.add_argument("--bands", help="correlation band edges, e.g. 0.4,0.8")
        p.add_argument("--warning-percentile", dest="warning_percentile", type=float)

    def report_opts(p):
        p.add_argument("--baseline", action="append", help="earlier cohort dataset directory (repeatable)")

    p = sub.add_parser("ingest", help="parse a raw export into a dataset directory")
    common(p)
    ingest_opts(p, required=True)

    p = sub.add_parser("clean", help="dedup, window filter, alt accounts, variable screening")
    common(p)
    p.add_argument("--data", help="dataset directory")
    clean_opts(p)

    p = sub.add_parser("analyze", help="AC index, correlations, participation, Submit Lines")
    common(p)
    p.add_argument("--data", help="cleaned dataset directory")
    analyze_opts(p)

    p = sub.add_parser("simulate", help="generate a synthetic cohort with planted truth")
    common(p)
    p.add_argument("--preset", choices=sorted(simulate.PRESETS))
    p.add_argument("--seed", type=int)

    p = sub.add_parser("report", help="render the report bundle from an analyzed directory")
    common(p)
    p.add_argument("--data", help="analyzed dataset directory")
    report_opts(p)

    p = sub.add_parser("all", help="run clean, analyze and report in one go")
    common(p)
    p.add_argument("--data", help="dataset directory (alternative to --input)")
    ingest_opts(p)
    clean_opts(p)
    analyze_opts(p)
    report_opts(p)
    p.add_argument("--seed", type=int, help="accepted for symmetry; the pipeline itself is not random")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args.config)
        return COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"spojlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigInvalid, OSError) as exc:
        print(f"spojlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseFailed, ProfileError, MissingField, BadVerdictMap, UnicodeDecodeError,
            json.JSONDecodeError) as exc:
        print(f"spojlab {args.command}: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationFailed as exc:
        print(f"spojlab {args.command}: validation failed:", file=sys.stderr)
        for v in exc.report.violations[:50]:
            print(f"  [{v.rule}] {v.entity}: {v.detail}", file=sys.stderr)
        if len(exc.report.violations) > 50:
            print(f"  ... {len(exc.report.violations) - 50} more", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
