"""Command-line front end.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from datetime import datetime, timedelta
from pathlib import Path

import yaml

from . import github, report
from .coupling import coupling_matrix
from .errors import DataError
from .evolution import WindowSpec, windowed_matrices
from .history import (
    History,
    ServiceMap,
    load_aliases,
    load_history,
    load_service_map,
    parse_timestamp,
    write_commit_log,
)
from .ownership import all_profiles, build_ledger
from .testkit import SynthSpec, generate_commits, synth_service_map

logger = logging.getLogger("orgcoupling")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


_WIDTH_RE = re.compile(r"^(\d+)\s*([dwh]?)$")


def parse_width(text: str) -> timedelta:
    """``365d``, ``52w``, ``12h`` or a bare number of days."""
    m = _WIDTH_RE.match(text.strip())
    if not m or int(m.group(1)) == 0:
        raise argparse.ArgumentTypeError(f"invalid window width {text!r} (try 365d)")
    unit = {"": "days", "d": "days", "w": "weeks", "h": "hours"}[m.group(2)]
    return timedelta(**{unit: int(m.group(1))})


def parse_instant(text: str) -> datetime:
    try:
        return parse_timestamp(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid date {text!r} (use YYYY-MM-DD or ISO-8601)")


def _add_inputs(p: argparse.ArgumentParser, need_map: bool = True) -> None:
    g = p.add_argument_group("inputs")
    g.add_argument("--repos", nargs="+", default=[], metavar="[SLUG=]PATH",
                   help="local git repositories (slug defaults to the directory name)")
    g.add_argument("--log", nargs="+", default=[], metavar="FILE",
                   help="JSON Lines commit logs")
    g.add_argument("--service-map", type=Path, required=need_map, metavar="FILE",
                   help="YAML/JSON service map" + ("" if need_map else " (optional)"))
    g.add_argument("--aliases", type=Path, metavar="FILE",
                   help="identity aliases, lines of 'email = id'")
    g.add_argument("--include-merges", action="store_true",
                   help="keep merge commits (diffed against their first parent)")
    g.add_argument("--jobs", type=int, default=4, help="parallel repository extractions")


def _add_output(p: argparse.ArgumentParser, formats: tuple[str, ...] = ("csv", "json")) -> None:
    p.add_argument("--out", type=Path, default=Path("orgcoupling-out"), help="output directory")
    p.add_argument("--format", dest="formats", action="append", choices=("csv", "json", "svg"),
                   help=f"artifact format, repeatable (default: {' '.join(formats)})")
    p.set_defaults(default_formats=formats)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="orgcoupling",
                     description="Organizational coupling between microservices, mined from commit history.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("ingest", help="merge repositories/logs into one commit log")
    _add_inputs(p, need_map=False)
    p.add_argument("--out", type=Path, default=Path("orgcoupling-out"))

    p = sub.add_parser("fetch", help="mine GitHub repositories into commit logs")
    p.add_argument("--repo", dest="gh_repos", nargs="+", required=True, metavar="OWNER/NAME")
    p.add_argument("--since", type=parse_instant)
    p.add_argument("--until", type=parse_instant)
    p.add_argument("--token-env", default=github.TOKEN_ENV,
                   help="environment variable holding the API token (default: %(default)s)")
    p.add_argument("--cache-dir", type=Path, default=Path(".orgcoupling-cache"))
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--rate-policy", choices=("wait", "fail"), default="wait")
    p.add_argument("--api-url", default=github.API_URL)
    p.add_argument("--include-merges", action="store_true")
    p.add_argument("--out", type=Path, default=Path("orgcoupling-out"))

    p = sub.add_parser("ownership", help="team ownership profiles per service")
    _add_inputs(p)
    p.add_argument("--cutoff", type=parse_instant, help="ignore commits after this instant")
    p.add_argument("--out", type=Path, default=Path("orgcoupling-out"))

    p = sub.add_parser("coupling", help="pairwise organizational coupling matrix")
    _add_inputs(p)
    p.add_argument("--cutoff", type=parse_instant, help="ignore commits after this instant")
    _add_output(p)

    p = sub.add_parser("evolve", help="coupling matrices over consecutive windows")
    _add_inputs(p)
    p.add_argument("--start", type=parse_instant)
    p.add_argument("--windows", type=int, default=1)
    p.add_argument("--width", type=parse_width, default=timedelta(days=365))
    p.add_argument("--boundaries", nargs="+", type=parse_instant, metavar="DATE",
                   help="explicit window edges (overrides --start/--windows/--width)")
    _add_output(p)

    p = sub.add_parser("heatmap", help="render an SVG heatmap")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--matrix", type=Path, help="matrix.json from `coupling`")
    src.add_argument("--series", type=Path, help="series.json from `evolve`")
    _add_inputs(p, need_map=False)
    p.add_argument("--cutoff", type=parse_instant)
    p.add_argument("--title")
    p.add_argument("--out", type=Path, default=Path("orgcoupling-out"))

    p = sub.add_parser("generate", help="write a seeded synthetic commit log")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--services", type=int, default=4)
    p.add_argument("--developers", type=int, default=8)
    p.add_argument("--commits", type=int, default=200)
    p.add_argument("--cross-rate", type=float, default=0.3)
    p.add_argument("--both-rate", type=float, default=0.3)
    p.add_argument("--churn", type=int, nargs=2, default=(0, 40), metavar=("MIN", "MAX"))
    p.add_argument("--start", type=parse_instant, default=parse_timestamp("2017-06-05"))
    p.add_argument("--max-gap", type=parse_width, default=timedelta(days=3))
    p.add_argument("--out", type=Path, default=Path("orgcoupling-out"))
    return parser


def _check_readable(path: Path | None, flag: str) -> None:
    if path is not None and not path.exists():
        raise UsageError(f"{flag}: no such file: {path}")


def _sources(args) -> list:
    if not args.repos and not args.log:
        raise UsageError("no input: pass --repos and/or --log")
    sources: list = []
    for spec in args.repos:
        slug, sep, path = spec.partition("=")
        if not sep:
            slug, path = None, spec
        if not Path(path).is_dir():
            raise UsageError(f"--repos: not a directory: {path}")
        sources.append((slug, path) if slug else path)
    for path in args.log:
        if not Path(path).is_file():
            raise UsageError(f"--log: no such file: {path}")
        sources.append(path)
    return sources


def _history(args, service_map: ServiceMap | None = None) -> History:
    sources = _sources(args)
    if service_map is None:
        if args.service_map is None:
            raise UsageError("--service-map is required for this command")
        _check_readable(args.service_map, "--service-map")
        service_map = load_service_map(args.service_map)
    _check_readable(args.aliases, "--aliases")
    aliases = load_aliases(args.aliases) if args.aliases else {}
    history = load_history(sources, service_map, aliases, args.include_merges, args.jobs)
    cutoff = getattr(args, "cutoff", None)
    return history.until(cutoff) if cutoff else history


def _print_summary(history: History) -> None:
    s = history.summary()
    print(f"{s['commits']} commits by {s['developers']} developers, "
          f"{s['file_changes']} file changes ({s['churn']} lines churned) "
          f"across {len(history.services)} services")


def _formats(args) -> list[str]:
    return args.formats or list(args.default_formats)


def cmd_ingest(args) -> int:
    # ingest keeps raw identities and paths; a catch-all map only feeds the summary
    _check_readable(args.service_map, "--service-map")
    smap = load_service_map(args.service_map) if args.service_map else ServiceMap.from_dict(
        {"rules": [{"service": "all", "repo_pattern": "**", "path_pattern": "**"}]})
    history = _history(args, smap)
    out = args.out / "commits.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_commit_log((c.raw() for c in history.commits), out)
    _print_summary(history)
    print(f"wrote {out}")
    return 0


def cmd_fetch(args) -> int:
    token = os.environ.get(args.token_env) or None
    if token is None:
        logger.warning("%s not set; using the unauthenticated rate limit", args.token_env)
    args.out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for full in args.gh_repos:
        owner, sep, name = full.partition("/")
        if not sep or not owner or not name:
            raise UsageError(f"--repo: expected OWNER/NAME, got {full!r}")
        job = github.FetchJob(
            owner=owner, repo=name, since=args.since, until=args.until, token=token,
            cache_dir=args.cache_dir, base_url=args.api_url, parallelism=args.parallelism,
            rate_policy=args.rate_policy, include_merges=args.include_merges,
        )
        commits, rep = github.fetch_repo_commits(job)
        path = args.out / f"{name}.jsonl"
        write_commit_log(commits, path)
        reports[full] = vars(rep)
        print(f"{full}: {rep.commits_fetched} commits ({rep.commits_from_cache} cached, "
              f"{rep.requests_made} requests) -> {path}")
    (args.out / "fetch_report.json").write_text(json.dumps(reports, indent=2) + "\n")
    return 0


def cmd_ownership(args) -> int:
    history = _history(args)
    profiles = all_profiles(build_ledger(history))
    written = report.write_ownership(profiles, args.out)
    _print_summary(history)
    for svc, prof in profiles.items():
        leaders = ", ".join(f"{e.developer} ({100 * e.ownership:.2f}%)" for e in prof.leaders)
        print(f"  {svc}: {len(prof.entries)} members, {len(prof.majors)} major, leader {leaders}")
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def cmd_coupling(args) -> int:
    history = _history(args)
    matrix = coupling_matrix(history)
    written = report.write_matrix(matrix, args.out, formats=_formats(args))
    _print_summary(history)
    top = sorted(matrix.pairs(), key=lambda p: -p[2])[:5]
    for a, b, oc, band, p in top:
        print(f"  {a} / {b}: {oc:.2f} ({band.value}, {p} shared developers)")
    print(f"wrote {', '.join(str(w) for w in written)}")
    return 0


def cmd_evolve(args) -> int:
    history = _history(args)
    if args.boundaries:
        spec = WindowSpec.from_boundaries(args.boundaries)
    else:
        if args.start is None:
            raise UsageError("--start (or --boundaries) is required for evolve")
        spec = WindowSpec(args.start, args.width, args.windows)
    series = windowed_matrices(history, spec, jobs=args.jobs)
    written = report.write_series(series, args.out, _formats(args))
    _print_summary(history)
    for (lo, hi), m in series.windows:
        print(f"  {lo.date()} .. {hi.date()}: total OC {m.values.sum() / 2:.2f}")
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def cmd_heatmap(args) -> int:
    if args.series:
        _check_readable(args.series, "--series")
        series = report.series_from_dict(json.loads(args.series.read_text(encoding="utf-8")))
        out = args.out / "evolution.svg"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.render_series(series), encoding="utf-8")
    else:
        if args.matrix:
            _check_readable(args.matrix, "--matrix")
            matrix = report.read_matrix(args.matrix)
        else:
            matrix = coupling_matrix(_history(args))
        out = args.out / "heatmap.svg"
        report.render_heatmap(matrix, out, title=args.title)
    print(f"wrote {out}")
    return 0


def cmd_generate(args) -> int:
    spec = SynthSpec(
        seed=args.seed, n_services=args.services, n_developers=args.developers,
        n_commits=args.commits, cross_contribution_rate=args.cross_rate,
        both_touch_rate=args.both_rate, churn_range=tuple(args.churn), start=args.start,
        max_gap=args.max_gap,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    n = write_commit_log(generate_commits(spec), args.out / "commits.jsonl")
    with open(args.out / "service-map.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(synth_service_map(spec).to_dict(), fh, sort_keys=False)
    print(f"wrote {n} commits to {args.out / 'commits.jsonl'} "
          f"and {args.out / 'service-map.yaml'}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "fetch": cmd_fetch,
    "ownership": cmd_ownership,
    "coupling": cmd_coupling,
    "evolve": cmd_evolve,
    "heatmap": cmd_heatmap,
    "generate": cmd_generate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("run with --help for usage", file=sys.stderr)
        return 1
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
