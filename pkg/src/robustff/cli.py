"""Command-line interface: ``robustff eval|oracle|search|verify|afd``.

Exit status: 0 on success, 1 on usage or parse errors, 2 when a
verification (oracle comparison or property suite) fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path

from .criteria import (
    CriterionSpec,
    check_proposition_orderings,
    closed_form_s2,
    coefficients_sf0,
    coefficients_sFg,
    d_fg,
    parse_criteria,
    s2_oracle,
)
from .design import Design, DesignParseError, Encoding, bs_spectrum, parse_design
from .f2 import affine_dimension, is_affinely_full_dimensional, max_abs_ratio_below_one
from .models import (
    ModelDistribution,
    Scenario,
    ScenarioCounts,
    parse_explicit_weights,
)
from .search import SearchConfig, SearchSpaceTooLarge, canonicalize, run_search

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2
DEFAULT_MAX_SUPPORT = 10 ** 6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def decimal6(x: Fraction) -> str:
    with localcontext() as ctx:
        ctx.prec = 6
        return format(Decimal(x.numerator) / Decimal(x.denominator), "g")


def exact(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _int_range(text: str) -> range:
    lo, sep, hi = text.partition("..")
    try:
        return range(int(lo), int(hi if sep else lo) + 1)
    except ValueError:
        raise UsageError(f"bad integer range {text!r}") from None


def parse_scenario(text: str, m: int) -> ModelDistribution:
    """Scenario syntax: ``sf0:f=K``, ``sFg:g=K``, ``s31``, ``hier:f=K,g=L``,
    ``hier-gf:f=K,g=L`` or ``explicit:PATH``."""
    tag, _, params = text.partition(":")
    try:
        if tag == "explicit":
            return parse_explicit_weights(Path(params).read_text(encoding="utf-8"), m)
        if tag in ("sf0", "sFg", "s31"):
            specs = parse_criteria(text)
            if len(specs) != 1:
                raise UsageError("a scenario takes a single parameter value")
            dist = specs[0].distribution(m)
            dist.support_size()  # validates the counts
            return dist
        if tag in ("hier", "hier-gf"):
            kv = dict(part.split("=", 1) for part in params.split(",") if part)
            counts = ScenarioCounts(m, int(kv.get("f", 0)), int(kv.get("g", 0)))
            scenario = Scenario.UNIFORM_CONSISTENT if tag == "hier" else Scenario.UNIFORM_G_THEN_F
            dist = ModelDistribution(scenario, counts)
            dist.support_size()
            return dist
    except (ValueError, OSError) as exc:
        raise UsageError(f"scenario {text!r}: {exc}") from None
    raise UsageError(f"unknown scenario {text!r}")


def load_design(path: str, encoding: str) -> Design:
    enc = Encoding.ZERO_ONE if encoding == "01" else Encoding.PLUS_MINUS
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_design(fh, enc)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except (DesignParseError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _criterion_entry(name: str, value: Fraction, provenance: str) -> dict:
    return {"criterion": name, "value": exact(value), "decimal": decimal6(value), "provenance": provenance}


def evaluate(d: Design, criteria: list[str], max_support: int = DEFAULT_MAX_SUPPORT) -> dict:
    """Build the evaluation report for a design."""
    spectrum = bs_spectrum(d)
    report = {
        "design_digest": hashlib.sha256(d.to_text().encode()).hexdigest()[:16],
        "n": d.n,
        "m": d.m,
        "rows": [list(r) for r in d.levels()],
    }
    values = []
    for item in criteria:
        if item == "bs":
            report["bs"] = {f"B{s}": {"value": exact(b), "decimal": decimal6(b)}
                            for s, b in enumerate(spectrum.values(), start=1)}
        elif item == "gma":
            report["gma_key"] = [exact(b) for b in spectrum.values()]
        elif item == "afd":
            report["affine_dimension"] = affine_dimension(d)
            report["afd"] = is_affinely_full_dimensional(d)
        elif item.startswith("dfg:"):
            dist = parse_scenario(item[4:], d.m)
            _check_support_cap(dist, max_support)
            try:
                values.append(_criterion_entry(item, d_fg(d, dist), "oracle"))
            except ValueError as exc:
                raise UsageError(f"{item}: {exc}") from None
        else:
            try:
                specs = parse_criteria(item)
                for spec in specs:
                    value = closed_form_s2(d, spec.coefficients(d.m)).value
                    values.append(_criterion_entry(str(spec), value, "closed-form"))
            except ValueError as exc:
                raise UsageError(f"criterion {item!r}: {exc}") from None
    if values:
        report["criteria"] = values
    return report


def _check_support_cap(dist: ModelDistribution, cap: int) -> None:
    size = dist.support_size()
    if size > cap:
        raise UsageError(
            f"support of {dist.label()} has {size} model pairs, above the cap of {cap}; "
            f"raise --max-support to run it anyway")


def _format_eval_text(report: dict) -> str:
    lines = [f"design {report['design_digest']}  n={report['n']}  m={report['m']}"]
    if "bs" in report:
        for name, entry in report["bs"].items():
            lines.append(f"  {name:<4} {entry['decimal']:>10}  ({entry['value']})")
    if "gma_key" in report:
        lines.append("  GMA key " + ", ".join(report["gma_key"]))
    if "afd" in report:
        lines.append(f"  affine dimension {report['affine_dimension']}  "
                     f"AFD {'yes' if report['afd'] else 'no'}")
    for entry in report.get("criteria", []):
        lines.append(f"  {entry['criterion']:<14} {entry['decimal']:>10}  ({entry['value']}, {entry['provenance']})")
    return "\n".join(lines)


def _emit(doc: dict, fmt: str, text: str) -> None:
    if fmt == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(text)


def cmd_eval(args) -> int:
    d = load_design(args.design, args.encoding)
    criteria = args.criteria or ["bs", "gma", "afd"]
    report = evaluate(d, criteria, args.max_support)
    _emit(report, args.format, _format_eval_text(report))
    return EXIT_OK


def oracle_report(d: Design, scenario: str, max_support: int = DEFAULT_MAX_SUPPORT) -> dict:
    dist = parse_scenario(scenario, d.m)
    _check_support_cap(dist, max_support)
    oracle = s2_oracle(d, dist).value
    out = {"scenario": dist.label(), "support": dist.support_size(), "oracle": exact(oracle),
           "oracle_decimal": decimal6(oracle)}
    closed = None
    if dist.scenario in (Scenario.UNIFORM_F_G_ZERO, Scenario.ALL_PAIRS_UNIFORM_G, Scenario.HIERARCHICAL_31):
        spec = parse_criteria(scenario)[0]
        closed = closed_form_s2(d, spec.coefficients(d.m)).value
        out["closed_form"] = exact(closed)
        out["verdict"] = "EQUAL" if closed == oracle else "UNEQUAL"
    return out


def cmd_oracle(args) -> int:
    d = load_design(args.design, args.encoding)
    reports = [oracle_report(d, sc, args.max_support) for sc in args.scenario]
    lines = []
    for r in reports:
        line = f"{r['scenario']:<14} oracle {r['oracle']} ({r['oracle_decimal']})"
        if "verdict" in r:
            line += f"  closed form {r['closed_form']}  {r['verdict']}"
        lines.append(line)
    _emit({"design": [list(x) for x in d.levels()], "results": reports}, args.format, "\n".join(lines))
    return EXIT_VERIFY if any(r.get("verdict") == "UNEQUAL" for r in reports) else EXIT_OK


def cmd_search(args) -> int:
    specs = []
    for item in args.criterion:
        try:
            specs.extend(parse_criteria(item))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    workers = args.workers or int(os.environ.get("ROBUSTFF_WORKERS", "1") or 1)
    docs, lines = [], []
    for spec in specs:
        try:
            cfg = SearchConfig(
                runs=args.runs, factors=args.factors, criterion=spec, method=args.method,
                distinct_rows=not args.replicated, restarts=args.restarts, seed=args.seed,
                tolerance=Fraction(args.tolerance), max_space=args.max_space,
                long_running=args.long_running, workers=workers)
            result = run_search(cfg)
        except SearchSpaceTooLarge as exc:
            raise UsageError(str(exc)) from None
        except ValueError as exc:
            raise UsageError(f"{spec}: {exc}") from None
        docs.append(result.to_dict(include_time=not args.no_timestamps))
        lines.append(f"{result.criterion}: {decimal6(result.value)} ({exact(result.value)})  "
                     f"{len(result.designs)} optimal class(es), {result.visited} designs visited")
        for cf in result.canonical_forms:
            lines.append("  canonical rows " + " ".join(str(r) for r in cf.rows))
        lines.append(result.designs[0].to_text().rstrip())
    doc = docs[0] if len(docs) == 1 else {"results": docs}
    _emit(doc, args.format, "\n".join(lines))
    return EXIT_OK


def _random_design(rng: random.Random, n: int, m: int) -> Design:
    return Design(m, tuple(rng.randrange(1 << m) for _ in range(n)))


def verify_oracle(samples: int, seed: int) -> tuple[int, list[str]]:
    """Compare closed forms with the enumeration oracle on random designs."""
    rng = random.Random(seed)
    shapes = [(8, 4), (12, 5)]
    equal, failures = 0, []
    for k in range(samples):
        n, m = shapes[k % len(shapes)]
        d = _random_design(rng, n, m)
        specs = [CriterionSpec("sf0", f=rng.randint(1, m * (m - 1) // 2)),
                 CriterionSpec("sFg", g=rng.randint(0, 3)), CriterionSpec("s31")]
        ok = True
        for spec in specs:
            if closed_form_s2(d, spec.coefficients(m)).value != s2_oracle(d, spec.distribution(m)).value:
                ok = False
                failures.append(f"sample {k}: {spec} differs on rows {d.rows}")
        equal += ok
    return equal, failures


def verify_afd(m: int) -> tuple[int, list[str]]:
    """Check rank-based and j-based AFD tests agree on every distinct-row design."""
    points = 1 << m
    checked, failures = 0, []
    for mask in range(1, 1 << points):
        rows = tuple(p for p in range(points) if (mask >> p) & 1)
        d = Design(m, rows)
        checked += 1
        if is_affinely_full_dimensional(d) != max_abs_ratio_below_one(d):
            failures.append(f"rows {rows}")
        if d.n > points // 2 and not is_affinely_full_dimensional(d):
            failures.append(f"rows {rows}: n > 2^(m-1) but not AFD")
    return checked, failures


def cmd_verify(args) -> int:
    run_all = not (args.props or args.oracle or args.afd)
    lines, failed = [], False
    if args.props or run_all:
        for m in _int_range(args.m):
            rep = check_proposition_orderings(m)
            status = "ok" if rep.ok else "FAIL"
            failed |= not rep.ok
            lines.append(f"orderings m={m} [{', '.join(rep.checked) or 'none in range'}]: {status}")
            for prop, _, msg in rep.violations:
                lines.append(f"  violation {prop}: {msg}")
            for prop, _, msg in rep.boundary_equalities:
                lines.append(f"  boundary {prop}: {msg}")
    if args.oracle or run_all:
        equal, failures = verify_oracle(args.samples, args.seed)
        failed |= bool(failures)
        lines.append(f"closed form vs oracle: {equal}/{args.samples} EQUAL")
        lines.extend("  " + f for f in failures)
    if args.afd or run_all:
        if not 1 <= args.exhaustive_m <= 4:
            raise UsageError("--exhaustive-m must be between 1 and 4")
        checked, failures = verify_afd(args.exhaustive_m)
        failed |= bool(failures)
        lines.append(f"AFD cross-characterization m={args.exhaustive_m}: "
                     f"{checked - len(failures)}/{checked} designs agree")
        lines.extend("  " + f for f in failures[:20])
    print("\n".join(lines))
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_afd(args) -> int:
    d = load_design(args.design, args.encoding)
    doc = {"n": d.n, "m": d.m, "affine_dimension": affine_dimension(d),
           "afd": is_affinely_full_dimensional(d), "canonical_rows": list(canonicalize(d).rows) if d.m <= 8 else None}
    _emit(doc, args.format, f"affine dimension {doc['affine_dimension']} of {d.m}: "
                            f"{'affinely full-dimensional' if doc['afd'] else 'contained in an affine hyperplane'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="robustff", description="Model-robustness evaluation of two-level designs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def design_args(p):
        p.add_argument("design", help="design file, one run per line")
        p.add_argument("--encoding", choices=["pm", "01"], default="pm")
        p.add_argument("--format", choices=["text", "json"], default="text")

    p = sub.add_parser("eval", help="evaluate a design")
    design_args(p)
    p.add_argument("criteria", nargs="*",
                   help="bs, gma, afd, sf0:f=K[..L], sFg:g=K[..L], s31, dfg:<scenario>")
    p.add_argument("--max-support", type=int, default=DEFAULT_MAX_SUPPORT)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="compare closed forms with the enumeration oracle")
    design_args(p)
    p.add_argument("--scenario", action="append", required=True,
                   help="sf0:f=K, sFg:g=K, s31, hier:f=K,g=L, hier-gf:f=K,g=L or explicit:PATH")
    p.add_argument("--max-support", type=int, default=DEFAULT_MAX_SUPPORT)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("search", help="search for criterion-optimal designs")
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--factors", type=int, required=True)
    p.add_argument("--criterion", action="append", required=True, help="s31, sf0:f=K[..L] or sFg:g=K[..L]")
    p.add_argument("--method", choices=["exchange", "exhaustive"], default="exchange")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", default="0", help="minimum exact improvement to accept a swap")
    p.add_argument("--replicated", action="store_true", help="allow repeated runs")
    p.add_argument("--long-running", action="store_true", help="allow exhaustive runs over the space bound")
    p.add_argument("--max-space", type=int, default=10 ** 6)
    p.add_argument("--workers", type=int, default=0, help="worker processes (env ROBUSTFF_WORKERS)")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--no-timestamps", action="store_true", help="omit wall time from output")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("verify", help="run the property suite")
    p.add_argument("--props", action="store_true", help="coefficient orderings")
    p.add_argument("--m", default="4..8", help="range of m for --props, e.g. 4..8")
    p.add_argument("--oracle", action="store_true", help="closed form vs oracle on random designs")
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--afd", action="store_true", help="AFD cross-characterization")
    p.add_argument("--exhaustive-m", type=int, default=3)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("afd", help="affine dimension of a design")
    design_args(p)
    p.set_defaults(func=cmd_afd)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"robustff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
