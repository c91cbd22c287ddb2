"""Command-line entry point: ``seqcert <confidence|bound|sweep|chain|certify-check>``.

Exit codes: 0 success, 1 usage error, 2 solver failure, 3 certificate failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import analytic
from .certify import (
    GUESS_TARGETS,
    SHANNON_TARGETS,
    CertificationError,
    eat_first_order,
    guessing_bound,
    guessing_program,
    max_confidence_sdp,
    shannon_program,
    shannon_tradeoff,
)
from .quantum import (
    ObservedStats,
    ScenarioParams,
    build_preparations,
    honest_stats,
    max_confidence,
    post_measurement_ensemble,
)
from .sdpengine import DualCertificate, verify_certificate

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_CERT = 0, 1, 2, 3
KINDS = ("min-entropy", "shannon")
SWEEP_COLUMNS = (
    "Q", "C_B", "Q_C", "C_C",
    "hmin_bob", "hmin_charlie_trusted", "hmin_charlie", "hmin_joint",
    "h_bob", "h_charlie", "h_joint",
    "max_margin", "certificates",
)
FMT = "{:.9f}"

log = logging.getLogger("seqcert")


class UsageError(Exception):
    pass


class SolverFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    s = FMT.format(v)
    return "0.000000000" if s == "-0.000000000" else s


def _cell(col: str, v) -> str:
    if col == "certificates":
        return v
    if col == "max_margin":
        return "" if v is None or math.isnan(v) else f"{v:.2e}"
    return _num(v)


# ---------------------------------------------------------------- sweep config


@dataclass
class SweepConfig:
    scenario: ScenarioParams
    q_grid: list
    targets: tuple = GUESS_TARGETS
    kinds: tuple = KINDS
    m_nodes: int = 8
    output_path: str = "sweep.csv"
    x_star: int = 0

    def __post_init__(self):
        x = self.scenario.x
        if not self.q_grid:
            raise UsageError("empty Q grid")
        for q in self.q_grid:
            if not x - 1e-12 <= q <= 1 + 1e-12:
                raise UsageError(f"grid value {q} outside [r*delta, 1] = [{x}, 1]")
        if not self.targets or any(t not in GUESS_TARGETS for t in self.targets):
            raise UsageError(f"targets must be a nonempty subset of {GUESS_TARGETS}")
        if not self.kinds or any(k not in KINDS for k in self.kinds):
            raise UsageError(f"kinds must be a nonempty subset of {KINDS}")
        if not 2 <= self.m_nodes <= 16:
            raise UsageError("m must lie in [2, 16]")


def make_grid(start: float, stop: float, step: float) -> list:
    if step <= 0:
        raise UsageError("grid step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 12) for k in range(n + 1)]


def _sweep_config(args) -> SweepConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc

    def pick(name, default=None):
        v = getattr(args, name, None)
        return v if v is not None else doc.get(name, default)

    delta, r = pick("delta"), pick("r")
    if delta is None or r is None:
        raise UsageError("delta and r are required (flags or config)")
    try:
        params = ScenarioParams(float(delta), float(r))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.q_start is None and args.q_stop is None and args.q_step is None and "q_grid" in doc:
        grid = [float(q) for q in doc["q_grid"]]
    else:
        start = pick("q_start", params.x)
        grid = make_grid(float(start), float(pick("q_stop", 1.0)), float(pick("q_step", 0.005)))
    targets = pick("targets", list(GUESS_TARGETS))
    kinds = pick("kinds", list(KINDS))
    if isinstance(targets, str):
        targets = targets.split(",")
    if isinstance(kinds, str):
        kinds = kinds.split(",")
    return SweepConfig(
        scenario=params,
        q_grid=grid,
        targets=tuple(targets),
        kinds=tuple(kinds),
        m_nodes=int(pick("m", 8)),
        output_path=str(pick("output", "sweep.csv")),
        x_star=int(pick("x_star", 0)),
    )


def _sweep_point(cfg: SweepConfig, q: float) -> dict:
    """One CSV row; errors are returned as markers so the pool never raises."""
    params = cfg.scenario
    stats = honest_stats(params, q)
    ens = build_preparations(params)
    row = {"Q": q, "C_B": stats.conf_b, "Q_C": stats.inc_c, "C_C": stats.conf_c}
    margins, flags = [], []

    def record(col, fn):
        try:
            b = fn()
        except CertificationError as exc:
            row[col] = math.nan
            flags.append(f"{col}:invalid")
            log.error("Q=%s %s: %s", q, col, exc)
            return
        if b.status == "infeasible":
            row[col] = math.nan
            flags.append(f"{col}:infeasible")
            return
        row[col] = b.value_bits
        margins.append(b.margin)

    if "min-entropy" in cfg.kinds:
        for t in cfg.targets:
            col = "hmin_" + t.replace("-", "_")
            e = post_measurement_ensemble(params, q) if t == "charlie-trusted" else ens
            record(col, lambda t=t, e=e: guessing_bound(t, e, stats, cfg.x_star))
    if "shannon" in cfg.kinds:
        for t in cfg.targets:
            if t in SHANNON_TARGETS:
                record("h_" + t, lambda t=t: shannon_tradeoff(t, ens, stats, cfg.m_nodes, cfg.x_star))
    row["max_margin"] = max(margins) if margins else math.nan
    row["certificates"] = ";".join(flags) if flags else "valid"
    return row


def _workers() -> int:
    raw = os.environ.get("SEQCERT_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise UsageError(f"SEQCERT_WORKERS must be an integer, got {raw!r}") from exc
    return max(1, n)


def run_sweep(cfg: SweepConfig, workers: int = 1) -> list:
    if workers == 1:
        return [_sweep_point(cfg, q) for q in cfg.q_grid]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_point, [cfg] * len(cfg.q_grid), cfg.q_grid))


def write_sweep(cfg: SweepConfig, rows: list) -> Path:
    path = Path(cfg.output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([_cell(c, row.get(c)) for c in SWEEP_COLUMNS])
    sidecar = path.with_suffix(path.suffix + ".plot.json")
    sidecar.write_text(json.dumps(_plot_description(cfg, path.name), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _plot_description(cfg: SweepConfig, csv_name: str) -> dict:
    p = cfg.scenario
    series = []
    labels = {
        "hmin_bob": "H_min Bob",
        "hmin_charlie_trusted": "H_min Charlie (trusted preparations)",
        "hmin_charlie": "H_min Charlie",
        "hmin_joint": "H_min Bob and Charlie",
        "h_bob": "H Bob",
        "h_charlie": "H Charlie",
        "h_joint": "H Bob and Charlie",
    }
    for col, label in labels.items():
        shannon = col.startswith("h_")
        kind = "shannon" if shannon else "min-entropy"
        target = col.split("_", 1)[1].replace("_", "-")
        if kind in cfg.kinds and target in cfg.targets:
            series.append({"column": col, "label": label, "style": "dashed" if shannon else "solid"})
    crit = analytic.critical_rates(p)
    return {
        "data": csv_name,
        "title": f"Certified entropy, delta={p.delta:g}, r={p.r:g}",
        "x": {"column": "Q", "label": "Bob inconclusive rate Q", "range": [min(cfg.q_grid), max(cfg.q_grid)]},
        "y": {"label": "bits", "range": [0, 2 if "joint" in cfg.targets else 1]},
        "series": series,
        "markers": [
            {"x": crit.q_crit_bob, "label": "Q_crit Bob"},
            {"x": crit.q_crit_charlie, "label": "Q_crit Charlie"},
        ],
        "m_nodes": cfg.m_nodes,
    }


# ---------------------------------------------------------------- commands


def _params(args) -> ScenarioParams:
    try:
        return ScenarioParams(args.delta, args.r)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_confidence(args, out) -> int:
    params = _params(args)
    closed = max_confidence(params)
    sdp = max_confidence_sdp(build_preparations(params), args.x)
    out.write(f"C_max {_num(closed)}\nC_max_sdp {_num(sdp)}\ndifference {abs(sdp - closed):.3e}\n")
    return EXIT_OK


def _bound_stats(args, params: ScenarioParams) -> tuple[ObservedStats, float]:
    """Stats from flags; honest ones when only Q is given."""
    if args.q is not None:
        try:
            return honest_stats(params, args.q), args.q
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if args.conf is None or args.inc is None:
        raise UsageError("give --q, or --conf and --inc (plus --conf-c/--inc-c for Charlie)")
    conf_c = args.conf_c if args.conf_c is not None else math.nan
    inc_c = args.inc_c if args.inc_c is not None else math.nan
    if args.target in ("charlie", "joint", "charlie-trusted") and (math.isnan(conf_c) or math.isnan(inc_c)):
        raise UsageError(f"target {args.target} needs --conf-c and --inc-c")
    try:
        return ObservedStats(args.conf, args.inc, conf_c, inc_c), args.inc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_bound(args, out) -> int:
    params = _params(args)
    stats, q_bob = _bound_stats(args, params)
    ens = build_preparations(params)
    if args.target == "charlie-trusted":
        try:
            ens = post_measurement_ensemble(params, q_bob)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if args.kind == "shannon":
        if args.target not in SHANNON_TARGETS:
            raise UsageError(f"Shannon bounds exist for {SHANNON_TARGETS}")
        bound = shannon_tradeoff(args.target, ens, stats, args.m, args.x_star)
        problem = shannon_program(args.target, ens, stats, args.m, args.x_star)
    else:
        bound = guessing_bound(args.target, ens, stats, args.x_star)
        problem = guessing_program(args.target, ens, stats, args.x_star)
    if bound.status == "infeasible":
        out.write("status infeasible\n")
        raise SolverFailure("the program is infeasible: these statistics admit no quantum strategy")
    name = "hmin" if bound.kind == "min-entropy" else "h"
    out.write(f"target {bound.target}\nkind {bound.kind}\nstatus {bound.status}\n")
    out.write(f"{name} {_num(bound.value_bits)}\n")
    if bound.guessing_prob is not None:
        out.write(f"guessing_prob {_num(bound.guessing_prob)}\n")
    else:
        out.write(f"eat_rate {_num(eat_first_order(bound))}\n")
    out.write(f"gap {bound.gap:.3e}\nmargin {bound.margin:.3e}\n")
    if args.save_cert:
        doc = {
            "kind": bound.kind,
            "target": bound.target,
            "delta": params.delta,
            "r": params.r,
            "q_bob": q_bob,
            "stats": [stats.conf_b, stats.inc_b, stats.conf_c, stats.inc_c],
            "m": args.m,
            "x_star": args.x_star,
            "certificate": bound.certificate.to_json(),
        }
        Path(args.save_cert).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        out.write(f"certificate {args.save_cert} ({len(problem.blocks)} blocks)\n")
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    cfg = _sweep_config(args)
    rows = run_sweep(cfg, _workers())
    path = write_sweep(cfg, rows)
    out.write(f"wrote {path} ({len(rows)} rows)\n")
    flags = [r["certificates"] for r in rows if r["certificates"] != "valid"]
    if any("invalid" in f for f in flags):
        return EXIT_CERT
    if flags:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_chain(args, out) -> int:
    if not 2 <= args.n_max <= 12:
        raise UsageError("--n-max must lie in [2, 12]")
    rows = analytic.delta_curve(args.n_max)
    lines = ["n,delta_max"] + [f"{n},{_num(d)}" for n, d in rows]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        out.write(f"wrote {args.output}\n")
    else:
        out.write(text)
    return EXIT_OK


def cmd_certify_check(args, out) -> int:
    try:
        doc = json.loads(Path(args.file).read_text(encoding="utf-8"))
        params = ScenarioParams(doc["delta"], doc["r"])
        stats = ObservedStats(*[float(v) if v is not None else math.nan for v in doc["stats"]])
        claimed = DualCertificate.from_json(doc["certificate"])
        target, kind = doc["target"], doc["kind"]
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"unreadable certificate file: {exc}") from exc
    ens = build_preparations(params)
    if target == "charlie-trusted":
        ens = post_measurement_ensemble(params, doc["q_bob"])
    if kind == "min-entropy":
        problem = guessing_program(target, ens, stats, doc.get("x_star", 0))
    else:
        problem = shannon_program(target, ens, stats, doc["m"], doc.get("x_star", 0))
    try:
        checked = verify_certificate(problem, replace(claimed, valid=False))
    except (KeyError, ValueError) as exc:
        out.write(f"FAIL certificate does not match the program: {exc}\n")
        return EXIT_CERT
    # the multipliers must be feasible as stored, and the claimed value no more
    # optimistic than what they support (p_g bounds from above, tradeoffs from below)
    slack = checked.certified_value - claimed.certified_value
    conservative = slack <= 1e-9 if kind == "min-entropy" else slack >= -1e-9
    ok = checked.valid and checked.inflation == 0.0 and conservative
    verdict = "PASS" if ok else "FAIL"
    out.write(
        f"{verdict} valid {checked.valid} margin {checked.slack_margin:.3e} "
        f"value {_num(checked.certified_value)} claimed {_num(claimed.certified_value)}\n"
    )
    return EXIT_OK if ok else EXIT_CERT


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seqcert", description="Certified randomness bounds for sequential maximum-confidence measurements.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario(sp, required=True):
        sp.add_argument("--delta", type=float, required=required, help="overlap of the pure parts")
        sp.add_argument("--r", type=float, required=required, help="purity (Bloch length)")

    c = sub.add_parser("confidence", help="closed-form and SDP maximal confidence")
    scenario(c)
    c.add_argument("--x", type=int, default=0, choices=(0, 1))
    c.set_defaults(func=cmd_confidence)

    b = sub.add_parser("bound", help="one certified entropy bound")
    scenario(b)
    b.add_argument("--target", required=True, choices=GUESS_TARGETS)
    b.add_argument("--kind", default="min-entropy", choices=KINDS)
    b.add_argument("--q", type=float, help="Bob's inconclusive rate; honest stats are generated")
    b.add_argument("--conf", type=float, help="Bob's confidence")
    b.add_argument("--inc", type=float, help="Bob's inconclusive rate")
    b.add_argument("--conf-c", type=float, help="Charlie's confidence")
    b.add_argument("--inc-c", type=float, help="Charlie's inconclusive rate")
    b.add_argument("--m", type=int, default=8, help="Gauss-Radau nodes (Shannon only)")
    b.add_argument("--x-star", type=int, default=0, choices=(0, 1))
    b.add_argument("--save-cert", help="write the verified certificate as JSON")
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("sweep", help="CSV of all bounds over Bob's inconclusive rate")
    scenario(s, required=False)
    s.add_argument("--config", help="JSON file; flags override its values")
    s.add_argument("--q-start", type=float)
    s.add_argument("--q-stop", type=float)
    s.add_argument("--q-step", type=float)
    s.add_argument("--targets", help="comma separated subset of " + ",".join(GUESS_TARGETS))
    s.add_argument("--kinds", help="comma separated subset of " + ",".join(KINDS))
    s.add_argument("--m", type=int)
    s.add_argument("--x-star", type=int, choices=(0, 1))
    s.add_argument("--output")
    s.set_defaults(func=cmd_sweep)

    ch = sub.add_parser("chain", help="largest r*delta allowing certification along n parties")
    ch.add_argument("--n-max", type=int, default=6)
    ch.add_argument("--output")
    ch.set_defaults(func=cmd_chain)

    cc = sub.add_parser("certify-check", help="re-verify a stored certificate")
    cc.add_argument("file")
    cc.set_defaults(func=cmd_certify_check)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"seqcert: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"seqcert: {exc}\n")
        return EXIT_USAGE
    except SolverFailure as exc:
        sys.stderr.write(f"seqcert: {exc}\n")
        return EXIT_SOLVER
    except CertificationError as exc:
        sys.stderr.write(f"seqcert: {exc}\n")
        return EXIT_CERT
    except ArithmeticError as exc:
        sys.stderr.write(f"seqcert: solver failure: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
