"""Command-line front end.

``mflow simulate SCENARIO`` runs a scenario and writes ``summary.csv``,
``dwell_<node>.csv``, ``observations_<node>.csv`` and ``report.json`` to the
output directory. ``mflow classify OBS.csv`` prints the regime verdict for an
observation table as one JSON record. ``mflow report REPORT.json`` turns a
report into plot-ready tables.

Exit codes: 0 success, 1 bad input or failed validation, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classifier import DEFAULT_ALPHA, DEFAULT_BOOTSTRAP, MIN_ROWS, ObservationSet, classify_regime
from .errors import DataError, MflowError, ScenarioError
from .metrics import entropy_trajectory
from .rng import MASK64
from .scenario import parse_scenario
from .simulator import SimReport, run_monte_carlo

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2
REPORT_FORMAT = "mflow-report"
REPORT_VERSION = 1
SUMMARY_HEADER = (
    "node_id", "trials", "success_rate", "stderr", "mean_time",
    "entropy_bits", "flow_cv", "utilization", "saturated",
)
HISTOGRAM_HEADER = ("bin_lo", "bin_hi", "count")
OBS_COLUMNS = ("info", "precision", "time")
_TRACE_KEYS = ("info", "experience", "precision_prob", "hit", "value", "service", "wait", "finish")


class _InputError(Exception):
    """Bad user input detected by the CLI itself (exit code 1)."""


# ── formatting ──────────────────────────────────────────────────────────


def _num(x) -> str:
    """Shortest round-trip text for a number; NaN becomes an empty field."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def _json_float(x) -> Optional[float]:
    x = float(x)
    return None if math.isnan(x) else x


# ── report files ────────────────────────────────────────────────────────


def report_to_dict(report: SimReport) -> dict:
    nodes = []
    for nid in report.node_ids:
        s = report.nodes[nid]
        tr = report.traces[nid]
        trace = {k: [_json_float(v) for v in getattr(tr, k).tolist()] for k in _TRACE_KEYS if k != "hit"}
        trace["hit"] = [int(v) for v in tr.hit.tolist()]
        trace["covariates"] = tr.covariates.tolist()
        nodes.append(
            {
                "id": nid,
                "regime": report.regimes[nid],
                "summary": {
                    "success_rate": s.success_rate,
                    "stderr": s.stderr,
                    "mean_time": s.mean_time,
                    "mean_dwell": s.mean_dwell,
                    "entropy_bits": s.entropy_bits,
                    "event_entropy_bits": s.event_entropy_bits,
                    "flow_cv": _json_float(s.flow_cv),
                    "utilization": s.utilization,
                    "saturated": s.saturated,
                },
                "histogram": {"edges": list(s.histogram.edges), "counts": list(s.histogram.counts)},
                "trace": {k: trace[k] for k in (*_TRACE_KEYS, "covariates")},
            }
        )
    return {
        "format": REPORT_FORMAT,
        "format_version": REPORT_VERSION,
        "trials": report.trials,
        "seed": report.seed,
        "reset_experience": report.reset_experience,
        "arrival_rate": report.arrival_rate,
        "end_to_end": {"rate": report.end_to_end_rate, "stderr": report.end_to_end_stderr},
        "makespan": report.makespan.tolist(),
        "nodes": nodes,
    }


def write_report(report: SimReport, out: Path) -> list:
    """Write every report file under ``out``; returns the paths written."""
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows = []
    for nid in report.node_ids:
        s = report.nodes[nid]
        rows.append(
            (nid, report.trials, s.success_rate, s.stderr, s.mean_time, s.entropy_bits, s.flow_cv, s.utilization, s.saturated)
        )
    _write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    written.append(out / "summary.csv")
    for nid in report.node_ids:
        p = out / f"dwell_{nid}.csv"
        _write_csv(p, HISTOGRAM_HEADER, report.nodes[nid].histogram.rows())
        written.append(p)
        tr = report.traces[nid]
        cov_names = [f"cov_{j + 1}" for j in range(tr.covariates.shape[1])]
        p = out / f"observations_{nid}.csv"
        _write_csv(
            p,
            (*OBS_COLUMNS, "experience", *cov_names),
            (
                (i, v, t, e, *c)
                for i, v, t, e, c in zip(
                    tr.info.tolist(), tr.value.tolist(), tr.service.tolist(), tr.experience.tolist(), tr.covariates.tolist()
                )
            ),
        )
        written.append(p)
    p = out / "report.json"
    p.write_text(json.dumps(report_to_dict(report), separators=(",", ":")) + "\n", encoding="utf-8")
    written.append(p)
    return written


def load_report(path: Path) -> dict:
    """Read and sanity-check a ``report.json``; raises :class:`_InputError`."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise _InputError(f"{path}: no such file") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise _InputError(f"{path}: unreadable ({exc})") from None
    except json.JSONDecodeError as exc:
        raise _InputError(f"{path}: not a valid report (JSON error at line {exc.lineno}, column {exc.colno})") from None
    if not isinstance(data, dict) or data.get("format") != REPORT_FORMAT:
        raise _InputError(f"{path}: not an mflow report (missing format tag {REPORT_FORMAT!r})")
    if data.get("format_version") != REPORT_VERSION:
        raise _InputError(f"{path}: unsupported report version {data.get('format_version')!r}")
    n = data.get("trials")
    nodes = data.get("nodes")
    if not isinstance(n, int) or n < 1 or not isinstance(nodes, list) or not nodes:
        raise _InputError(f"{path}: report is missing trials or nodes")
    for k, node in enumerate(nodes):
        where = f"{path}: nodes[{k}]"
        if not isinstance(node, dict) or not {"id", "histogram", "trace"} <= node.keys():
            raise _InputError(f"{where} is incomplete")
        h = node["histogram"]
        if not isinstance(h, dict) or len(h.get("edges", ())) != len(h.get("counts", ())) + 1:
            raise _InputError(f"{where}.histogram is malformed")
        tr = node["trace"]
        for key in _TRACE_KEYS:
            if not isinstance(tr, dict) or not isinstance(tr.get(key), list) or len(tr[key]) != n:
                raise _InputError(f"{where}.trace.{key} does not have {n} entries")
    return data


# ── observations ────────────────────────────────────────────────────────


def read_observations(path: Path) -> ObservationSet:
    """Parse an observation CSV; raises :class:`_InputError` with column diagnostics."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise _InputError(f"{path}: no such file") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise _InputError(f"{path}: unreadable ({exc})") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header:
        raise _InputError(f"{path}: empty file, expected header {','.join(OBS_COLUMNS)}[,experience]")
    header = [h.strip() for h in header]
    missing = [c for c in OBS_COLUMNS if c not in header]
    if missing:
        raise _InputError(f"{path}: missing required column(s): {', '.join(missing)} (header: {','.join(header)})")
    known = set(OBS_COLUMNS) | {"experience"}
    unknown = [h for h in header if h not in known and not h.startswith("cov_")]
    if unknown:
        raise _InputError(f"{path}: unexpected column(s): {', '.join(unknown)}")
    if len(set(header)) != len(header):
        raise _InputError(f"{path}: duplicate column names in header")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise _InputError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
        vals = []
        for name, cell in zip(header, row):
            try:
                vals.append(float(cell))
            except ValueError:
                raise _InputError(f"{path}: line {lineno}, column {name!r}: {cell!r} is not a number") from None
        rows.append(vals)
    if len(rows) < MIN_ROWS:
        raise _InputError(f"{path}: {len(rows)} rows, classification needs at least {MIN_ROWS}")
    a = np.array(rows, dtype=float)
    col = {h: a[:, j] for j, h in enumerate(header)}
    covs = [h for h in header if h.startswith("cov_")]
    try:
        return ObservationSet(
            col["info"],
            col["precision"],
            col["time"],
            col.get("experience"),
            np.column_stack([col[c] for c in covs]) if covs else None,
        )
    except DataError as exc:
        raise _InputError(f"{path}: {exc}") from None


# ── commands ────────────────────────────────────────────────────────────


def cmd_simulate(args) -> int:
    try:
        sc = parse_scenario(args.scenario, strict=not args.lenient)
    except FileNotFoundError:
        print(f"error: {args.scenario}: no such file", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {args.scenario}: unreadable ({exc})", file=sys.stderr)
        return EXIT_INPUT
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed <= MASK64:
            print(f"error: --seed {args.seed} is not an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_INPUT
        changes["master_seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            print(f"error: --trials must be >= 1, got {args.trials}", file=sys.stderr)
            return EXIT_INPUT
        changes["n_trials"] = args.trials
    if args.learning:
        changes["reset_experience"] = False
    if args.workers is not None:
        if args.workers < 1:
            print(f"error: --workers must be >= 1, got {args.workers}", file=sys.stderr)
            return EXIT_INPUT
        changes["workers"] = args.workers
    sc = dataclasses.replace(sc, **changes)
    out = Path(args.out or sc.output_dir or "out")

    try:
        report = run_monte_carlo(
            sc.graph, sc.agent_map(), sc.n_trials, sc.master_seed, sc.reset_experience, sc.workers, sc.arrival_rate
        )
        write_report(report, out)
    except (MflowError, OSError, ArithmeticError) as exc:
        print(f"error: simulation aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    for nid in report.node_ids:
        s = report.nodes[nid]
        print(
            f"{nid}: success {s.success_rate:.4f} ± {s.stderr:.4f}, mean time {s.mean_time:.4g}, "
            f"entropy {s.entropy_bits:.4f} bits, {'saturated' if s.saturated else 'not saturated'}"
        )
    return EXIT_OK


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return _json_float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def cmd_classify(args) -> int:
    try:
        obs = read_observations(args.observations)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not 0 < args.alpha < 1:
        print(f"error: --alpha must lie in (0, 1), got {args.alpha}", file=sys.stderr)
        return EXIT_INPUT
    if args.bootstrap < 0:
        print(f"error: --bootstrap must be >= 0, got {args.bootstrap}", file=sys.stderr)
        return EXIT_INPUT
    try:
        c = classify_regime(obs, alpha=args.alpha, n_bootstrap=args.bootstrap, seed=args.seed)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MflowError, ArithmeticError) as exc:
        print(f"error: classification failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    record = {"kind": c.kind.value, "regime": c.kind.name, "confidence": c.confidence, "evidence": c.evidence}
    print(json.dumps(_jsonable(record), sort_keys=True, separators=(",", ":")))
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        data = load_report(args.report)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out) if args.out else Path(args.report).parent / "tables"
    try:
        out.mkdir(parents=True, exist_ok=True)
        for node in data["nodes"]:
            nid = node["id"]
            h = node["histogram"]
            _write_csv(out / f"hist_{nid}.csv", HISTOGRAM_HEADER, zip(h["edges"], h["edges"][1:], h["counts"]))
            tr = node["trace"]
            pp = [float(v) for v in tr["precision_prob"]]
            _write_csv(
                out / f"entropy_{nid}.csv",
                ("trial", "precision_prob", "entropy_bits"),
                zip(range(len(pp)), pp, entropy_trajectory(pp)),
            )
            hits = np.asarray(tr["hit"], dtype=float)
            running = np.cumsum(hits) / np.arange(1, hits.size + 1)
            _write_csv(
                out / f"learning_{nid}.csv",
                ("trial", "experience", "precision_prob", "hit", "running_success_rate"),
                zip(range(len(pp)), tr["experience"], pp, (int(v) for v in tr["hit"]), running.tolist()),
            )
    except (TypeError, ValueError, KeyError) as exc:
        print(f"error: {args.report}: malformed report content ({exc})", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: cannot write tables: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    mode = "i.i.d." if data.get("reset_experience", True) else "learning"
    print(f"wrote tables for {len(data['nodes'])} node(s) ({mode} run, {data['trials']} trials) to {out}")
    return EXIT_OK


# ── entry point ─────────────────────────────────────────────────────────


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes are input errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mflow", description="Workflow productivity simulator and regime classifier.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a scenario and write report files")
    s.add_argument("scenario", help="scenario YAML file")
    s.add_argument("--seed", type=int, help="override master_seed (unsigned 64-bit)")
    s.add_argument("--trials", type=int, help="override n_trials")
    s.add_argument("--learning", action="store_true", help="carry experience across trials")
    s.add_argument("--workers", type=int, help="worker threads for independent trials")
    s.add_argument("--out", help="output directory (default: scenario output_dir or ./out)")
    s.add_argument("--lenient", action="store_true", help="warn about unknown scenario keys instead of failing")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("classify", help="identify the regime behind an observation CSV")
    c.add_argument("observations", help="CSV with columns info,precision,time[,experience][,cov_*]")
    c.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="significance level (default 0.05)")
    c.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP, help="bootstrap resamples (default 200)")
    c.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    c.set_defaults(func=cmd_classify)

    r = sub.add_parser("report", help="turn report.json into plot-ready tables")
    r.add_argument("report", help="report.json written by simulate")
    r.add_argument("--out", help="output directory (default: <report dir>/tables)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # last resort: keep the exit-code contract
        print(f"error: unexpected failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
