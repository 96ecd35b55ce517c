"""consensus-lab command line.

Subcommands: run, verify, sweep, table, replay.  Exit codes: 0 ok,
1 property violation, 2 usage error, 3 inconclusive (a cap was hit).

Settings come from flags, then the JSON file given by ``--config``, then
defaults; ``CONSENSUS_LAB_SEED`` replaces the default seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from .harness import (
    BUDGET,
    DEFAULT_BUDGET,
    INCONCLUSIVE,
    OK,
    Schedule,
    Trace,
    Verdict,
    explore,
    run,
    space_row,
    sweep,
)
from .harness.explore import input_vectors
from .harness.sweep import parallel_sweep, sweep_inputs
from .errors import ReplayDivergence
from .protocols import REGISTRY, make

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3

DEFAULTS: dict[str, Any] = {
    "protocol": None,
    "n": 3,
    "l": None,
    "variant": None,
    "inputs": None,
    "sched": "random",
    "seed": 0,
    "budget": None,
    "depth": 12,
    "node_cap": 2_000_000,
    "runs": 1000,
    "workers": 1,
    "format": "human",
    "output": None,
    "trace": None,
    "witness": "witness.trace",
    "n_range": "2..8",
    "l_values": "1,2,3",
    "protocols": None,
    "seeds": 20,
    "quiet": False,
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# settings


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags > config file > environment > defaults."""
    file_cfg = _load_config(args.config)
    defaults = dict(DEFAULTS)
    env_seed = os.environ.get("CONSENSUS_LAB_SEED")
    if env_seed is not None:
        try:
            defaults["seed"] = int(env_seed)
        except ValueError:
            raise UsageError(f"CONSENSUS_LAB_SEED must be an integer, got {env_seed!r}") from None
    cfg = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            cfg[key] = flag
        elif key in file_cfg:
            cfg[key] = file_cfg[key]
        else:
            cfg[key] = default
    return cfg


def _protocol(cfg: dict):
    name = cfg["protocol"]
    if name is None:
        raise UsageError("--protocol is required (choose from " + ", ".join(REGISTRY) + ")")
    if name not in REGISTRY:
        raise UsageError(f"unknown protocol {name!r}; registered: " + ", ".join(REGISTRY))
    try:
        return make(name, int(cfg["n"]), cfg["l"], cfg["variant"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _vector(text: Any, protocol) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        vec = tuple(int(x) for x in text)
    else:
        try:
            vec = tuple(int(x) for x in str(text).split(","))
        except ValueError:
            raise UsageError(f"bad input vector {text!r}") from None
    if len(vec) != protocol.n:
        raise UsageError(f"{len(vec)} inputs given for n={protocol.n}")
    if any(not 0 <= x < protocol.m for x in vec):
        raise UsageError(f"inputs must lie in 0..{protocol.m - 1}")
    return vec


def _input_set(spec: Any, protocol, seed: int) -> list[tuple[int, ...]]:
    """``all``, ``random:K`` or one comma-separated vector."""
    if spec is None or spec == "all":
        return list(input_vectors(protocol.n, protocol.m))
    if isinstance(spec, str) and spec.startswith("random"):
        _, _, k = spec.partition(":")
        try:
            count = int(k) if k else 1
        except ValueError:
            raise UsageError(f"bad input spec {spec!r}") from None
        return [sweep_inputs(protocol, seed, i) for i in range(count)]
    return [_vector(spec, protocol)]


# ---------------------------------------------------------------------------
# output


def _emit(cfg: dict, human: str, doc: dict, rows: list[dict] | None = None) -> None:
    fmt = cfg["format"]
    if fmt == "json":
        text = json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
    elif fmt == "csv":
        rows = rows if rows is not None else [_flat(doc)]
        buf = io.StringIO()
        fields = list(rows[0]) if rows else []
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = buf.getvalue()
    else:
        text = human if human.endswith("\n") else human + "\n"
    if cfg["output"]:
        Path(cfg["output"]).write_text(text)
    else:
        sys.stdout.write(text)


def _flat(doc: dict) -> dict:
    out = {}
    for k, v in doc.items():
        if k == "witness":
            continue
        if isinstance(v, dict):
            for k2, v2 in v.items():
                if not isinstance(v2, (dict, list)):
                    out[f"{k}.{k2}"] = v2
                else:
                    out[f"{k}.{k2}"] = json.dumps(v2, sort_keys=True)
        elif isinstance(v, list):
            out[k] = json.dumps(v)
        else:
            out[k] = v
    return out


def _progress(cfg: dict, text: str) -> None:
    if not cfg["quiet"]:
        print(text, file=sys.stderr, flush=True)


def _exit_for(outcome: str) -> int:
    if outcome == OK:
        return EXIT_OK
    if outcome in (INCONCLUSIVE, BUDGET):
        return EXIT_INCONCLUSIVE
    return EXIT_VIOLATION


def _verdict_doc(command: str, verdict: Verdict, protocol, extra: dict | None = None) -> dict:
    doc = {"command": command, "config": protocol.describe(), **verdict.to_dict()}
    if extra:
        doc.update(extra)
    return doc


def _write_witness(cfg: dict, verdict: Verdict) -> str | None:
    if verdict.witness is None:
        return None
    path = cfg["witness"]
    Path(path).write_text(verdict.witness.dumps())
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_run(cfg: dict) -> int:
    protocol = _protocol(cfg)
    if cfg["inputs"] is None:
        raise UsageError("--inputs is required for run")
    inputs = _input_set(cfg["inputs"], protocol, int(cfg["seed"]))[0]
    try:
        schedule = Schedule.parse(cfg["sched"], seed=int(cfg["seed"]), budget=cfg["budget"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if schedule.strategy == "exhaustive":
        raise UsageError("use the verify command for exhaustive schedules")
    if schedule.strategy == "solo" and not 0 <= schedule.pid < protocol.n:
        raise UsageError(f"solo process must be in 0..{protocol.n - 1}")
    verdict, trace = run(protocol, inputs, schedule)
    if cfg["trace"]:
        Path(cfg["trace"]).write_text(trace.dumps())
    decided = sorted({d for d in verdict.stats["decided"] if d is not None})
    st = verdict.stats
    human = (
        f"{protocol.name} n={protocol.n} inputs={','.join(map(str, inputs))} schedule={schedule}\n"
        f"outcome: {verdict.outcome}{' (' + verdict.message + ')' if verdict.message else ''}\n"
        f"decided: {decided if decided else 'none'}  per process: {st['decided']}\n"
        f"steps: {st['steps']}  touched locations: {st['touched']}  scans: {st['scans']}"
    )
    doc = _verdict_doc("run", verdict, protocol, {"inputs": list(inputs), "schedule": str(schedule)})
    _emit(cfg, human, doc)
    return _exit_for(verdict.outcome)


def cmd_verify(cfg: dict) -> int:
    protocol = _protocol(cfg)
    vectors = _input_set(cfg["inputs"] or "all", protocol, int(cfg["seed"]))
    depth = int(cfg["depth"])
    totals = {"vectors": 0, "configs": 0, "solo_checks": 0, "max_touched": 0}
    final: Verdict | None = None
    for vec in vectors:
        _progress(cfg, f"verify {protocol.name} inputs={vec} depth={depth}")

        def progress(st: dict) -> None:
            _progress(cfg, f"  {st['configs']} configurations, frontier depth {st['max_depth']}")

        v = explore(protocol, vec, depth, node_cap=int(cfg["node_cap"]), progress=progress)
        totals["vectors"] += 1
        totals["configs"] += v.stats.get("configs", 0)
        totals["solo_checks"] += v.stats.get("solo_checks", 0)
        totals["max_touched"] = max(totals["max_touched"], v.stats.get("max_touched", 0))
        if not v.ok:
            v.stats = {**v.stats, "inputs": list(vec)}
            final = v
            break
    if final is None:
        final = Verdict(OK, f"{totals['vectors']} input vectors explored to depth {depth}", None, totals)
    else:
        final.stats = {**final.stats, **{k: totals[k] for k in ("vectors",)}}
    witness = _write_witness(cfg, final)
    human = f"{protocol.name} n={protocol.n} depth={depth}\noutcome: {final.outcome} ({final.message})\n"
    human += f"input vectors: {totals['vectors']}  configurations: {totals['configs']}  solo checks: {totals['solo_checks']}"
    if witness:
        human += f"\nwitness written to {witness} ({len(final.witness.steps)} steps)"
    _emit(cfg, human, _verdict_doc("verify", final, protocol, {"depth": depth, "witness_path": witness}))
    return _exit_for(final.outcome)


def cmd_sweep(cfg: dict) -> int:
    protocol = _protocol(cfg)
    runs, seed = int(cfg["runs"]), int(cfg["seed"])
    budget = int(cfg["budget"] or DEFAULT_BUDGET)
    fixed = None if cfg["inputs"] in (None, "random", "mixed") else _vector(cfg["inputs"], protocol)
    workers = max(1, int(cfg["workers"]))
    if workers > 1:
        _progress(cfg, f"sweep {protocol.name}: {runs} schedules on {workers} workers")
        verdict = parallel_sweep(
            protocol.name, protocol.n, runs, seed, budget, cfg["l"], cfg["variant"], fixed, workers
        )
    else:
        verdict = sweep(
            protocol, runs, seed, budget, fixed, progress=lambda k, st: _progress(cfg, f"  {k}/{runs} schedules")
        )
    witness = _write_witness(cfg, verdict)
    st = verdict.stats
    human = (
        f"{protocol.name} n={protocol.n} runs={runs} seed={seed} budget={budget}\n"
        f"outcome: {verdict.outcome} ({verdict.message})\n"
        f"outcomes: {st.get('outcomes')}  max steps: {st.get('max_steps')}  max touched: {st.get('max_touched')}"
    )
    if witness:
        human += f"\nwitness written to {witness}"
    _emit(cfg, human, _verdict_doc("sweep", verdict, protocol, {"witness_path": witness}))
    # budget-exhausted runs are reported in the counts; only violations fail a sweep
    return _exit_for(verdict.outcome)


def _int_range(text: str) -> list[int]:
    text = str(text)
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad range {text!r} (use A..B or a comma list)") from None


def cmd_table(cfg: dict) -> int:
    ns = _int_range(cfg["n_range"])
    ls = _int_range(cfg["l_values"])
    names = cfg["protocols"]
    if isinstance(names, str):
        names = names.split(",")
    if not names:
        names = [k for k in REGISTRY if k not in ("broken", "tas-tracks")]
    for name in names:
        if name not in REGISTRY or name == "broken":
            raise UsageError(f"no space row for {name!r}")
    if any(n < 2 for n in ns):
        raise UsageError("need n >= 2")
    rows = []
    for name in names:
        for n in ns:
            for l in ls if name == "buffer" else [None]:
                _progress(cfg, f"table {name} n={n}" + (f" l={l}" if l else ""))
                rows.append(space_row(name, n, l, seeds=int(cfg["seeds"]), budget=int(cfg["budget"] or DEFAULT_BUDGET)))
    dicts = [r.to_dict() for r in rows]
    lines = [f"{'protocol':<20} {'n':>3} {'l':>3} {'measured':>9} {'bound':>7}  {'formula':<20} match"]
    for r in rows:
        lines.append(
            f"{r.protocol:<20} {r.n:>3} {r.l if r.l is not None else '-':>3} {r.measured:>9} "
            f"{r.formula if r.formula is not None else '-':>7}  {r.relation + ' ' + r.formula_text:<20} "
            f"{'yes' if r.match else 'NO'}"
        )
    ok = all(r.match for r in rows)
    _emit(cfg, "\n".join(lines), {"command": "table", "rows": dicts, "all_match": ok}, dicts)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_replay(cfg: dict, path: str) -> int:
    try:
        trace = Trace.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read trace {path}: {exc}") from exc
    meta = trace.meta
    try:
        protocol = make(meta["protocol"], int(meta["n"]), meta.get("l"), meta.get("variant"))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"trace metadata does not name a registered protocol: {exc}") from exc
    try:
        verdict, again = run(protocol, meta["inputs"], Schedule.replay(trace))
    except ReplayDivergence as exc:
        _emit(cfg, f"replay diverged: {exc}", {"command": "replay", "outcome": "diverged", "message": str(exc)})
        return EXIT_VIOLATION
    same = [tuple(s) for s in again.steps] == [tuple(s) for s in trace.steps]
    human = (
        f"replayed {len(again.steps)} steps of {protocol.name} n={protocol.n}: "
        f"{'identical' if same else 'DIFFERENT'}\noutcome: {verdict.outcome}"
        + (f" ({verdict.message})" if verdict.message else "")
    )
    doc = _verdict_doc("replay", verdict, protocol, {"identical": same})
    _emit(cfg, human, doc)
    if not same:
        return EXIT_VIOLATION
    return _exit_for(verdict.outcome)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus-lab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, protocol: bool = True) -> None:
        p.add_argument("--config", help="JSON file with default settings")
        p.add_argument("--format", choices=("human", "json", "csv"), default=None)
        p.add_argument("--output", "-o", help="write the report here instead of stdout")
        p.add_argument("--quiet", "-q", action="store_true", default=None, help="no progress on stderr")
        if protocol:
            p.add_argument("--protocol", "-p", help="registered protocol name")
            p.add_argument("--n", type=int, help="number of processes")
            p.add_argument("--l", type=int, help="buffer capacity (buffer protocol)")
            p.add_argument("--variant", help="protocol variant (tas-tracks, tas-reset)")
            p.add_argument("--seed", type=int)

    p = sub.add_parser("run", help="run one execution")
    common(p)
    p.add_argument("--inputs", help="comma-separated inputs or random")
    p.add_argument("--sched", help="solo:P | rr | random[:SEED] | replay:P,P,...")
    p.add_argument("--budget", type=int, help="step budget")
    p.add_argument("--trace", help="write the execution trace to this file")

    p = sub.add_parser("verify", help="bounded-exhaustive exploration with solo checks")
    common(p)
    p.add_argument("--inputs", help="all (default), random:K, or one vector")
    p.add_argument("--depth", type=int)
    p.add_argument("--node-cap", dest="node_cap", type=int)
    p.add_argument("--witness", help="where to write a violation witness (default witness.trace)")

    p = sub.add_parser("sweep", help="many seeded random schedules")
    common(p)
    p.add_argument("--runs", type=int)
    p.add_argument("--inputs", help="mixed random inputs (default) or one vector")
    p.add_argument("--budget", type=int, help="step budget per run")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--witness", help="where to write a violation witness (default witness.trace)")

    p = sub.add_parser("table", help="measured space against the upper bounds")
    common(p, protocol=False)
    p.add_argument("--protocols", help="comma list (default: every bounded protocol)")
    p.add_argument("--n-range", dest="n_range", help="A..B or comma list (default 2..8)")
    p.add_argument("--l-values", dest="l_values", help="buffer capacities (default 1,2,3)")
    p.add_argument("--seeds", type=int, help="random schedules per input vector")
    p.add_argument("--budget", type=int)

    p = sub.add_parser("replay", help="re-execute a trace file and compare")
    common(p, protocol=False)
    p.add_argument("trace_file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        cfg = resolve(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "table":
            return cmd_table(cfg)
        return cmd_replay(cfg, args.trace_file)
    except UsageError as exc:
        print(f"consensus-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
