"""Experiment runner: `mpcbench run <config>` and `mpcbench sweep <config>`.

Exit codes: 0 success, 1 protocol-level rejection, 2 invalid config,
3 I/O failure. The output directory is --out, else $MPCBENCH_OUT, else
the config's "out" key, else ./mpcbench-out.
"""

import argparse
import csv
import dataclasses
import hashlib
import itertools
import json
import os
import random
import sys

from . import apps, constrounds, fair, privacy, zk
from .field import FieldError, field_from_name
from .mpc_third import ArithmeticCircuit, BGW, CircuitError
from .netsim import (AdversaryScript, ScriptError, _jsonable, canonical, execute, machines_program,
                     measure_exported)

EXIT_OK, EXIT_REJECTED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
OUT_ENV = "MPCBENCH_OUT"
DEFAULT_OUT = "mpcbench-out"


class ConfigError(ValueError):
    def __init__(self, key, msg):
        super().__init__(f"config key {key!r}: {msg}")
        self.key = key


@dataclasses.dataclass
class Job:
    prog: object                  # netsim program, or None for a local computation
    n: int
    field: object
    verdict: object               # outputs -> (ok, reason)
    summary: object               # outputs -> {column: bool or number}
    local: object = None          # rng -> outputs, when prog is None
    t: int = None


# -- config helpers ------------------------------------------------------------------------------

def _get(d, key, kind, default=dataclasses.MISSING, where="params"):
    if key not in d:
        if default is dataclasses.MISSING:
            raise ConfigError(f"{where}.{key}" if where else key, "is required")
        return default
    v = d[key]
    if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise ConfigError(f"{where}.{key}" if where else key, f"expected an integer, got {v!r}")
    if kind is not int and kind is not None and not isinstance(v, kind):
        raise ConfigError(f"{where}.{key}" if where else key, f"expected {kind.__name__}, got {v!r}")
    return v


def _by_player(v, n, key):
    """A list (player 1 first) or a dict with player-number keys."""
    if isinstance(v, list):
        if len(v) != n:
            raise ConfigError(f"params.{key}", f"needs {n} entries, got {len(v)}")
        return {i + 1: x for i, x in enumerate(v)}
    if isinstance(v, dict):
        try:
            out = {int(k): x for k, x in v.items()}
        except ValueError:
            raise ConfigError(f"params.{key}", "keys must be player numbers") from None
        if any(not 1 <= k <= n for k in out):
            raise ConfigError(f"params.{key}", f"player numbers must lie in 1..{n}")
        return out
    raise ConfigError(f"params.{key}", "expected a list or an object")


def _suite_bounds(cfg):
    n = _get(cfg, "n", int, where="")
    suite = _get(cfg, "suite", str, "third", where="")
    if suite not in ("third", "half"):
        raise ConfigError("suite", f"unknown suite {suite!r}; use third or half")
    default_t = (n - 1) // 3 if suite == "third" else (n - 1) // 2
    t = _get(cfg, "t", int, default_t, where="")
    if t < 0:
        raise ConfigError("t", "must be non-negative")
    if suite == "third" and not 3 * t < n:
        raise ConfigError("t", f"the t<n/3 suite requires 3t<n (t={t}, n={n})")
    if suite == "half" and not 2 * t < n:
        raise ConfigError("t", f"the t<n/2 suite requires 2t<n (t={t}, n={n})")
    mode = _get(cfg, "mode", str, "byzantine", where="")
    if mode not in ("byzantine", "passive"):
        raise ConfigError("mode", f"unknown mode {mode!r}")
    return n, t, suite, mode


def _field(cfg, default=None):
    name = cfg.get("field", default)
    if name is None:
        raise ConfigError("field", "is required")
    try:
        return field_from_name(name)
    except (FieldError, ValueError) as e:
        raise ConfigError("field", str(e)) from None


def _always_ok(outputs):
    return True, ""


def _first(outputs):
    return next((v for _, v in sorted(outputs.items()) if v is not None), None)


def adversary_from(cfg, n):
    a = cfg.get("adversary")
    if a is None:
        return None
    if not isinstance(a, dict):
        raise ConfigError("adversary", "expected an object")
    behavior = {}
    for k, b in enumerate(a.get("behavior", [])):
        if not isinstance(b, dict) or "name" not in b or "player" not in b:
            raise ConfigError(f"adversary.behavior[{k}]", "needs name and player")
        behavior[(b["name"], int(b["player"]))] = b.get("value", True)
    try:
        adv = AdversaryScript(
            fault_type=a.get("fault_type", "byzantine"),
            coalition=frozenset(int(p) for p in a.get("coalition", [])),
            rushing=bool(a.get("rushing", False)),
            halt={int(p): int(r) for p, r in a.get("halt", {}).items()},
            behavior=behavior,
        )
        adv.validate(n)
    except (ScriptError, ValueError, TypeError) as e:
        raise ConfigError("adversary", str(e)) from None
    return adv


# -- protocols -----------------------------------------------------------------------------------

def job_eval_const(cfg, p):
    n, t, suite, mode = _suite_bounds(cfg)
    F = _field(cfg)
    try:
        f = constrounds.parse_formula(_get(p, "formula", str))
    except constrounds.FormulaError as e:
        raise ConfigError("params.formula", str(e)) from None
    raw = _get(p, "inputs", None)
    inputs = {i + 1: v for i, v in enumerate(raw)} if isinstance(raw, list) else \
        {int(k.lstrip("x")): v for k, v in raw.items()}
    owners = p.get("owners")
    if owners is not None:
        owners = {int(k.lstrip("x")): int(v) for k, v in owners.items()}

    def prog(net):
        c = apps.make_suite(net, t, suite, mode)
        v = yield from constrounds.eval_const(c, f, inputs, owners)
        return {i: v for i in net.players}
    return Job(prog, n, F, _always_ok, lambda o: {"value": _first(o)}, t=t)


def job_circuit(cfg, p):
    n, t, _, mode = _suite_bounds(cfg)
    F = _field(cfg)
    text = p.get("circuit")
    if text is None:
        path = _get(p, "circuit_file", str)
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError("params.circuit_file", str(e)) from None
    try:
        circ = ArithmeticCircuit.loads(text, n)
    except CircuitError as e:
        raise ConfigError("params.circuit", str(e)) from None
    inputs = _by_player(_get(p, "inputs", None), n, "inputs")

    def prog(net):
        c = BGW(net, t, mode=mode)
        out = yield from c.eval_circuit(circ, inputs)
        return {i: tuple(out[i]) for i in net.players}
    return Job(prog, n, F, _always_ok, lambda o: {}, t=t)


def job_password(cfg, p):
    n, t, suite, mode = _suite_bounds(cfg)
    F = _field(cfg, "GF(2^16)")
    auth_mode = _get(p, "auth_mode", str, "fast")
    if auth_mode not in ("fast", "certified"):
        raise ConfigError("params.auth_mode", "use fast or certified")
    prog = apps.password_program(_get(p, "password", int), _get(p, "attempt", int), t, auth_mode,
                                 suite, mode, max_retries=_get(p, "max_retries", int, 8))

    def verdict(o):
        r = _first(o)
        return (r.verdicts[1] == apps.ACCEPT, "authentication rejected")

    def summary(o):
        r = _first(o)
        return {"accept": r.verdicts[1] == apps.ACCEPT, "certified": r.certified, "retries": r.retries}
    return Job(prog, n, F, verdict, summary, t=t)


def job_ballot(cfg, p, kind="ballot"):
    n, t, suite, mode = _suite_bounds(cfg)
    F = _field(cfg)
    try:
        apps._need_tally_field(F, n)
    except apps.AppError as e:
        raise ConfigError("field", str(e)) from None
    votes = _by_player(_get(p, "votes", None), n, "votes")
    prog = apps.ballot_program(votes, t, suite, mode, kind, bool(p.get("either", False)))
    if kind == "ballot":
        return Job(prog, n, F, _always_ok,
                   lambda o: {"tally": _first(o).tally, "disqualified": bool(_first(o).disqualified)}, t=t)
    return Job(prog, n, F, _always_ok, lambda o: {"unanimous": _first(o).outcome == apps.UNANIMOUS}, t=t)


def job_mail(cfg, p):
    n, t, suite, mode = _suite_bounds(cfg)
    F = _field(cfg)
    msgs = _by_player(_get(p, "messages", None), n, "messages")
    dests = _by_player(_get(p, "destinations", None), n, "destinations")
    mail_mode = _get(p, "mail_mode", str, "permutation")
    if mail_mode not in ("permutation", "espionage", "mailbox"):
        raise ConfigError("params.mail_mode", "use permutation, espionage or mailbox")
    kw = {}
    if mail_mode == "mailbox":
        kw = {"boxes": _get(p, "boxes", int, n), "max_attempts": _get(p, "max_attempts", int, 4)}
    prog = apps.mail_program(msgs, dests, mail_mode, t, suite, mode, **kw)

    def verdict(o):
        r = _first(o)
        if r.invalid:
            return False, f"invalid senders {r.invalid}"
        if r.undelivered:
            return False, f"undelivered senders {r.undelivered}"
        if mail_mode == "permutation" and r.collisions:
            return False, f"colliding destinations {[j for _, j, _ in r.collisions]}"
        return True, ""
    return Job(prog, n, F, verdict, lambda o: {"collision": bool(_first(o).collisions),
                                               "attempts": _first(o).attempts}, t=t)


def job_disclose(cfg, p):
    n = _get(cfg, "n", int, 3, where="")
    F = _field(cfg, "GF(2^8)")
    k = _get(p, "k", int, 4)
    if k < 3:
        raise ConfigError("params.k", "fairness parameter must be at least 3")
    value = _get(p, "value", int, 1)
    rounds = _get(p, "rounds", int, None) if p.get("rounds") is not None else None

    def prog(net):
        c = fair.SumSuite(net)
        f = yield from c.share(1, value)
        return (yield from fair.fair_disclose(c, f, k, rounds))

    def verdict(o):
        bad = [i for i, r in o.items() if r is not None and r["status"] == fair.CHEATING]
        return (not bad, f"cheating detected by {bad}")

    def summary(o):
        honest = [r for r in o.values() if r is not None]
        return {"detected": any(r["status"] == fair.CHEATING for r in honest),
                "error": any(r["guess"] != value for r in honest)}
    return Job(prog, n, F, verdict, summary)


def job_fair_coin(cfg, p):
    k = _get(p, "k", int, 4)
    if k < 3:
        raise ConfigError("params.k", "fairness parameter must be at least 3")
    R = _get(p, "rounds", int, k ** 3 + 1) if p.get("rounds") is not None else k ** 3 + 1
    quit_after = p.get("quit_after")
    if quit_after not in (None, "random") and not isinstance(quit_after, int):
        raise ConfigError("params.quit_after", "use an integer, \"random\" or null")
    value = p.get("value")

    def local(rng):
        F = rng.randrange(2) if value is None else int(value)
        coins = fair.ideal_coin(F, k, rng, R)
        stop = R if quit_after is None else rng.randrange(R + 1) if quit_after == "random" \
            else min(quit_after, R)
        seen = coins[:stop]
        g = fair.majority_guess(seen)
        return {1: {"value": F, "seen": len(seen), "guess": g},
                2: {"value": F, "seen": len(seen), "guess": g}}
    return Job(None, 2, None, _always_ok, lambda o: {"error": o[1]["guess"] != o[1]["value"]}, local)


def job_notary(cfg, p):
    table = _get(p, "table", list)
    nbits = _get(p, "nbits", int)
    if len(table) != 2 ** nbits:
        raise ConfigError("params.table", f"needs 2^nbits = {2 ** nbits} entries")
    F = _field(cfg, "GF(5)")
    x = _get(p, "x", list)
    K = _get(p, "K", int, 8)
    prog = zk.notarized_envelope(table, nbits, x, _get(p, "y", int), K)

    def verdict(o):
        return (o.get(2) is not None and o[2].verdict == "accept", "notary rejected the claim")
    return Job(prog, 3, F, verdict, lambda o: {"accept": o[2].verdict == "accept"})


def job_partition(cfg, p):
    if "table" in p:
        table = p["table"]
        try:
            privacy.check_table(table)
        except privacy.PartitionError as e:
            raise ConfigError("params.table", str(e)) from None
    else:
        try:
            table = privacy.read_table(_get(p, "table_file", str))
        except (OSError, privacy.PartitionError) as e:
            raise ConfigError("params.table_file", str(e)) from None
    prefer = _get(p, "prefer", str, "row")
    x, y = _get(p, "x", int, 0), _get(p, "y", int, 0)
    if not (0 <= x < len(table) and 0 <= y < len(table[0])):
        raise ConfigError("params.x", "input outside the table")
    ok, tree = privacy.is_partitionable(table, prefer)
    if not ok:
        def local(rng):
            return {1: {"partitionable": False}, 2: {"partitionable": False}}
        return Job(None, 2, None, lambda o: (False, "table is not partitionable"),
                   lambda o: {"partitionable": False}, local)
    proto = privacy.synthesize_protocol(table, tree)
    audit = privacy.privacy_audit(proto, table)
    witness = privacy.witness_dumps(tree)
    inner = machines_program(list(proto.build(x, y)))

    def prog(net):
        out = yield from inner(net)
        return {i: {"value": v, "audit": audit.status, "witness": witness} for i, v in out.items()}
    return Job(prog, 2, None, lambda o: (audit.ok, f"audit {audit.status}"),
               lambda o: {"partitionable": True})


PROTOCOLS = {
    "eval_const": job_eval_const,
    "circuit": job_circuit,
    "password": job_password,
    "ballot": job_ballot,
    "unanimous": lambda cfg, p: job_ballot(cfg, p, "unanimous"),
    "mail": job_mail,
    "disclose": job_disclose,
    "fair_coin": job_fair_coin,
    "notary": job_notary,
    "partition": job_partition,
}


def build_job(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _get(cfg, "seed", int, where="")
    name = _get(cfg, "protocol", str, where="")
    if name not in PROTOCOLS:
        raise ConfigError("protocol", f"unknown protocol {name!r}; known: {', '.join(sorted(PROTOCOLS))}")
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "expected an object")
    return PROTOCOLS[name](cfg, params)


# -- running -------------------------------------------------------------------------------------

def to_json(v):
    if dataclasses.is_dataclass(v) and not isinstance(v, type):
        v = dataclasses.asdict(v)
    if isinstance(v, dict):
        return {str(k): to_json(x) for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))}
    if isinstance(v, (list, tuple)):
        return [to_json(x) for x in v]
    return _jsonable(v)


def execute_job(job, cfg, seed, record=True):
    """Returns (outputs, metrics, trace lines)."""
    if job.prog is None:
        out = job.local(random.Random(seed))
        return out, (0, 0), [canonical({"field_bits": 0, "rounds": 0})]
    adv = adversary_from(cfg, job.n)
    tr = execute(job.prog, job.n, job.field, adv, seed=seed, record=record)
    lines = list(tr.export_lines()) if record else []
    return tr.outputs, tr.metrics, lines


def adversary_summary(cfg):
    a = cfg.get("adversary")
    if not a:
        return "none"
    parts = [a.get("fault_type", "byzantine"), f"coalition {sorted(a.get('coalition', []))}"]
    if a.get("halt"):
        parts.append("halt " + ", ".join(f"P{p}@{r}" for p, r in sorted(a["halt"].items())))
    for b in a.get("behavior", []):
        parts.append(f"{b['name']}[P{b['player']}]={b.get('value', True)}")
    if a.get("rushing"):
        parts.append("rushing")
    return "; ".join(parts)


def run_config(cfg):
    """Build and run one config; returns (exit code, report dict, trace lines)."""
    job = build_job(cfg)
    outputs, metrics, lines = execute_job(job, cfg, cfg["seed"])
    ok, reason = job.verdict(outputs)
    report = {
        "protocol": cfg["protocol"],
        "field": None if job.field is None else repr(job.field),
        "n": job.n,
        "t": job.t,
        "seed": cfg["seed"],
        "status": "ok" if ok else "rejected",
        "reason": "" if ok else reason,
        "outputs": to_json(outputs),
        "rounds": metrics[0],
        "bits": metrics[1],
        "trace_metrics_match": job.prog is None or measure_exported(lines) == tuple(metrics),
        "adversary": adversary_summary(cfg),
        "params": to_json(cfg.get("params", {})),
    }
    return (EXIT_OK if ok else EXIT_REJECTED), report, lines


def report_text(rep):
    lines = [f"protocol: {rep['protocol']}",
             f"field: {rep['field']}  n={rep['n']}  t={rep['t']}  seed={rep['seed']}",
             f"status: {rep['status']}" + (f" ({rep['reason']})" if rep["reason"] else ""),
             f"rounds: {rep['rounds']}  bits: {rep['bits']}",
             f"adversary: {rep['adversary']}",
             "outputs:"]
    for p, v in rep["outputs"].items():
        lines.append(f"  player {p}: {json.dumps(v, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def derive_seed(seed, cell, trial):
    h = hashlib.sha256(f"{seed}/{cell}/{trial}".encode()).digest()
    return int.from_bytes(h[:8], "big")


def _set_path(cfg, path, value):
    cfg = json.loads(json.dumps(cfg))
    keys = path.split(".")
    d = cfg
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value
    return cfg


def sweep_cells(cfg):
    grid = cfg.get("sweep", {})
    if not isinstance(grid, dict):
        raise ConfigError("sweep", "expected an object of path -> list of values")
    for k, vs in grid.items():
        if not isinstance(vs, list):
            raise ConfigError(f"sweep.{k}", "expected a finite list of values")
    keys = list(grid)
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    if any(not grid[k] for k in keys):
        return keys, []
    cells = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        c = base
        for k, v in zip(keys, combo):
            c = _set_path(c, k, v)
        cells.append((dict(zip(keys, combo)), c))
    return keys, cells


def run_sweep(cfg, trials):
    """Aggregate statistics per cell; returns (columns, rows)."""
    _get(cfg, "seed", int, where="")
    keys, cells = sweep_cells(cfg)
    rows = []
    extra_cols = []
    for idx, (point, ccfg) in enumerate(cells):
        job = build_job(ccfg)
        ok_count, rounds, bits = 0, 0, 0
        sums = {}
        for trial in range(trials):
            outputs, metrics, _ = execute_job(job, ccfg, derive_seed(cfg["seed"], idx, trial), record=False)
            ok, _ = job.verdict(outputs)
            ok_count += ok
            rounds += metrics[0]
            bits += metrics[1]
            for name, v in job.summary(outputs).items():
                col = f"{name}_rate" if isinstance(v, bool) else f"mean_{name}"
                sums[col] = sums.get(col, 0) + (v if v is not None else 0)
                if col not in extra_cols:
                    extra_cols.append(col)
        row = dict(point)
        row.update({"trials": trials, "success_rate": ok_count / trials if trials else 0.0,
                    "mean_rounds": rounds / trials if trials else 0.0,
                    "mean_bits": bits / trials if trials else 0.0})
        row.update({c: (s / trials if trials else 0.0) for c, s in sums.items()})
        rows.append(row)
    cols = keys + ["trials", "success_rate", "mean_rounds", "mean_bits"] + extra_cols
    return cols, rows


def sweep_text(cols, rows):
    def fmt(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)
    table = [cols] + [[fmt(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                     for row in table) + "\n"


# -- entry point ---------------------------------------------------------------------------------

def out_dir(args, cfg):
    return args.out or os.environ.get(OUT_ENV) or cfg.get("out") or DEFAULT_OUT


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON: {e}") from None


def _write(d, name, text):
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, name), "w", newline="") as fh:
        fh.write(text)


def cmd_run(args):
    cfg = _load(args.config)
    code, rep, lines = run_config(cfg)
    d = out_dir(args, cfg)
    text = report_text(rep)
    _write(d, "report.json", json.dumps(rep, sort_keys=True, indent=2) + "\n")
    _write(d, "report.txt", text)
    _write(d, "trace.jsonl", "".join(line + "\n" for line in lines))
    sys.stdout.write(text)
    return code


def cmd_sweep(args):
    cfg = _load(args.config)
    trials = args.trials if args.trials is not None else cfg.get("trials", 1)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 0:
        raise ConfigError("trials", "expected a non-negative integer")
    cols, rows = run_sweep(cfg, trials)
    d = out_dir(args, cfg)
    text = sweep_text(cols, rows)
    _write(d, "sweep.json", json.dumps({"columns": cols, "rows": rows}, sort_keys=True, indent=2) + "\n")
    _write(d, "sweep.txt", text)
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, "sweep.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in cols})
    sys.stdout.write(text)
    return EXIT_OK


def main(argv=None):
    ap = argparse.ArgumentParser(prog="mpcbench", description="Run simulated multiparty protocols.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one configured experiment")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (else ${OUT_ENV}, config 'out', {DEFAULT_OUT})")
    s = sub.add_parser("sweep", help="repeat an experiment over a parameter grid")
    s.add_argument("config")
    s.add_argument("--trials", type=int, help="trials per cell (else config 'trials', else 1)")
    s.add_argument("--out", help=f"output directory (else ${OUT_ENV}, config 'out', {DEFAULT_OUT})")
    args = ap.parse_args(argv)
    try:
        return cmd_run(args) if args.cmd == "run" else cmd_sweep(args)
    except ConfigError as e:
        sys.stderr.write(f"mpcbench: {e}\n")
        return EXIT_CONFIG
    except OSError as e:
        sys.stderr.write(f"mpcbench: {e}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
