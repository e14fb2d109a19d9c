"""Batch scenario runner.

Usage::

    sqav vote|amc|attack|verify --config PATH [--seed N] [--out DIR] [--format json|csv]

The output directory defaults to ``$SQAV_OUT_DIR`` or the current directory.
Exit codes: 0 success, 2 validation error, 3 protocol abort, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import adversary, amc, protocol, theorems
from .attacks import attack_from_dict
from .errors import ConfigurationError, SqavError
from .qstate import SparseState, basis_state
from .rng import TRIAL, check_seed, make_rng

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_FAIL = 0, 2, 3, 4
SCHEMA = "sqav.cli/1"
COMMANDS = ("vote", "amc", "attack", "verify")
OUT_ENV = "SQAV_OUT_DIR"


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: Path
    seed: int | None
    out: Path
    format: str = "json"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not self.config.is_file():
            raise UsageError(f"config file {self.config} does not exist")
        if self.seed is not None:
            try:
                self.seed = check_seed(self.seed)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"--seed: {exc}") from None
        if self.format not in ("json", "csv"):
            raise UsageError("--format must be json or csv")


def load_config(manifest: RunManifest) -> dict:
    text = manifest.config.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{manifest.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{manifest.config}: top level must be a JSON object")
    if manifest.seed is not None:
        data["seed"] = manifest.seed
    return data


def _field(cfg: dict, name: str, kind=int, default=...):
    if name not in cfg:
        if default is ...:
            raise UsageError(f"config field {name!r} is required")
        return default
    value = cfg[name]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise UsageError(f"config field {name!r} must be an integer, got {value!r}")
    if kind is list and not isinstance(value, list):
        raise UsageError(f"config field {name!r} must be a list, got {value!r}")
    return value


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# commands -----------------------------------------------------------------------


def cmd_vote(manifest: RunManifest) -> int:
    cfg = load_config(manifest)
    config = protocol.ProtocolConfig(
        n=_field(cfg, "n"),
        m=_field(cfg, "m"),
        delta0=_field(cfg, "delta0", default=1),
        delta1=_field(cfg, "delta1", default=1),
        seed=_field(cfg, "seed", default=0),
    )
    votes = _field(cfg, "votes", list)
    attack = attack_from_dict(cfg.get("attack"), config.n, config.m)
    tr = protocol.run_full_protocol(config, votes, attack, ballots=cfg.get("ballots"), indices=cfg.get("indices"))
    write_atomic(manifest.out / "transcript.json", tr.to_json())
    if tr.tally is not None:
        lines = [f"R = {tuple(tr.tally['R'])}", f"N = {tuple(tr.tally['N'])}"]
    else:
        lines = ["no tally"]
    lines.append(f"seed = {config.seed}")
    lines.append(f"status = {'aborted: ' + tr.abort_reason if tr.aborted else 'ok'}")
    summary = "\n".join(lines) + "\n"
    write_atomic(manifest.out / "summary.txt", summary)
    sys.stdout.write(summary)
    return EXIT_ABORT if tr.aborted else EXIT_OK


def _attack_rows(cfg: dict, seed: int):
    kind = _field(cfg, "attack", str)
    n, m = _field(cfg, "n"), _field(cfg, "m", default=2)
    trials = _field(cfg, "trials", default=10_000)
    rows, extras = [], []
    if kind == "intercept":
        delta0 = _field(cfg, "delta0")
        xs = _field(cfg, "x", list)
        if not xs:
            raise UsageError("config field 'x' must list at least one value")
        config = protocol.ProtocolConfig(n, m, delta0=delta0, seed=seed)
        for i, x in enumerate(xs):
            rep = adversary.simulate_intercept(config, int(x), trials, rng=make_rng(seed, TRIAL, i))
            rows.append({"attack": "intercept", "n": n, "m": m, "delta": delta0, "x": x,
                         "predicted": rep.predicted_pass, "measured": rep.measured_pass,
                         "stderr": rep.stderr, "trials": rep.trials})
            extras.append({"x": x, "agrees": rep.agrees(), **rep.extra})
    elif kind == "replacement":
        deltas = _field(cfg, "delta0", list)
        if not deltas:
            raise UsageError("config field 'delta0' must list at least one value")
        state_cfg = cfg.get("state", "zero")
        phi = basis_state([0] * n, m) if state_cfg == "zero" else SparseState.from_json_dict(state_cfg)
        for i, d in enumerate(deltas):
            rep = adversary.detection_stats_replacement(phi, n, m, int(d), trials, rng=make_rng(seed, TRIAL, i))
            rows.append({"attack": "replacement", "n": n, "m": m, "delta": d, "x": "",
                         "predicted": rep.predicted_pass, "measured": rep.measured_pass,
                         "stderr": rep.stderr, "trials": rep.trials})
            extras.append({"delta0": d, "agrees": rep.agrees(), **rep.per_basis, **rep.extra})
        esc = [e["every_test_escape"] for e in extras]
        if any(b > a for a, b in zip(esc, esc[1:])):
            extras.append({"monotone": False})
    else:
        raise UsageError(f"unknown attack {kind!r}; expected 'intercept' or 'replacement'")
    return rows, extras


def cmd_attack(manifest: RunManifest) -> int:
    cfg = load_config(manifest)
    seed = _field(cfg, "seed", default=0)
    rows, extras = _attack_rows(cfg, seed)
    ok = all(e.get("agrees", True) and e.get("monotone", True) for e in extras)
    if manifest.format == "csv":
        write_atomic(manifest.out / "attack.csv", adversary.sweep_csv(rows))
    else:
        write_atomic(manifest.out / "attack.json",
                     _dump({"schema": SCHEMA, "seed": seed, "rows": rows, "details": extras, "passed": ok}))
    for r in rows:
        sys.stdout.write(f"{r['attack']} delta={r['delta']} x={r['x']}: predicted={r['predicted']:.6g} "
                         f"measured={r['measured']:.6g} +- {r['stderr']:.2g}\n")
    sys.stdout.write(f"verdict = {'pass' if ok else 'fail'}\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(manifest: RunManifest) -> int:
    cfg = load_config(manifest)
    n_min, n_max = _field(cfg, "n_min", default=2), _field(cfg, "n_max", default=5)
    m_max = _field(cfg, "m_max", default=4)
    if n_min < 2 or n_max < n_min or m_max < 2:
        raise UsageError(f"invalid ranges: need 2 <= n_min <= n_max and m_max >= 2 (got {n_min}, {n_max}, {m_max})")
    seed = _field(cfg, "seed", default=0)
    states = []
    for i, entry in enumerate(cfg.get("states", [])):
        try:
            states.append((int(entry["theorem"]), SparseState.from_json_dict(entry["state"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"states[{i}]: {exc}") from None
    results = theorems.verification_suite(n_min, n_max, m_max, seed,
                                          _field(cfg, "unitaries", default=20), states)
    passed = all(r.passed for r in results)
    if manifest.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "params", "value", "passed"])
        for r in results:
            w.writerow([r.name, json.dumps(r.params, sort_keys=True), r.value, r.passed])
        write_atomic(manifest.out / "verify.csv", buf.getvalue())
    else:
        write_atomic(manifest.out / "verify.json", theorems.report_json(results, schema=SCHEMA, seed=seed) + "\n")
    failed = [r for r in results if not r.passed]
    sys.stdout.write(f"{len(results) - len(failed)}/{len(results)} checks passed\n")
    for r in failed:
        sys.stdout.write(f"FAILED {r.name} {r.params} value={r.value:.3g}\n")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_amc(manifest: RunManifest) -> int:
    cfg = load_config(manifest)
    counts = _field(cfg, "input_counts", list, default=None)
    values = _field(cfg, "values", list)
    m = _field(cfg, "m")
    if counts is None:
        counts = [1] * len(values)
    if "parties" in cfg and cfg["parties"] != len(counts):
        raise UsageError("'parties' disagrees with the length of 'input_counts'")
    inputs = amc.AmcInputs.from_flat(counts, values, m)
    config = amc.AmcConfig(
        delta2=_field(cfg, "delta2", default=1),
        delta3=_field(cfg, "delta3", default=1),
        seed=_field(cfg, "seed", default=0),
        mode=cfg.get("mode", "exact"),
    )
    result = amc.run_amc(inputs, config)
    payload = {
        "schema": SCHEMA,
        "seed": config.seed,
        "mode": config.mode,
        "output": list(result.output),
        "multiset": sorted(result.output),
        "sum": sum(result.output),
        "verified": result.verified,
        "abort_reason": result.transcript.abort_reason,
    }
    if cfg.get("ranking"):
        payload["ranking"] = sorted(result.output, reverse=True)
    write_atomic(manifest.out / "amc.json", _dump(payload))
    sys.stdout.write(f"output = {tuple(result.output)}\nsum = {payload['sum']}\n")
    if "ranking" in payload:
        sys.stdout.write(f"ranking = {tuple(payload['ranking'])}\n")
    return EXIT_ABORT if result.aborted else EXIT_OK


HANDLERS = {"vote": cmd_vote, "amc": cmd_amc, "attack": cmd_attack, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqav", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", type=Path)
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out = args.out or Path(os.environ.get(OUT_ENV, "."))
    try:
        manifest = RunManifest(args.command, args.config, args.seed, out, args.format)
        return HANDLERS[args.command](manifest)
    except (UsageError, ConfigurationError) as exc:
        sys.stderr.write(f"sqav {args.command}: {exc}\n")
        return EXIT_USAGE
    except SqavError as exc:
        sys.stderr.write(f"sqav {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
