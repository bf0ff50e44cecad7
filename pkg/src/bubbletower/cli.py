"""Command-line driver: config parsing, command dispatch and artifact output.

Every command writes ``<command>-<hash>.json`` and ``<command>-<hash>.csv``
into the output directory.  The hash covers the command, the full config,
the seed and the numeric options, so identical inputs give identical files.
Exit status: 0 when all checks pass, 1 on a failed check, 2 on a bad config.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .ansatz import (DEFAULT_NODES, assemble_tower, check_expansion_waje, grid_for_table,
                     projection_gaps)
from .bubbles import oracle_integrals
from .cascade import (ConfigError, EpsilonUnderflow, TowerConfig, build_table,
                      identity_suite)
from .residual import DEFAULT_P, sweep_and_fit
from .solver import (inverse_norm_trend, kernel_scaled_residual, newton_solve_liouville,
                     newton_solve_meanfield)

COMMANDS = ("verify", "cascade", "ansatz", "residual-sweep", "solve", "solve-meanfield", "report")
CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(TowerConfig))
EXTRA_KEYS = ("grid_nodes", "p", "rho_sweep")
DEFAULT_SWEEP = "1e-3:1e-1:7"
TREND_RHOS = (1e-1, 3e-2, 1e-2, 3e-3)
TREND_GRID_TOL = 0.05

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


@dataclasses.dataclass
class RunManifest:
    command: str
    config: TowerConfig
    out_dir: Path
    overrides: list = dataclasses.field(default_factory=list)
    seed: int = 0
    grid_nodes: int = DEFAULT_NODES
    p: float = DEFAULT_P
    rho_sweep: tuple = ()


# --- config --------------------------------------------------------------------------

def parse_rho_range(text):
    """'start:stop:count' -> log-spaced values."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ConfigError(f"bad rho range {text!r}; expected start:stop:count", "rho_sweep")
    if not (a > 0 and b > 0 and n >= 2):
        raise ConfigError(f"bad rho range {text!r}", "rho_sweep")
    return tuple(float(x) for x in np.logspace(math.log10(a), math.log10(b), n))


def _coerce(key, value):
    if key == "m":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"m={value!r} must be an integer", key)
        return int(value)
    if key == "skip_admissibility":
        if not isinstance(value, bool):
            raise ConfigError(f"{key}={value!r} must be true or false", key)
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}={value!r} must be a number", key)
    return float(value)


def parse_run_config(data: dict):
    """Validate a flat dict; returns (TowerConfig, extras)."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS) - set(EXTRA_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown[0])
    for key in ("m", "tau", "alpha1", "rho"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}", key)
    cfg = TowerConfig(**{k: _coerce(k, v) for k, v in data.items() if k in CONFIG_KEYS})
    extras = {}
    if "grid_nodes" in data:
        n = data["grid_nodes"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 1001:
            raise ConfigError(f"grid_nodes={n!r} must be an integer >= 1001", "grid_nodes")
        extras["grid_nodes"] = n
    if "p" in data:
        extras["p"] = _coerce("p", data["p"])
        if not extras["p"] > 1:
            raise ConfigError("p must exceed 1", "p")
    if "rho_sweep" in data:
        rs = data["rho_sweep"]
        if isinstance(rs, str):
            extras["rho_sweep"] = parse_rho_range(rs)
        elif isinstance(rs, list) and rs:
            extras["rho_sweep"] = tuple(_coerce("rho_sweep", x) for x in rs)
        else:
            raise ConfigError("rho_sweep must be 'start:stop:count' or a list", "rho_sweep")
    return cfg, extras


def parse_config(text: str) -> TowerConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON: {e}")
    return parse_run_config(data)[0]


def _parse_override(item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if key not in CONFIG_KEYS and key not in EXTRA_KEYS:
        raise ConfigError(f"unknown key {key!r}", key)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_manifest(args) -> RunManifest:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for item in args.set or []:
        k, v = _parse_override(item)
        data[k] = v
    if args.grid is not None:
        data["grid_nodes"] = args.grid
    if args.p is not None:
        data["p"] = args.p
    if args.rho is not None:
        data["rho_sweep"] = args.rho
    cfg, extras = parse_run_config(data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return RunManifest(args.command, cfg, out, list(args.set or []), args.seed,
                       extras.get("grid_nodes", DEFAULT_NODES), extras.get("p", DEFAULT_P),
                       extras.get("rho_sweep", parse_rho_range(DEFAULT_SWEEP)))


# --- output ----------------------------------------------------------------------------

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in x]
    return x


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def manifest_hash(man: RunManifest):
    key = {"command": man.command, "config": dataclasses.asdict(man.config), "seed": man.seed,
           "grid_nodes": man.grid_nodes, "p": man.p, "rho_sweep": list(man.rho_sweep)}
    blob = json.dumps(_num(key), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def table_header(table):
    lines = [f"{k}={_fmt(v)}" for k, v in table.scalars().items()]
    cols, rows = table.rows()
    lines.append("table," + ",".join(cols))
    lines += ["table," + ",".join(_fmt(v) for v in r) for r in rows]
    return ["# " + ln for ln in lines]


def write_artifacts(man: RunManifest, table, payload: dict, columns, rows):
    stem = f"{man.command}-{manifest_hash(man)}"
    buf = io.StringIO()
    if table is not None:
        buf.write("\n".join(table_header(table)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    csv_path = man.out_dir / f"{stem}.csv"
    json_path = man.out_dir / f"{stem}.json"
    csv_path.write_text(buf.getvalue())
    json_path.write_text(json.dumps(_num(payload), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


# --- commands -------------------------------------------------------------------------

def _status(ok):
    return "PASS" if ok else "FAIL"


def cmd_verify(man):
    table = build_table(man.config)
    ident = identity_suite(table)
    oracles = [oracle_integrals(float(a)) for a in table.alpha]
    oracle_ok = all(max(o.errors().values()) <= 1e-8 for o in oracles)
    rows = [("identity", k, "", v) for k, v in ident.errors.items()]
    for o in oracles:
        rows += [("oracle", k, o.alpha, err) for k, _, _, err in o.rows()]
    ok = ident.passed and oracle_ok
    payload = {"identities": ident.errors, "identity_worst": ident.worst,
               "identities_passed": ident.passed, "oracles_passed": oracle_ok,
               "oracles": {str(o.alpha): o.errors() for o in oracles}, "passed": ok}
    print(f"identities: {_status(ident.passed)} (worst {ident.worst:.2e})")
    print(f"oracles: {_status(oracle_ok)}")
    return ok, table, payload, ("check", "name", "alpha", "rel_error"), rows


def cmd_cascade(man):
    table = build_table(man.config)
    cols, rows = table.rows()
    payload = {"scalars": table.scalars(), "columns": list(cols), "rows": rows, "passed": True}
    for r in rows:
        print("  ".join(_fmt(v) for v in r))
    return True, table, payload, cols, rows


def cmd_ansatz(man):
    table = build_table(man.config)
    grid = grid_for_table(table, man.grid_nodes)
    tw = assemble_tower(table, grid)
    waje = check_expansion_waje(table, tw.U)
    gaps = projection_gaps(table, grid)
    payload = {"waje_per_annulus": waje.per_annulus, "waje_argmax_r": np.exp(waje.argmax_t),
               "projection_gap": [g for g, _ in gaps], "projection_bound": [b for _, b in gaps],
               "passed": True}
    print("waje deviation per annulus:", " ".join(f"{x:.3e}" for x in waje.per_annulus))
    rows = zip(grid.t, grid.r, tw.U.values)
    return True, table, payload, ("t", "r", "U"), rows


def cmd_residual_sweep(man):
    table = build_table(man.config)
    reports = [sweep_and_fit(man.config, man.rho_sweep, man.p, kind, man.grid_nodes)
               for kind in ("liouville", "meanfield")]
    ok = all(r.passed for r in reports)
    payload = {r.kind: r.as_dict() for r in reports}
    payload["rhos"] = list(man.rho_sweep)
    payload["passed"] = ok
    rows = []
    for r in reports:
        print(f"{r.kind}: slope {r.slope:.4f}, max deviation {r.max_log_deviation:.3f} "
              f"{_status(r.passed)}")
        for rho, nrm, rep in zip(r.rhos, r.norms, r.reports):
            rows.append((r.kind, rho, nrm, *rep.per_annulus, rep.saturated))
    cols = ("kind", "rho", "norm") + tuple(f"annulus_{j + 1}" for j in range(table.m)) + ("saturated",)
    return ok, table, payload, cols, rows


def _solution_rows(u, table, man):
    grid = u.grid
    U = assemble_tower(table, grid).U.values
    return zip(grid.t, grid.r, u.values, U, u.values - U)


def _solve_ok(rep):
    far_ok = not math.isfinite(rep.farfield_coeff) or rep.farfield_rel_err <= 0.1
    return rep.converged and rep.nodal_ok and far_ok


def cmd_solve(man):
    table = build_table(man.config)
    grid = grid_for_table(table, man.grid_nodes)
    rep, u = newton_solve_liouville(table, grid)
    ok = _solve_ok(rep)
    payload = rep.as_dict() | {"passed": ok}
    print(f"{rep.status}: {rep.iterations} iterations, residual {rep.final_residual_sup:.2e}, "
          f"nodal radii {[round(x, 6) for x in rep.nodal_radii]}, far-field c {rep.farfield_coeff:.4f}")
    return ok, table, payload, ("t", "r", "u", "U", "phi"), _solution_rows(u, table, man)


def cmd_solve_meanfield(man):
    table = build_table(man.config)
    grid = grid_for_table(table, man.grid_nodes)
    rep, u = newton_solve_meanfield(table, grid)
    rho = man.config.rho
    r0 = table.lambda0 / rep.s0 / rho
    r1 = table.lambda1 * table.tau / rep.s1 / (rho * man.config.nu_coeff)
    mass_ok = abs(r0 - 1) <= 0.2 and abs(r1 - 1) <= 0.2
    ok = _solve_ok(rep) and mass_ok
    payload = rep.as_dict() | {"rho_ratio0": r0, "rho_ratio1": r1, "passed": ok}
    print(f"{rep.status}: {rep.iterations} iterations, residual {rep.final_residual_sup:.2e}, "
          f"lambda0/(s0 rho) {r0:.4f}, lambda1 tau/(s1 rho) {r1:.4f}")
    return ok, table, payload, ("t", "r", "u", "U", "phi"), _solution_rows(u, table, man)


def cmd_report(man):
    """All checks on one config; one summary row per check."""
    rows, payload = [], {}
    for name, fn in (("verify", cmd_verify), ("residual-sweep", cmd_residual_sweep),
                     ("solve", cmd_solve), ("solve-meanfield", cmd_solve_meanfield)):
        ok, table, sub, _, _ = fn(man)
        payload[name] = sub
        rows.append((name, ok))
    cfg = man.config
    for kind in ("L_liouville", "L_meanfield"):
        tables = [build_table(cfg.replace(rho=r)) for r in TREND_RHOS]
        tr = inverse_norm_trend(tables, kind, man.seed, man.grid_nodes, man.p)
        fine = inverse_norm_trend(tables, kind, man.seed, 2 * man.grid_nodes - 1, man.p)
        # a fitted exponent only means something if the ratios are grid-resolved
        spread = max(abs(a / b - 1) for a, b in zip(tr.ratios, fine.ratios))
        ok = tr.passed and spread <= TREND_GRID_TOL
        payload[f"trend-{kind}"] = dataclasses.asdict(tr) | {
            "ratios_2N": fine.ratios, "grid_spread": spread, "passed": ok}
        rows.append((f"trend-{kind}", ok))
        print(f"inverse-norm trend {kind}: exponent {tr.growth_exponent:.3f}, "
              f"N vs 2N spread {spread:.1%} {_status(ok)}")
    kern = []
    for j in range(table.m):
        vals = [kernel_scaled_residual(table, j, n) for n in (5001, 10001, 20001)]
        shrink = all(b[0] < a[0] and b[1] < a[1] for a, b in zip(vals, vals[1:]))
        kern.append(shrink)
        payload[f"kernel-Z0-{j + 1}"] = vals
    rows.append(("kernel-Z0", all(kern)))
    ok = all(r[1] for r in rows)
    payload["passed"] = ok
    return ok, table, payload, ("check", "passed"), rows


DISPATCH = {"verify": cmd_verify, "cascade": cmd_cascade, "ansatz": cmd_ansatz,
            "residual-sweep": cmd_residual_sweep, "solve": cmd_solve,
            "solve-meanfield": cmd_solve_meanfield, "report": cmd_report}


def run(man: RunManifest) -> int:
    try:
        ok, table, payload, cols, rows = DISPATCH[man.command](man)
    except (ConfigError, EpsilonUnderflow) as e:
        write_artifacts(man, None, {"status": "failed", "error": str(e),
                                    "key": getattr(e, "key", None)}, ("status",), [("failed",)])
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        write_artifacts(man, None, {"status": "failed", "error": f"{type(e).__name__}: {e}"},
                        ("status",), [("failed",)])
        raise
    rows = list(rows)
    write_artifacts(man, table, payload, cols, rows)
    print(f"{man.command}: {_status(ok)}")
    return EXIT_OK if ok else EXIT_FAIL


def make_parser():
    ap = argparse.ArgumentParser(prog="bubbletower",
                                 description="Sign-changing bubble tower construction and checks.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat JSON config file")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rho", help="sweep range start:stop:count (log-spaced)")
    ap.add_argument("--p", type=float, help="L^p exponent for residual norms")
    ap.add_argument("--grid", type=int, help="number of radial grid nodes")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        man = build_manifest(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        _config_failure_marker(args, e)
        return EXIT_CONFIG
    return run(man)


def _config_failure_marker(args, err):
    """Failure record for configs rejected before a manifest exists."""
    key = json.dumps({k: v for k, v in sorted(vars(args).items())}, default=str)
    stem = f"{args.command}-{hashlib.sha256(key.encode()).hexdigest()[:12]}"
    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rec = {"status": "failed", "error": str(err), "key": err.key}
        (out / f"{stem}.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
        (out / f"{stem}.csv").write_text("status\nfailed\n")
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
