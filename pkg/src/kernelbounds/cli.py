"""Command-line interface: ``kernelbounds <command> --config run.toml``.

Exit codes: 0 finite criterion (or success), 3 criterion diverges,
1 invalid input, 2 numerical budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, kernel_from_dict
from .core import cell_grid, make_grid, weight_from_dict
from .criteria import criterion
from .kernels import (TripleGrid, check_companion_laws, compose, estimate_min_h,
                      verify_membership)
from .opnorm import DiscreteOperator, discretize, norm_lower_bound
from .partition import accumulate_F, interval_masses, level_partition, verify_partition
from .quadrature import QuadratureError

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_DIVERGENT = 0, 1, 2, 3


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _envelope(cfg: RunConfig, command: str, body: dict) -> dict:
    return {"command": command, "version": __version__, "config_digest": cfg.digest(),
            **body, "config": cfg.resolved()}


# --------------------------------------------------------------------------
# commands


def cmd_criterion(cfg: RunConfig) -> tuple[dict, int]:
    rep = criterion(cfg.variant, cfg.kernel_cert(), cfg.exps, u=cfg.weight("u"),
                    v=cfg.weight("v"), mu=cfg.mu(), window=cfg.window, tol=cfg.tol,
                    eps_study=cfg.eps_study)
    code = EXIT_DIVERGENT if rep.divergent else EXIT_OK
    return _envelope(cfg, "criterion", rep.to_dict()), code


def _norm_grid(cfg: RunConfig, count: int | None = None):
    g = cfg.grid
    count = int(count if count is not None else g.get("count", 200))
    a, b = cfg.window
    xmax = float(g.get("xmax", b))
    xmin = float(g.get("xmin", a if a > 0 else xmax * 1e-6))
    return cell_grid(xmin, xmax, count, g.get("spacing", "geometric"))


def _operator(cfg: RunConfig, count: int | None = None) -> DiscreteOperator:
    if cfg.synthetic is not None:
        s = cfg.synthetic
        A = np.asarray(s["matrix"], dtype=float)
        rw = np.asarray(s.get("row_weights", np.ones(A.shape[0])), dtype=float)
        cw = np.asarray(s.get("col_weights", np.ones(A.shape[1])), dtype=float)
        return DiscreteOperator(A, rw, cw)
    u, v = cfg.weight("u"), cfg.weight("v")
    if u is None or v is None:
        raise ConfigError("norm estimation needs both [u] and [v]")
    return discretize(cfg.kernel_cert(), u, v, _norm_grid(cfg, count), cfg.side)


def estimate_norm(cfg: RunConfig, count: int | None = None):
    op = _operator(cfg, count)
    n = cfg.norm
    return norm_lower_bound(op, cfg.exps, max_iters=int(n.get("max_iters", 2000)),
                            seed=cfg.seed, restarts=int(n.get("restarts", 8))), op


def cmd_norm(cfg: RunConfig) -> tuple[dict, int]:
    est, op = estimate_norm(cfg)
    body = {"norm": est.to_dict(), "grid_size": op.shape[0]}
    if cfg.synthetic is None and cfg.grid.get("refine", False):
        trace = [{"grid_size": op.shape[0], "value": est.value}]
        fine, fop = estimate_norm(cfg, 2 * op.shape[0])
        trace.append({"grid_size": fop.shape[0], "value": fine.value})
        body["refinement"] = trace
    return _envelope(cfg, "norm", body), EXIT_OK


def cmd_verify_class(cfg: RunConfig) -> tuple[dict, int]:
    k = cfg.kernel_cert()
    if not k.has_decomposition:
        raise ConfigError("kernel has no companion data to verify")
    g = cfg.grid
    pts = make_grid(float(g.get("xmin", 1.0)), float(g.get("xmax", 100.0)),
                    int(g.get("count", 30)), g.get("spacing", "geometric"))
    triples = TripleGrid.from_grid(pts)
    mem = verify_membership(k, triples)
    body = {
        "kernel": k.to_dict(),
        "membership": {"ok": mem.ok, "worst_lower": mem.worst_lower,
                       "worst_upper": mem.worst_upper, "worst_triple": mem.worst_triple,
                       "h": mem.h, "failures": mem.failures},
        "min_h": {"value": estimate_min_h(k, triples), "kind": "grid lower bound",
                  "triples": len(triples)},
    }
    if k.order >= 1:
        laws = check_companion_laws(k, triples)
        body["companion_laws"] = {"ok": laws.ok,
                                  "monotonicity_failures": laws.monotonicity_failures,
                                  "chain_failures": laws.chain_failures,
                                  "worst_chain_ratio": laws.worst_chain_ratio}
    return _envelope(cfg, "verify-class", body), EXIT_OK


def cmd_compose(cfg: RunConfig) -> tuple[dict, int]:
    c = cfg.compose
    if not c or "outer" not in c or "inner" not in c:
        raise ConfigError("[compose] needs 'outer' and 'inner' kernel tables")
    ka = kernel_from_dict({**c["outer"], "lift": False})
    kb = kernel_from_dict({**c["inner"], "lift": False})
    w = weight_from_dict(c.get("weight", {"kind": "constant", "value": 1.0}))
    k = compose(ka, w, kb, tol=min(cfg.tol, 1e-10))
    pts = make_grid(float(c.get("xmin", 1.0)), float(c.get("xmax", 4.0)),
                    int(c.get("count", 8)), "uniform").points
    X, S = np.meshgrid(pts, pts, indexing="ij")
    vals = np.full(X.shape, np.nan)
    low = X >= S
    vals[low] = k(X[low], S[low])
    body = {"order": k.order, "sign": k.sign,
            "orders": [ka.order, kb.order],
            "table": {"points": pts, "values": vals}}
    return _envelope(cfg, "compose", body), EXIT_OK


def cmd_partition(cfg: RunConfig) -> tuple[dict, int]:
    pc = cfg.partition or {}
    k = cfg.kernel_cert()
    v = cfg.weight("v") or weight_from_dict({"kind": "constant", "value": 1.0})
    f = weight_from_dict(pc.get("f", {"kind": "constant", "value": 1.0}))
    h = float(pc.get("h", k.h if k.h is not None else 1.0))
    a, b = cfg.window
    xmin = float(pc.get("xmin", a if a > 0 else b * 1e-3))
    xmax = float(pc.get("xmax", b))
    pts = make_grid(xmin, xmax, int(pc.get("count", 200)))
    F = accumulate_F(k, v, f, pts)
    Ffun = lambda xs: accumulate_F(k, v, f, np.asarray(xs, dtype=float))
    part = level_partition(pts.points, F, h, F_callable=Ffun)
    rep = verify_partition(Ffun, part, h, int(pc.get("samples", 1000)))
    body = {"h": h, "base": part.base, "alpha_F": part.alpha_F, "empty": part.empty,
            "intervals": part.table(Ffun) if not part.empty else [],
            "verification": {"ok": rep.ok, "sandwich_violations": rep.sandwich_violations,
                             "coverage_ok": rep.coverage_ok, "gap_ok": rep.gap_ok,
                             "samples": rep.samples}}
    mu = cfg.mu()
    if mu is not None and not part.empty:
        body["interval_masses"] = interval_masses(part, mu)
    if part.empty:
        body["flag"] = "F vanishes on the grid"
    return _envelope(cfg, "partition", body), EXIT_OK


# --------------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("kernel", "alpha", "exponents", "p", "q", "window", "grid")
CSV_COLUMNS = ["kernel", "alpha", "p", "q", "window_a", "window_b", "grid", "components",
               "max_B", "argmax", "B_error", "form_gap", "norm", "norm_spread", "ratio",
               "verdict", "error"]
CSV_SCHEMA = 1


def sweep_points(cfg: RunConfig) -> list[dict]:
    axes = {k: cfg.sweep[k] for k in SWEEP_AXES if k in cfg.sweep}
    for k, vals in axes.items():
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"sweep axis '{k}' must be a nonempty list")
    if not axes:
        return [{}]
    names = list(axes)
    points, seen = [], set()
    for combo in itertools.product(*(axes[n] for n in names)):
        pt = dict(zip(names, combo))
        kern = pt.get("kernel", cfg.kernel)
        kname = kern if isinstance(kern, str) else kern.get("name")
        if "alpha" in pt and kname != "power_diff":
            pt.pop("alpha")
        key = json.dumps(pt, sort_keys=True)
        if key not in seen:
            seen.add(key)
            points.append(pt)
    return points


def _fmt(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_row(raw: dict, point: dict) -> dict:
    """One sweep row; failures are recorded in the row."""
    row: dict[str, Any] = {"verdict": "", "error": ""}
    try:
        cfg = RunConfig.from_dict(raw).with_overrides(**point)
        cfg.eps_study = False
        kern = cfg.kernel
        row.update({
            "kernel": kern.get("name"), "alpha": kern.get("alpha"), "p": cfg.p, "q": cfg.q,
            "window_a": cfg.window[0], "window_b": cfg.window[1],
            "grid": int(cfg.grid.get("count", 200))})
        rep = criterion(cfg.variant, cfg.kernel_cert(), cfg.exps, u=cfg.weight("u"),
                        v=cfg.weight("v"), mu=cfg.mu(), window=cfg.window, tol=cfg.tol)
        row["components"] = ";".join(_fmt(c.value) if math.isfinite(c.value) else "inf"
                                     for c in rep.components)
        row["verdict"] = rep.verdict
        row["form_gap"] = rep.cross_check_delta
        row["B_error"] = max(c.error for c in rep.components)
        if not rep.divergent:
            row["max_B"] = rep.max_value
            row["argmax"] = rep.argmax
        est, _ = estimate_norm(cfg)
        row["norm"] = est.value
        row["norm_spread"] = est.spread
        if not rep.divergent and rep.max_value > 0 and math.isfinite(est.value):
            row["ratio"] = est.value / rep.max_value
    except (ValueError, ArithmeticError) as exc:
        row.setdefault("kernel", point.get("kernel"))
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(cfg: RunConfig, workers: int | None = None) -> tuple[list[dict], int]:
    points = sweep_points(cfg)
    workers = workers if workers is not None else cfg.workers
    raw = cfg.raw
    if workers and workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_row, [raw] * len(points), points))
    else:
        rows = [run_row(raw, pt) for pt in points]
    return rows, EXIT_OK


def rows_to_csv(cfg: RunConfig, rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# kernelbounds {__version__} csv-schema {CSV_SCHEMA} config {cfg.digest()}\n")
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: _fmt(r.get(c)) for c in CSV_COLUMNS})
    return buf.getvalue()


# --------------------------------------------------------------------------
# entry point

COMMANDS = {"criterion": cmd_criterion, "norm": cmd_norm, "verify-class": cmd_verify_class,
            "compose": cmd_compose, "partition": cmd_partition}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kernelbounds", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("json", "csv"),
                        default="csv" if name == "sweep" else "json")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--tol", type=float)
    return ap


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_path(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tol is not None:
            cfg.tol = args.tol
        if args.workers is not None:
            cfg.workers = args.workers
        if args.command == "sweep":
            if args.seed is not None or args.tol is not None:
                cfg.raw.update({k: getattr(cfg, k) for k in ("seed", "tol")})
            rows, code = cmd_sweep(cfg)
            if args.format == "csv":
                text = rows_to_csv(cfg, rows)
            else:
                text = json.dumps(_clean(_envelope(cfg, "sweep", {"rows": rows})), indent=2) + "\n"
        else:
            report, code = COMMANDS[args.command](cfg)
            if args.format == "csv":
                raise ConfigError(f"{args.command} writes JSON only")
            text = json.dumps(_clean(report), indent=2) + "\n"
    except (ConfigError, FileNotFoundError, KeyError, TypeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except QuadratureError as exc:
        sys.stderr.write(f"numerical budget exhausted: {exc}\n")
        return EXIT_BUDGET
    _emit(text, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
