"""Command line entry point: ``trapsmooth <command> [--config FILE] [--out DIR]``.

Commands
--------
profile          dump ``x,a,A2,V1,V`` over the configured range
resolvent-scan   cutoff resolvent norms over an h-ladder, with exponent fit
quasimode-check  residual and norm laws of the inflection quasimodes
evolve           smoothing functionals over the k-ladder (upper-bound check)
saturate         quasimode saturation ratios over the k-ladder
report           collect every JSON summary in the output directory

Exit codes: 0 ok, 2 configuration error, 3 numerical non-convergence,
4 conflicting summaries in ``report``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as cfgmod
from . import evolution, geometry, quasimode, resolvent, scaling
from .discretize import NearSingularError

log = logging.getLogger("trapsmooth")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONFLICT = 0, 2, 3, 4
REPORT_NAME = "report.json"


def fmt(v) -> str:
    """Shortest round-trip text for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _header(cfg, experiment):
    return {"experiment": experiment, "m1": cfg.m1, "m2": cfg.m2, "config_hash": cfg.hash()}


# ---------------------------------------------------------------- commands


def cmd_profile(cfg, out, threads=1, seed=0):
    p = cfg.surface
    ps = cfg.profile
    x = np.linspace(ps.xmin, ps.xmax, ps.points)
    inv_a2, v1 = geometry.potential_parts(p, x)
    rows = zip(x, geometry.profile_a(p, x), geometry.A_squared(p, x), v1,
               inv_a2 + ps.h**2 * v1)
    write_csv(os.path.join(out, f"profile_m{p.m1}_{p.m2}.csv"), ("x", "a", "A2", "V1", "V"), rows)
    return EXIT_OK


def _window(cfg, p):
    rs = cfg.resolvent
    w = resolvent.default_window(p, rs.well)
    if rs.center is None and rs.halfwidth is None and rs.samples is None:
        return w
    return resolvent.EnergyWindow(
        rs.center if rs.center is not None else w.center,
        rs.halfwidth if rs.halfwidth is not None else w.halfwidth,
        rs.samples if rs.samples is not None else w.samples,
        w.width_exponent, w.width_coef)


def cmd_resolvent_scan(cfg, out, threads=1, seed=0):
    p = cfg.surface
    rs = cfg.resolvent
    hs = sorted(rs.h_list, reverse=True)
    scan = resolvent.scan(p, hs, _window(cfg, p), resolvent.default_cutoff(p, rs.well),
                          cap=cfg.cap, ppw=cfg.grid.ppw, domain=(cfg.grid.xmin, cfg.grid.xmax),
                          tol=rs.tol, maxit=rs.maxit, refine=rs.refine, threads=threads)
    expected, has_log = resolvent.expected_exponent(p, rs.well)
    tag = f"resolvent_{rs.well}_m{p.m1}_{p.m2}"
    write_csv(os.path.join(out, tag + ".csv"), ("h", "z", "norm", "iterations", "converged"),
              ((q.h, q.z, q.norm, q.iterations, q.converged) for q in scan.points))
    summary = _header(cfg, "resolvent-scan")
    summary.update(well=rs.well, expected_exponent=expected,
                   flagged_fraction=scan.flagged_fraction, reliable=scan.reliable,
                   sup=[list(t) for t in scan.sup_points()])
    try:
        fit = scaling.fit_power_law(scan.sup_points())
        summary.update(fitted_slope=fit.slope, stderr=fit.stderr_slope,
                       passed=fit.verifies(expected))
        if has_log:
            cmp = scaling.compare_log_correction(scan.sup_points())
            summary.update(log_corrected=cmp.preferred == "log_corrected",
                           model_comparison=cmp.to_dict())
        else:
            summary.update(log_corrected=False)
    except ValueError as exc:
        summary.update(fitted_slope=None, stderr=None, passed=False, log_corrected=False,
                       fit_error=str(exc))
    write_json(os.path.join(out, tag + ".json"), summary)
    if not scan.reliable:
        log.error("%.0f%% of scan points did not converge", 100 * scan.flagged_fraction)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_quasimode_check(cfg, out, threads=1, seed=0):
    p = cfg.surface
    qs = cfg.quasimode
    rows, summary = quasimode.verify(p, sorted(qs.h_list, reverse=True), qs.alpha_E,
                                     qs.beta_E, qs.delta, qs.points_per_mu)
    tag = f"quasimode_m{p.m1}_{p.m2}"
    write_csv(os.path.join(out, tag + ".csv"), ("h", "mu", "norm2", "residual_norm", "ratio"),
              ((r.h, r.mu, r.norm2, r.residual_norm, r.ratio) for r in rows))
    payload = _header(cfg, "quasimode-check")
    payload.update(summary)
    payload["max_relative_assembly_gap"] = max(
        abs(r.residual_norm - r.residual_discrete) / r.residual_norm for r in rows)
    write_json(os.path.join(out, tag + ".json"), payload)
    return EXIT_OK


def _trace_rows(trace, csv_rows):
    return trace.rows(every=max(1, (len(trace.times) - 1) // (csv_rows - 1)))


_TRACE_HEADER = ("t", "mass", "smoothing_x", "smoothing_theta", "smoothing_cutoff")


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def cmd_evolve(cfg, out, threads=1, seed=0):
    p = cfg.surface
    ev = cfg.evolution
    qs = cfg.quasimode or cfgmod.QuasimodeSettings()
    domain = (cfg.grid.xmin, cfg.grid.xmax)
    family = evolution.PacketFamily.draw(np.random.default_rng(seed))

    def run(k):
        if ev.initial == "quasimode":
            qp = quasimode.QuasimodeParams.for_profile(p, 1.0 / k, alpha_E=qs.alpha_E,
                                                       beta_E=qs.beta_E, delta=qs.delta)
            grid = evolution.mode_grid(p, k, cfg.grid.ppw, qp.mu / ev.points_per_mu, domain)
            v0 = quasimode.sample(qp, grid.x)[1]
        else:
            grid = evolution.mode_grid(p, k, cfg.grid.ppw, domain=domain)
            v0 = family.sample(grid.x, k)
        v0 = evolution.normalize(v0, grid.dx)
        return evolution.smoothing_bound_check(p, k, v0, grid, T=ev.T, cap=cfg.cap,
                                               dt=ev.dt, drain_tol=ev.drain_tol)

    results = _map(run, ev.k_list, threads)
    for r in results:
        write_csv(os.path.join(out, f"evolve_m{p.m1}_{p.m2}_k{r.k}.csv"), _TRACE_HEADER,
                  _trace_rows(r.trace, ev.csv_rows))
    ratios = [r.ratio for r in results]
    payload = _header(cfg, "evolve")
    payload.update(initial=ev.initial, seed=seed, beta=evolution.beta_loss(p.m1, p.m2),
                   runs=[r.summary() for r in results], max_ratio=max(ratios),
                   min_ratio=min(ratios), spread=max(ratios) / min(ratios))
    write_json(os.path.join(out, f"evolve_m{p.m1}_{p.m2}.json"), payload)
    return EXIT_OK


def cmd_saturate(cfg, out, threads=1, seed=0):
    if cfg.quasimode is None or not cfgmod.has_section(cfg, "quasimode"):
        raise cfgmod.ConfigError("saturate needs a [quasimode] section")
    p = cfg.surface
    ev = cfg.evolution
    qs = cfg.quasimode
    domain = (cfg.grid.xmin, cfg.grid.xmax)

    def run(k):
        qp = quasimode.QuasimodeParams.for_profile(p, 1.0 / k, alpha_E=qs.alpha_E,
                                                   beta_E=qs.beta_E, delta=qs.delta)
        grid = evolution.saturation_grid(p, k, qp, domain)
        return evolution.saturation_experiment(p, k, qp, ev.window_divisor, cap=cfg.cap,
                                               grid=grid, dt=ev.dt)

    results = _map(run, ev.k_list, threads)
    for r in results:
        write_csv(os.path.join(out, f"saturate_m{p.m1}_{p.m2}_k{r.k}.csv"), _TRACE_HEADER,
                  _trace_rows(r.trace, ev.csv_rows))
    ratios = [r.ratio for r in results]
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else float("inf")
    payload = _header(cfg, "saturate")
    payload.update(window_divisor=ev.window_divisor, runs=[r.summary() for r in results],
                   min_ratio=min(ratios), max_ratio=max(ratios), spread=spread,
                   uniform=bool(min(ratios) > 0 and spread <= 3.0))
    write_json(os.path.join(out, f"saturate_m{p.m1}_{p.m2}.json"), payload)
    return EXIT_OK


class AggregationConflict(RuntimeError):
    pass


def collect(out):
    """Table of summaries keyed by ``(m1, m2, experiment)``.

    Resolvent scans carry their well in the experiment name.  Two files with
    the same key and different content are a conflict.
    """
    table = {}
    names = sorted(f for f in os.listdir(out) if f.endswith(".json") and f != REPORT_NAME)
    for name in names:
        with open(os.path.join(out, name), encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or "experiment" not in data:
            continue
        exp = data["experiment"]
        if "well" in data:
            exp = f"{exp}:{data['well']}"
        key = f"m1={data.get('m1')},m2={data.get('m2')},{exp}"
        if key in table and table[key] != data:
            raise AggregationConflict(f"conflicting summaries for {key}")
        table[key] = data
    return table


def cmd_report(cfg, out, threads=1, seed=0):
    try:
        table = collect(out)
    except AggregationConflict as exc:
        log.error("%s", exc)
        return EXIT_CONFLICT
    write_json(os.path.join(out, REPORT_NAME), {"rows": table, "count": len(table)})
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile,
    "resolvent-scan": cmd_resolvent_scan,
    "quasimode-check": cmd_quasimode_check,
    "evolve": cmd_evolve,
    "saturate": cmd_saturate,
    "report": cmd_report,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="trapsmooth", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="INI configuration file (defaults when omitted)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise cfgmod.ConfigError("--threads must be >= 1")
        if not 0 <= args.seed < 2**64:
            raise cfgmod.ConfigError("--seed must fit in an unsigned 64-bit integer")
        cfg = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig()
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args.threads, args.seed)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NearSingularError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
