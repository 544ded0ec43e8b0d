"""Command line: ``run``, ``table1``, ``figures``, ``verify``."""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import config as cfgmod
from .diagnostics import error_metrics
from .experiment import build_problem, run_from_config
from .kaczmarz import IterationLog
from .noise import RNG_NAME
from .solvers import SolverError, solve_forward

OUT_ENV = "LANDWEBER_KACZMARZ_OUT"


def _out_dir(args, name):
    if args.out:
        path = Path(args.out)
    else:
        path = Path(os.environ.get(OUT_ENV, "runs")) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return cfgmod.load(args.config, overrides)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _summary_text(summary, extra=()):
    lines = [f"{k} = {_fmt(v)}" for k, v in summary.items()]
    lines += [f"{k} = {_fmt(v)}" for k, v in extra]
    return "\n".join(lines) + "\n"


# run -----------------------------------------------------------------------


def cmd_run(args):
    cfg = _load(args)
    out = _out_dir(args, "run")
    _write_text(out / "config.txt", cfgmod.dump(cfg))
    log_path = out / "log.csv"
    fh = open(log_path, "w", encoding="utf-8", newline="")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(IterationLog.COLUMNS)

    def stream(row):
        writer.writerow([_fmt(row[c]) for c in IterationLog.COLUMNS])

    try:
        exp, result = run_from_config(cfg, callback=stream)
    finally:
        fh.close()
    p = exp.problem
    _write_csv(out / "theta.csv", ["x", "theta_true", "theta"],
               [[_fmt(a), _fmt(b), _fmt(c)] for a, b, c in zip(p.space.x, exp.theta_true, result.theta)])
    if result.u is not None:
        np.savetxt(out / "u.csv", result.u, delimiter=",", fmt="%.17g",
                   header="rows: time nodes, columns: interior space nodes", encoding="utf-8")
    summary = result.log.summary()
    extra = [("message", result.log.message), ("delta_total", exp.noisy.delta_total),
             ("absolute_noise_fallback", exp.noisy.absolute_fallback), ("rng", RNG_NAME)]
    _write_text(out / "summary.txt", _summary_text(summary, extra))
    diag = error_metrics(result.theta, exp.theta_true, p)
    _write_text(out / "diagnostics.txt", _summary_text(diag))
    print(_summary_text(summary), end="")
    return getattr(cfgmod.EXIT, result.status)


# table1 --------------------------------------------------------------------

TABLE_COLUMNS = ("np", "setting", "loops", "updates", "cpu_s", "rel_error")


def _table_job(job):
    cfg, npts, setting, seed = job
    c = dict(cfg, obs="discrete", n_points=npts, setting=setting, seed=seed)
    _, result = run_from_config(c)
    s = result.log.summary()
    return npts, setting, seed, s["loops"], s["updates"], s["cpu_s"], s["rel_error"], s["status"]


def _map(fn, jobs, workers):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def table1_rows(cfg, workers=1):
    """Per-seed rows and median rows of the observation-count sweep."""
    jobs = [(cfg, npts, setting, seed)
            for npts in cfgmod.int_list(cfg["np_list"])
            for setting in ("reduced", "aao")
            for seed in cfgmod.int_list(cfg["seeds"])]
    raw = _map(_table_job, jobs, workers)
    table = []
    for npts in cfgmod.int_list(cfg["np_list"]):
        for setting in ("reduced", "aao"):
            sel = [r for r in raw if r[0] == npts and r[1] == setting]
            med = [float(np.median([r[i] for r in sel])) for i in (3, 4, 5, 6)]
            table.append((npts, setting, *med))
    return raw, table


def cmd_table1(args):
    cfg = _load(args)
    out = _out_dir(args, "table1")
    _write_text(out / "config.txt", cfgmod.dump(cfg))
    raw, table = table1_rows(cfg, args.workers)
    _write_csv(out / "table1_runs.csv", ("np", "setting", "seed", "loops", "updates", "cpu_s",
                                         "rel_error", "status"), [[_fmt(v) for v in r] for r in raw])
    _write_csv(out / "table1.csv", TABLE_COLUMNS, [[_fmt(v) for v in r] for r in table])
    for r in table:
        print(f"np={r[0]:4d} {r[1]:8s} loops={r[2]:8.0f} updates={r[3]:8.0f} "
              f"cpu={r[4]:8.2f}s rel_error={r[5]:.4f}")
    return 0 if all(r[7] == "converged" for r in raw) else cfgmod.EXIT.cycle_cap


# figures -------------------------------------------------------------------

GNUPLOT = """set terminal pngcairo size 900,600
set datafile separator whitespace
set output 'fig1_theta.png'
set xlabel 'x'; set ylabel 'theta'
plot 'fig1_theta.dat' u 1:2 w l lw 2 t 'truth', '' u 1:3 w l dt 2 t 'reduced', '' u 1:4 w l dt 4 t 'all-at-once'
set output 'fig1_state.png'
set xlabel 'x'; set ylabel 't'
splot 'fig1_state.dat' u 2:1:3 w l t 'reduced state'
set output 'fig2_updates.png'
set xlabel 'cycle'; set ylabel 'updates per cycle'
plot 'fig2_cycles.dat' u 1:2 w l t 'reduced', '' u 1:3 w l t 'all-at-once'
set output 'fig3_landweber.png'
set xlabel 'x'; set ylabel 'theta'
plot 'fig3_compare.dat' u 1:2 w l lw 2 t 'truth', '' u 1:3 w l dt 2 t 'LK reduced', '' u 1:4 w l dt 3 t 'Landweber reduced', '' u 1:5 w l dt 2 t 'LK all-at-once', '' u 1:6 w l dt 3 t 'Landweber all-at-once'
set output 'fig4_init_in_all.png'
plot 'fig4_compare.dat' u 1:2 w l lw 2 t 'truth', '' u 1:3 w l dt 2 t 'LK reduced', '' u 1:4 w l dt 3 t 'Landweber reduced', '' u 1:5 w l dt 2 t 'LK all-at-once', '' u 1:6 w l dt 3 t 'Landweber all-at-once'
"""


def _columns(path, header, cols):
    rows = zip(*cols)
    text = "# " + " ".join(header) + "\n"
    text += "".join(" ".join(f"{v:.10g}" for v in r) + "\n" for r in rows)
    _write_text(path, text)


def _figure_job(job):
    cfg, setting, scheme = job
    exp, res = run_from_config(cfg, setting=setting, scheme=scheme)
    return setting, scheme, exp.theta_true, res.theta, res.u, res.log


def cmd_figures(args):
    cfg = _load(args)
    out = _out_dir(args, "figures")
    _write_text(out / "config.txt", cfgmod.dump(cfg))
    base = dict(cfg, obs="continuous")
    jobs = [(base, s, sc) for s in ("reduced", "aao") for sc in ("standard", "full", "init_in_all")]
    results = {(r[0], r[1]): r for r in _map(_figure_job, jobs, args.workers)}
    p = build_problem(base)
    x, t = p.space.x, p.time.t
    truth = results[("reduced", "standard")][2]
    _columns(out / "fig1_theta.dat", ("x", "theta_true", "theta_reduced", "theta_aao"),
             (x, truth, results[("reduced", "standard")][3], results[("aao", "standard")][3]))
    u_true = solve_forward(truth, p)
    u_red, u_aao = results[("reduced", "standard")][4], results[("aao", "standard")][4]
    tt, xx = np.meshgrid(t, x, indexing="ij")
    _columns(out / "fig1_state.dat", ("t", "x", "u_reduced", "u_aao", "u_true", "diff_reduced", "diff_aao"),
             (tt.ravel(), xx.ravel(), u_red.ravel(), u_aao.ravel(), u_true.ravel(),
              (u_red - u_true).ravel(), (u_aao - u_true).ravel()))
    logs = {s: results[(s, "standard")][5] for s in ("reduced", "aao")}
    for s, lg in logs.items():
        _columns(out / f"fig2_weights_{s}.dat", ("k", "j", "w"),
                 (np.arange(lg.n_loops), [r["j"] for r in lg.rows], lg.weights))
    per = {s: lg.updates_per_cycle() for s, lg in logs.items()}
    n_cyc = max(len(v) for v in per.values())
    padded = {s: np.pad(v, (0, n_cyc - len(v))) for s, v in per.items()}
    _columns(out / "fig2_cycles.dat", ("cycle", "updates_reduced", "updates_aao"),
             (np.arange(n_cyc), padded["reduced"], padded["aao"]))
    for name, scheme in (("fig3_compare.dat", "standard"), ("fig4_compare.dat", "init_in_all")):
        _columns(out / name, ("x", "theta_true", "lk_reduced", "landweber_reduced", "lk_aao", "landweber_aao"),
                 (x, truth, results[("reduced", scheme)][3], results[("reduced", "full")][3],
                  results[("aao", scheme)][3], results[("aao", "full")][3]))
    summary = []
    for (s, sc), r in sorted(results.items()):
        sm = r[5].summary()
        summary.append(f"{s} {sc}: status={sm['status']} loops={sm['loops']} "
                       f"updates={sm['updates']} rel_error={sm['rel_error']:.4f}")
    _write_text(out / "summary.txt", "\n".join(summary))
    _write_text(out / "plots.gp", GNUPLOT)
    print("\n".join(summary))
    return 0


# verify --------------------------------------------------------------------


def cmd_verify(args):
    from .verification import run_suite
    out = _out_dir(args, "verify")
    checks = run_suite()
    text = "\n".join(c.line() for c in checks)
    _write_text(out / "report.txt", text)
    print(text)
    return 0 if all(c.passed for c in checks) else 1


# entry point ---------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="landweber-kaczmarz",
                                     description="Loping Landweber-Kaczmarz source identification.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("run", cmd_run, "one identification run"),
                               ("table1", cmd_table1, "sweep over discrete observation counts"),
                               ("figures", cmd_figures, "reconstruction and loping data for plots"),
                               ("verify", cmd_verify, "diagnostics suite on small grids")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", type=Path, help="flat key = value file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV}/{name} or runs/{name})")
        sp.add_argument("--seed", type=int, help="noise seed")
        sp.add_argument("--workers", type=int, default=1, help="parallel runs for sweeps")
        sp.add_argument("-v", "--verbose", action="store_true")
        sp.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return cfgmod.EXIT.config_error
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return cfgmod.EXIT.solver_failure


if __name__ == "__main__":
    sys.exit(main())
