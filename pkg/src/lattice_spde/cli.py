"""Command line entry points: trees, graphs, eval, simulate, fit, pipeline.

Every subcommand reads the flat config (``--config FILE``) and accepts any
config key as a ``--key value`` override.  Exit codes: 0 ok, 2 config error,
3 numeric failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import BOOL_KEYS, KEYS, ConfigError, RunConfig, read_config_file
from .evaluator import first_order_kernels, truncated_correlation_series, write_lag_csv, read_lag_csv
from .fitting import DegenerateDesignError, fit_first_order
from .graphs import dumps_graph, enumerate_graphs, filter_connected, drop_tadpoles, prune_odd
from .levy import cumulants
from .simulator import BlowUpError, CorrelationFunction, simulate_correlation
from .trees import dumps_tree, enumerate_trees

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("trees", "graphs", "eval", "simulate", "fit", "pipeline")


def _header(run: RunConfig, what: str) -> str:
    if run.no_timestamp:
        return what
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return f"{what}; generated {stamp}"


def _out(run: RunConfig, name: str) -> Path:
    d = Path(run.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _write_text(run: RunConfig, name: str, lines, what: str) -> Path:
    path = _out(run, name)
    with open(path, "w") as fh:
        fh.write(f"# {_header(run, what)}\n")
        for line in lines:
            fh.write(line + "\n")
    return path


def cmd_trees(run: RunConfig) -> int:
    recs = [dumps_tree(T, mult) for T, mult in enumerate_trees(run.order, run.sim.p)]
    path = _write_text(run, "trees.jsonl", recs, f"trees of order {run.order}, p = {run.sim.p}")
    print("\n".join(recs))
    print(f"{len(recs)} trees -> {path}", file=sys.stderr)
    return EXIT_OK


def cmd_graphs(run: RunConfig) -> int:
    gs = enumerate_graphs(run.order, run.n, run.sim.p, equilibrium_only=run.equilibrium)
    ids = {g.key: f"m{run.order}-{i}" for i, g in enumerate(gs)}
    if run.connected:
        gs = filter_connected(gs)
    if run.even_only:
        gs = prune_odd(gs)
    if run.drop_tadpoles:
        gs = drop_tadpoles(gs)
    recs = [dumps_graph(g, ids[g.key]) for g in gs]
    what = f"graphs m = {run.order}, n = {run.n}, p = {run.sim.p}"
    path = _write_text(run, "graphs.jsonl", recs, what)
    print("\n".join(recs))
    print(f"{len(recs)} graphs -> {path}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(run: RunConfig) -> int:
    equilibrium = run.t is None
    series = truncated_correlation_series(
        run.n, run.order, cumulants(run.levy, 2 * run.order * run.sim.p + run.n), run.lattice, run.quad,
        equilibrium=equilibrium, drop_tadpoles=run.drop_tadpoles, p=run.sim.p, t=run.t, method=run.method,
    )
    path = _out(run, "series.csv")
    series.write_csv(path)
    print(f"series coefficients up to order {run.order} -> {path}")
    c = cumulants(run.levy, 4)
    what = f"assembled F_th at c2 = {c[2]!r}, c4 = {c[4]!r}, lambda = {run.sim.lam!r}"
    th_path = _out(run, "F_th.csv")
    write_lag_csv(th_path, series.assemble(run.sim.lam), run.lattice, header_comment=_header(run, what))
    print(f"{what} -> {th_path}")
    return EXIT_OK


def _write_correlation(run: RunConfig, F: CorrelationFunction, name: str = "correlation.csv") -> Path:
    path = _out(run, name)
    write_lag_csv(path, F.mean, run.lattice, F.stderr, _header(run, "empirical two-point function"))
    bpath = path.with_name(path.stem + "_batches.csv")
    with open(bpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["batch"] + [f"x{i}" for i in range(run.lattice.d)] + ["value"])
        for b, arr in enumerate(F.batches):
            for site in np.ndindex(*run.lattice.shape):
                w.writerow([b] + list(site) + [f"{arr[site]:.17g}"])
    return path


def _read_batches(path: Path, run: RunConfig):
    if not path.exists():
        return None
    rows = {}
    with open(path) as fh:
        reader = csv.reader(fh)
        next(reader)
        for r in reader:
            rows.setdefault(int(r[0]), {})[tuple(int(c) for c in r[1 : 1 + run.lattice.d])] = float(r[-1])
    out = np.empty((len(rows),) + run.lattice.shape)
    for b, vals in rows.items():
        for site, v in vals.items():
            out[b][site] = v
    return out


def _simulate(run: RunConfig) -> CorrelationFunction:
    F = simulate_correlation(run.levy, run.sim, run.lattice, run.max_lag, run.n_batches,
                             control_variate=run.control_variate)
    return F


def cmd_simulate(run: RunConfig) -> int:
    F = _simulate(run)
    path = _write_correlation(run, F)
    origin = (0,) * run.lattice.d
    print(f"F(0) = {F.mean[origin]:.10g} +- {F.stderr[origin]:.3g}  ({F.metadata['samples']} samples)")
    print(f"correlation -> {path}")
    return EXIT_OK


def _fit_and_report(run: RunConfig, F: CorrelationFunction) -> int:
    dt = run.sim.dt if run.discrete_kernels else None
    K = first_order_kernels(run.lattice, run.sim.p, run.kernel_method, run.quad, dt=dt)
    res = fit_first_order(F, K.P1, K.P2, run.sim.lam, run.lattice, Ptad=K.Ptad if run.tadpole_fit else None,
                          k_zero=run.k_zero, k_jump=run.k_jump)
    table = res.table()
    print(table)
    _write_text(run, "fit_report.txt", table.splitlines(), "first-order fit of c2, c4")
    with open(_out(run, "fit.json"), "w") as fh:
        fh.write(res.to_json() + "\n")
    return EXIT_OK


def cmd_fit(run: RunConfig) -> int:
    if run.input is None:
        raise ConfigError("fit needs input = <correlation csv>")
    path = Path(run.input)
    mean, err = read_lag_csv(path, run.lattice)
    batches = _read_batches(path.with_name(path.stem + "_batches.csv"), run)
    F = CorrelationFunction(mean, err if err is not None else np.zeros_like(mean), run.lattice, batches)
    return _fit_and_report(run, F)


def cmd_pipeline(run: RunConfig) -> int:
    F = _simulate(run)
    _write_correlation(run, F)
    return _fit_and_report(run, F)


HANDLERS = {"trees": cmd_trees, "graphs": cmd_graphs, "eval": cmd_eval, "simulate": cmd_simulate,
            "fit": cmd_fit, "pipeline": cmd_pipeline}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lattice-spde", description="Perturbative and simulated correlations of a lattice SPDE with Levy noise.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--dump-config", metavar="PATH", help="write the effective config and continue")
        for key in KEYS:
            flag = "--" + key.replace("_", "-")
            if key in BOOL_KEYS:
                sp.add_argument(flag, dest=key, nargs="?", const="true", default=None)
            else:
                sp.add_argument(flag, dest=key, default=None)
    return parser


def load_run(args: argparse.Namespace) -> RunConfig:
    raw = read_config_file(args.config) if args.config else {}
    raw.update({k: getattr(args, k) for k in KEYS if getattr(args, k) is not None})
    return RunConfig.from_strings(raw)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if args.dump_config:
            Path(args.dump_config).write_text(cfg.dumps())
        with threadpool_limits(cfg.threads):
            return HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, DegenerateDesignError, ArithmeticError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # invariant violations raised inside the modules
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
