"""Command-line front end.

    ndar gen-network --kind uniform --n 50 --seed 1 --out net.csv
    ndar simulate --network net.csv --params dgp1.json --t 400 --seed 2 --out panel.csv
    ndar fit --panel panel.csv --network net.csv --p 1 --q 1 --out fit.json
    ndar select --panel panel.csv --network net.csv --rmax 3 --out sel.json
    ndar mc --design design.json --threads 4 --out report.json

Exit status is 0 on success, 1 on numerical/runtime failures and 2 on
usage or input-schema errors; failures print one ``ndar: <Kind>: <reason>``
line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import secrets
import sys
from pathlib import Path

from ndar import io
from ndar.estimation import FitConfig, fit
from ndar.exceptions import NdarError, ParameterError, SchemaError, ShapeError
from ndar.model import InnovationLaw, simulate
from ndar.montecarlo import McDesign, run_study
from ndar.network import from_config, stationarity_margin
from ndar.selection import select

EXIT_RUNTIME = 1
EXIT_USAGE = 2
USAGE_ERRORS = (SchemaError, ParameterError, ShapeError)


def _seed(args: argparse.Namespace) -> int:
    return args.seed if args.seed is not None else secrets.randbits(32)


def _fit_config(args: argparse.Namespace) -> FitConfig:
    return FitConfig(gtol=args.gtol, max_iter=args.max_iter, n_starts=args.starts)


def _panel(args: argparse.Namespace):
    return io.read_panel(args.panel, args.presample_rows)


def cmd_gen_network(args: argparse.Namespace) -> int:
    if args.config:
        cfg = io.read_json(args.config)
        if not isinstance(cfg, dict):
            raise SchemaError(f"{args.config}: generator config must be a JSON object")
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg.setdefault("seed", _seed(args))
    else:
        if args.kind is None or args.n is None:
            raise ParameterError("--kind and --n are required without --config")
        cfg = {"kind": args.kind, "n": args.n, "seed": _seed(args)}
        if args.kind in ("uniform", "powerlaw"):
            cfg["max_deg"] = args.max_deg
        if args.kind == "powerlaw":
            cfg["gamma"] = args.gamma
        if args.kind == "sbm":
            for key in ("blocks", "p_within", "p_between"):
                if getattr(args, key) is not None:
                    cfg[key] = getattr(args, key)
            cfg["assignment"] = args.assignment
    net = from_config(cfg)
    out = Path(args.out)
    if args.format == "dense":
        io.write_dense(net, out)
    else:
        io.write_edge_list(net, out)
    summary = {"config": cfg, **net.summary(), "metadata": io.metadata("gen-network", cfg["seed"])}
    io.write_json(summary, out.with_suffix(".json"))
    print(f"wrote {out} ({net.n_nodes} nodes, {net.n_edges} edges, density {net.density:.4%})")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    net = io.read_network(args.network)
    params = io.read_params(args.params)
    law = InnovationLaw.parse(args.law)
    seed = _seed(args)
    depth = args.presample_rows
    panel = simulate(net, params, law, args.t, args.burn_in, seed, presample_depth=depth)
    meta = io.metadata("simulate", seed, [args.network, args.params])
    meta["law"] = law.value
    meta["stationarity_margin"] = stationarity_margin(net, params, law.e_abs)
    io.write_panel(panel, args.out, meta)
    print(f"wrote {args.out} (T={panel.t_len}, N={panel.n_nodes}, presample={panel.depth})")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    net = io.read_network(args.network)
    panel = _panel(args)
    res = fit(panel, net, args.p, args.q, _fit_config(args))
    out = res.to_dict()
    out["metadata"] = io.metadata("fit", None, [args.panel, args.network])
    if args.out:
        io.write_json(out, args.out)
    print(io.dumps(out) if args.format == "json" else res.table())
    return 0 if res.converged else EXIT_RUNTIME


def cmd_select(args: argparse.Namespace) -> int:
    net = io.read_network(args.network)
    panel = _panel(args)
    ref = tuple(args.reference) if args.reference else None
    sel = select(panel, net, args.rmax, _fit_config(args), reference=ref, penalty=args.penalty_scale)
    out = sel.to_dict()
    out["metadata"] = io.metadata("select", None, [args.panel, args.network])
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["p", "q", "loglik", "bic", "converged"], lineterminator="\n")
    writer.writeheader()
    for row in sel.rows():
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    if args.out:
        io.write_json(out, args.out)
        Path(args.out).with_suffix(".csv").write_text(buf.getvalue())
    if args.format == "json":
        print(io.dumps(out))
    else:
        sys.stdout.write(buf.getvalue())
        print(f"chosen: p={sel.chosen[0]} q={sel.chosen[1]}")
    return 0


def cmd_mc(args: argparse.Namespace) -> int:
    raw = io.read_json(args.design)
    if not isinstance(raw, dict):
        raise SchemaError(f"{args.design}: design must be a JSON object")
    if args.seed is not None:
        raw["seed"] = args.seed
    raw.setdefault("seed", _seed(args))
    design = McDesign.from_dict(raw)
    report = run_study(design, workers=args.threads)
    out = {"design": design.to_dict(), **report.to_dict()}
    out["metadata"] = io.metadata("mc", design.seed, [args.design])
    if args.out:
        io.write_json(out, args.out)
    print(io.dumps(out) if args.format == "json" else report.table())
    return 0


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--panel", required=True, help="panel CSV (T + m rows, N columns)")
    p.add_argument("--network", required=True, help="edge-list or dense adjacency CSV")
    p.add_argument("--presample-rows", type=int, default=None,
                   help="leading presample rows; defaults to the sidecar JSON")
    p.add_argument("--gtol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ndar", description="Network double autoregression toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-network", help="generate a random network")
    g.add_argument("--config", help="generator JSON descriptor")
    g.add_argument("--kind", choices=["uniform", "powerlaw", "sbm"])
    g.add_argument("--n", type=int)
    g.add_argument("--max-deg", type=int, default=5)
    g.add_argument("--gamma", type=float, default=2.5)
    g.add_argument("--blocks", type=int)
    g.add_argument("--p-within", type=float)
    g.add_argument("--p-between", type=float)
    g.add_argument("--assignment", choices=["even", "random"], default="even")
    g.add_argument("--seed", type=int)
    g.add_argument("--format", choices=["csv", "dense"], default="csv")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_network)

    s = sub.add_parser("simulate", help="simulate an NDAR panel")
    s.add_argument("--network", required=True)
    s.add_argument("--params", required=True, help="params JSON")
    s.add_argument("--law", choices=["normal", "t5"], default="normal")
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--burn-in", type=int, default=500)
    s.add_argument("--presample-rows", type=int, default=None)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="QMLE fit at a given order")
    _add_fit_options(f)
    f.add_argument("--p", type=int, required=True)
    f.add_argument("--q", type=int, required=True)
    f.add_argument("--format", choices=["table", "json"], default="table")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("select", help="BIC order selection")
    _add_fit_options(c)
    c.add_argument("--rmax", type=int, required=True)
    c.add_argument("--penalty-scale", choices=["lnT", "lnNT"], default="lnT")
    c.add_argument("--reference", type=int, nargs=2, metavar=("P0", "Q0"))
    c.add_argument("--format", choices=["csv", "json"], default="csv")
    c.set_defaults(func=cmd_select)

    m = sub.add_parser("mc", help="Monte Carlo study from a design JSON")
    m.add_argument("--design", required=True)
    m.add_argument("--seed", type=int)
    m.add_argument("--threads", type=int, default=1)
    m.add_argument("--format", choices=["table", "json"], default="table")
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_mc)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"ndar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NdarError, FloatingPointError, ArithmeticError) as exc:
        print(f"ndar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"ndar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
