"""Command-line interface: simulation studies, scenario listing, prior search, service."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .errors import DualDoseError
from .hyperparam import GridSearchConfig, PriorCriteria, grid_search
from .lattice import GridDims
from .sampler import GibbsConfig
from .scenarios import (PRESET_NAMES, builtin_scenarios, get_preset,
                        get_scenario, load_scenario)
from .simulate import (StudySpec, format_report_table, run_study,
                       write_report_csv, write_report_json)


def _parse_dims(text: str) -> GridDims:
    rows, _, cols = text.lower().partition("x")
    return GridDims(int(rows), int(cols))


def _parse_floats(text: str, n: int) -> tuple[float, ...]:
    parts = tuple(float(p) for p in text.split(","))
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
    return parts


def _cmd_simulate(args: argparse.Namespace) -> int:
    preset = get_preset(args.preset)
    if args.scenario is None:
        scenarios = preset.scenarios
    elif os.path.exists(args.scenario):
        scenarios = (load_scenario(args.scenario),)
    else:
        scenarios = (get_scenario(args.scenario),)
    design = preset.design
    if args.chain is not None:
        keep, burn = (int(v) for v in args.chain)
        design = dataclasses.replace(
            design, gibbs=dataclasses.replace(design.gibbs, n_keep=keep, n_burn=burn)
        )
    spec = StudySpec(
        scenarios=scenarios,
        design=design,
        prior=preset.prior,
        replicates=args.replicates,
        master_seed=args.seed,
        workers=args.workers,
    )
    report = run_study(spec)
    print(format_report_table(report))
    if args.out:
        write_report_json(report, args.out)
        print(f"wrote {args.out}")
    if args.csv:
        write_report_csv(report, args.csv)
        print(f"wrote {args.csv}")
    return 0


def _cmd_scenarios(args: argparse.Namespace) -> int:
    for scenario in builtin_scenarios():
        dims = scenario.dims
        lo = scenario.true_p.min()
        hi = scenario.true_p.max()
        print(
            f"{scenario.name:<8} {dims.n_rows}x{dims.n_cols}  "
            f"theta={scenario.theta:<5} p in [{lo:.2f}, {hi:.2f}]"
        )
    return 0


def _cmd_hyperparam(args: argparse.Namespace) -> int:
    dims = _parse_dims(args.dims)
    criteria = PriorCriteria(
        target_min=args.target_min,
        target_max=args.target_max,
        tolerance=args.tolerance,
    )
    n_m, n_t, n_l = (int(v) for v in args.points)
    keep, burn = (int(v) for v in args.chain)
    cfg = GridSearchConfig(
        n_m=n_m,
        n_t=n_t,
        n_l=n_l,
        t_range=args.t_range,
        s_range=args.s_range,
        l_range_factor=args.l_factors,
        gibbs=GibbsConfig(n_keep=keep, n_burn=burn, seed=args.seed),
    )
    best, diagnostics = grid_search(criteria, cfg, dims)
    winner = next(row for row in diagnostics if row.confirmed)
    doc = {
        "dims": {"n_rows": dims.n_rows, "n_cols": dims.n_cols},
        "alpha": best.flat_alpha().tolist(),
        "beta": best.flat_beta().tolist(),
        "template": dataclasses.asdict(winner.template),
        "criteria": {
            "target_min": criteria.target_min,
            "target_max": criteria.target_max,
            "tolerance": criteria.tolerance,
        },
        "diagnostics": [
            {
                "index": row.index,
                "template": dataclasses.asdict(row.template),
                "median_first": row.median_first,
                "median_last": row.median_last,
                "total_variance": row.total_variance,
                "confirmed": row.confirmed,
            }
            for row in diagnostics
        ],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(
        f"feasible candidates: {len(diagnostics)}; "
        f"winner variance {winner.total_variance:.4f}; wrote {args.out}"
    )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(state_dir=args.state_dir, token=args.token, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualdose",
        description="Dual-agent Bayesian dose-finding: simulation and trial conduct.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="replicate trials and report operating characteristics")
    sim.add_argument("--scenario", help="built-in scenario name or JSON file path")
    sim.add_argument("--preset", required=True, choices=PRESET_NAMES)
    sim.add_argument("--replicates", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", help="write the JSON report here")
    sim.add_argument("--csv", help="write the CSV report here")
    sim.add_argument(
        "--chain",
        type=lambda s: _parse_floats(s, 2),
        help="override chain length as KEEP,BURN",
    )
    sim.set_defaults(handler=_cmd_simulate)

    scen = sub.add_parser("scenarios", help="inspect built-in scenarios")
    scen_sub = scen.add_subparsers(dest="action", required=True)
    scen_list = scen_sub.add_parser("list", help="list built-in scenarios")
    scen_list.set_defaults(handler=_cmd_scenarios)

    hyper = sub.add_parser("hyperparam", help="search template priors for median targets")
    hyper.add_argument("--dims", required=True, help="grid as IxJ, e.g. 4x5")
    hyper.add_argument("--target-min", type=float, required=True)
    hyper.add_argument("--target-max", type=float, required=True)
    hyper.add_argument("--tolerance", type=float, default=0.01)
    hyper.add_argument("--out", required=True)
    hyper.add_argument("--t-range", type=lambda s: _parse_floats(s, 2), default=(0.2, 0.5))
    hyper.add_argument("--s-range", type=lambda s: _parse_floats(s, 2), default=(0.2, 0.5))
    hyper.add_argument("--l-factors", type=lambda s: _parse_floats(s, 2), default=(0.2, 0.4))
    hyper.add_argument("--points", type=lambda s: _parse_floats(s, 3), default=(15, 10, 3),
                       help="grid sizes as N_M,N_T,N_L")
    hyper.add_argument("--chain", type=lambda s: _parse_floats(s, 2), default=(5000, 500),
                       help="candidate chain as KEEP,BURN")
    hyper.add_argument("--seed", type=int, default=0)
    hyper.set_defaults(handler=_cmd_hyperparam)

    serve = sub.add_parser("serve", help="run the trial-conduct HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--state-dir", default="./trial-state")
    serve.add_argument("--token", default=None, help="require this bearer token")
    serve.add_argument("--static", default=None, help="directory of UI assets to serve at /")
    serve.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except DualDoseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
