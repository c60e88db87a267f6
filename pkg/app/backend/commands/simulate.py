"""
`simulate-type1` and `simulate-type2` subcommands
"""

import argparse
import logging

from app.backend.dependencies import get_seed
from app.backend.schemas.simulation import SimulationReport, SimulationSpec
from app.backend.services.simulation_service import extended_specs, run_type1, run_type2
from app.backend.utils.io import write_report

logger = logging.getLogger(__name__)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from exc


def _add_spec_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=120)
    parser.add_argument("--p", type=int, default=40)
    parser.add_argument("--dist-data", choices=("gaussian", "t1", "t2"), default="gaussian")
    parser.add_argument("--dist-noise", choices=("gaussian", "t1", "t2"), default="gaussian")
    parser.add_argument("--reps", type=int, default=5000)
    parser.add_argument("--alpha", type=_floats, default=[0.05, 0.1, 0.2], help="comma-separated levels")
    parser.add_argument(
        "--method",
        choices=("palmrt", "palmrt-two-sided", "cpt", "weighted-cpt", "weighted-palmrt"),
        default="palmrt",
    )
    parser.add_argument("--group", default="leftshift", help="cyclic | leftshift | optimized | random-iid | path")
    parser.add_argument("--k-plus-1", type=int, default=20)
    parser.add_argument("--m-samples", type=int, default=200)
    parser.add_argument("--w0", type=float, default=None)
    parser.add_argument(
        "--eta",
        choices=("basic", "power"),
        default="basic",
        help="CPT direction; 'power' maximizes the gap for X and is one-sided: it only detects b < 0",
    )
    parser.add_argument("--beta-fuzz", action="store_true", help="draw a random nuisance coefficient per replicate")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--chunk-size", type=int, default=None)
    parser.add_argument("--out", default="-", help="CSV path, '-' for stdout")


def register(subparsers: argparse._SubParsersAction) -> None:
    type1 = subparsers.add_parser(
        "simulate-type1",
        help="Null rejection rates",
        description="Monte Carlo Type-I error of a test at b = 0.",
    )
    _add_spec_flags(type1)
    type1.add_argument(
        "--extended",
        action="store_true",
        help="full-scale grid (n=300, p=100, all data/noise pairs, 50000 reps); runs for hours",
    )
    type1.set_defaults(func=cmd_simulate_type1)

    type2 = subparsers.add_parser(
        "simulate-type2",
        help="Rejection rates over a grid of effect sizes",
        description="Monte Carlo power curve; Type-II error is one minus the reported rate.",
    )
    _add_spec_flags(type2)
    type2.add_argument("--b-grid", type=_floats, required=True, help="comma-separated effect sizes")
    type2.set_defaults(func=cmd_simulate_type2)


def spec_from_args(args: argparse.Namespace, b_grid: list[float]) -> SimulationSpec:
    return SimulationSpec(
        n=args.n,
        p=args.p,
        dist_data=args.dist_data,
        dist_noise=args.dist_noise,
        b_grid=b_grid,
        reps=args.reps,
        alpha_list=args.alpha,
        method=args.method,
        group=args.group,
        k_plus_1=args.k_plus_1,
        m_samples=args.m_samples,
        w0=args.w0,
        eta_mode=args.eta,
        beta_fuzz=args.beta_fuzz,
        seed=get_seed(args.seed),
    )


def cmd_simulate_type1(args: argparse.Namespace) -> int:
    spec = spec_from_args(args, [])
    if args.extended:
        reports = [run_type1(s, args.threads, args.chunk_size) for s in extended_specs(spec)]
        report = SimulationReport(
            kind="type1",
            cells=[c for r in reports for c in r.cells],
            wall_time=sum(r.wall_time for r in reports),
        )
    else:
        report = run_type1(spec, args.threads, args.chunk_size)
    write_report(report, args.out)
    return 0


def cmd_simulate_type2(args: argparse.Namespace) -> int:
    report = run_type2(spec_from_args(args, args.b_grid), args.threads, args.chunk_size)
    write_report(report, args.out)
    return 0
