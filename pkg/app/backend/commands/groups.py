"""
Group construction subcommands: `optimize-group`, `make-group`, `leverage-density`
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from app.backend.core.exceptions import InvalidInput
from app.backend.dependencies import get_seed, get_stream
from app.backend.models.permutation import BlockGroup
from app.backend.schemas.optimizer import PlanDocument
from app.backend.services.optimizer_service import build_optimized_group, compare_groups
from app.backend.services.permutations import enumerate_block, full_cycle_group, left_shift_group
from app.backend.services.simulation_service import leverage_density, sample_dist
from app.backend.utils.io import dump_json, read_design, write_group

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    optimize = subparsers.add_parser(
        "optimize-group",
        help="Build a design-adaptive block group",
        description="Partition the indices by leverage and residual size and write the block group and its plan.",
    )
    _add_design_flags(optimize)
    optimize.add_argument("--mode", choices=("contract", "random"), default="contract")
    optimize.add_argument("--out", required=True, help="group JSON path")
    optimize.add_argument("--plan-out", default=None, help="plan JSON path (default: <out>.plan.json)")
    optimize.add_argument("--compare", action="store_true", help="estimate lambda2 against uniform permutations")
    optimize.add_argument("--alpha", type=float, default=0.1)
    optimize.add_argument("--m-samples", type=int, default=500)
    optimize.set_defaults(func=cmd_optimize_group)

    make = subparsers.add_parser(
        "make-group",
        help="Write a named group as a group file",
        description="cyclic and leftshift write explicit groups; blocks writes a block group or, with --enumerate, all its elements.",
    )
    make.add_argument("--kind", choices=("cyclic", "leftshift", "blocks"), required=True)
    make.add_argument("--n", type=int, required=True)
    make.add_argument("--k-plus-1", type=int, default=20)
    make.add_argument("--blocks", default=None, help="1-based blocks, e.g. '1,2,3;4,5'")
    make.add_argument("--enumerate", action="store_true")
    make.add_argument("--out", required=True)
    make.set_defaults(func=cmd_make_group)

    density = subparsers.add_parser(
        "leverage-density",
        help="Histogram of the leverages of a design",
        description="Leverages are the squared row norms of an orthonormal basis of Z.",
    )
    _add_design_flags(density)
    density.add_argument("--bins", type=int, default=20)
    density.set_defaults(func=cmd_leverage_density)


def _add_design_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", default=None, help="CSV design; every column except --target-col/--drop-col is Z")
    parser.add_argument("--target-col", default=None)
    parser.add_argument("--drop-col", action="append", default=[], help="column to ignore (repeatable)")
    parser.add_argument(
        "--simulate-design",
        choices=("gaussian", "t1", "t2"),
        default=None,
        help="draw X and Z i.i.d. from this distribution instead of reading --data",
    )
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--p", type=int, default=40)
    parser.add_argument("--seed", type=int, default=None)


def _design(args: argparse.Namespace, need_x: bool) -> tuple[np.ndarray | None, np.ndarray]:
    if (args.data is None) == (args.simulate_design is None):
        raise InvalidInput("give exactly one of --data or --simulate-design")
    if args.data is not None:
        if need_x and args.target_col is None:
            raise InvalidInput("--target-col is required with --data")
        return read_design(args.data, args.target_col, tuple(args.drop_col))
    if args.p >= args.n:
        raise InvalidInput("need p < n", {"n": args.n, "p": args.p})
    rng = get_stream(args.seed, "design")
    z = sample_dist(args.simulate_design, args.n * args.p, rng).reshape(args.n, args.p)
    x = sample_dist(args.simulate_design, args.n, rng)
    return x, z


def cmd_optimize_group(args: argparse.Namespace) -> int:
    """Write the group file and the plan file; the plan also goes to stdout."""
    seed = get_seed(args.seed)
    x, z = _design(args, need_x=True)
    rng = get_stream(seed, "partition")
    report = None
    if args.compare:
        report, group, plan = compare_groups(x, z, args.alpha, args.m_samples, rng, mode=args.mode)
    else:
        group, plan = build_optimized_group(x, z, mode=args.mode, rng=rng)
    write_group(group, args.out)
    plan_path = args.plan_out or str(Path(args.out).with_suffix("")) + ".plan.json"
    doc = PlanDocument(n=group.n, plan=plan.to_external(), report=report, seed=seed)
    dump_json(doc, plan_path)
    dump_json(doc)
    logger.info(f"wrote {args.out} and {plan_path}")
    return 0


def _parse_blocks(text: str, n: int) -> BlockGroup:
    listed = [tuple(int(v) - 1 for v in part.split(",") if v.strip()) for part in text.split(";") if part.strip()]
    covered = {i for block in listed for i in block}
    # indices not listed are fixed points
    singles = [(i,) for i in range(n) if i not in covered]
    return BlockGroup(n=n, blocks=tuple(listed) + tuple(singles))


def cmd_make_group(args: argparse.Namespace) -> int:
    if args.kind == "cyclic":
        group = full_cycle_group(args.n)
    elif args.kind == "leftshift":
        group = left_shift_group(args.n, args.k_plus_1 - 1)
    else:
        if args.blocks is None:
            raise InvalidInput("--blocks is required for kind 'blocks'")
        try:
            group = _parse_blocks(args.blocks, args.n)
        except ValueError as exc:
            raise InvalidInput(f"invalid --blocks: {exc}") from exc
        if args.enumerate:
            group = enumerate_block(group)
    write_group(group, args.out)
    logger.info(f"wrote {args.kind} group on {args.n} points to {args.out}")
    return 0


def cmd_leverage_density(args: argparse.Namespace) -> int:
    _, z = _design(args, need_x=False)
    dump_json(leverage_density(z, args.bins))
    return 0
