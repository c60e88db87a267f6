import argparse
import logging
from pathlib import Path

from app.backend.core.exceptions import InvalidInput
from app.backend.schemas.outputs import OUTPUT_MODELS, output_schema
from app.backend.utils.io import dump_json

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "schema",
        help="Print or write the JSON Schemas of the CLI outputs",
        description=(
            "Without --out-dir the schemas are printed as one JSON object keyed by name; "
            f"known names: {', '.join(OUTPUT_MODELS)}."
        ),
    )
    parser.add_argument("names", nargs="*", help="schemas to emit (default: all)")
    parser.add_argument("--out-dir", default=None, help="write <name>.schema.json files here")
    parser.set_defaults(func=cmd_schema)


def cmd_schema(args: argparse.Namespace) -> int:
    names = args.names or list(OUTPUT_MODELS)
    unknown = [name for name in names if name not in OUTPUT_MODELS]
    if unknown:
        raise InvalidInput("unknown schema name", {"names": unknown, "available": list(OUTPUT_MODELS)})
    schemas = {name: output_schema(name) for name in names}
    if args.out_dir is None:
        dump_json(schemas)
        return 0
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, schema in schemas.items():
        dump_json(schema, out_dir / f"{name}.schema.json")
    logger.info(f"wrote {len(schemas)} schemas to {out_dir}")
    return 0
