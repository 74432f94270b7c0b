"""
Command line front end.

Every command prints one document to stdout, CSV by default or JSON with
--format json; logs go to stderr. A failed computation or check prints a JSON
error record and exits with status 1; bad flags are usage errors with status 2.
"""

import argparse
import csv
import io
import sys
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from .core.config import get_settings
from .core.errors import RegretLensError, SaddleViolation
from .core.logging import logger
from .models.command import CommandConfig, CommandDocument, ErrorRecord
from .services.experiments import COMMANDS, run


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        description="Minimax-regret auctions: optimal random reserves, tables and verifications.",
    )
    parser.add_argument("command", choices=list(COMMANDS), help="Command to run")
    parser.add_argument("--n", type=int, nargs="+", help="Buyer counts (default depends on the command)")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="Master seed of stochastic commands")
    parser.add_argument("--samples", type=int, help="Monte Carlo draws or random probes")
    parser.add_argument("--grid", type=int, help="Grid size")
    parser.add_argument("--format", choices=["csv", "json"], default="csv", dest="out_format", help="Output format")
    parser.add_argument("--out", dest="out_path", help="Write to this file instead of stdout")
    return parser


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def render_csv(document: CommandDocument, stochastic: bool) -> str:
    """Header row plus one line per result, floats to 10 significant digits, LF endings."""
    buffer = io.StringIO()
    if stochastic:
        buffer.write(f"# command={document.command} seed={document.config.get('seed')}\n")
    columns: List[str] = []
    for row in document.results:
        for key in row:
            if key not in columns:
                columns.append(key)
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in document.results:
        writer.writerow([_cell(row.get(key)) for key in columns])
    return buffer.getvalue()


def render(document: CommandDocument, config: CommandConfig) -> str:
    if config.out_format == "json":
        return document.model_dump_json(indent=2) + "\n"
    return render_csv(document, config.stochastic)


def _emit(text: str, out_path: Optional[str]) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def error_record(command: str, error: RegretLensError) -> ErrorRecord:
    detail: Dict[str, Any] = dict(error.detail)
    if isinstance(error, SaddleViolation) and error.report is not None:
        detail["report"] = error.report.model_dump(mode="json")
    return ErrorRecord(command=command, error=error.kind, message=error.message, detail=detail)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run the command and emit its document.

    Returns:
        int: 0 on success, 1 when a computation or check failed.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = CommandConfig(command=args.command, n=args.n, seed=args.seed, samples=args.samples,
                               grid=args.grid, out_format=args.out_format, out_path=args.out_path)
    except ValidationError as e:
        parser.error(str(e.errors()[0].get("msg", e)))

    try:
        document = run(config)
    except RegretLensError as e:
        logger.error(f"{config.command} failed: {e.message}")
        record = error_record(config.command, e)
        _emit(record.model_dump_json(indent=2) + "\n", None)
        return 1

    _emit(render(document, config), config.out_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
