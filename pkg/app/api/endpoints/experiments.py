"""
API endpoints for running experiment commands.

Each command of the command line is exposed read-only. The response is the same
document the command line prints with --format json.
"""

from typing import List, Optional

from fastapi import APIRouter, HTTPException, Query
from fastapi.concurrency import run_in_threadpool
from pydantic import ValidationError

from ...core.errors import DomainError, RegretLensError
from ...core.logging import logger
from ...models.command import CommandConfig, CommandDocument
from ...services.experiments import COMMANDS, run

router = APIRouter()


@router.get("/experiments")
async def list_commands():
    """
    List the available commands.

    Returns:
        Dict[str, Any]: Command names.
    """
    return {"message": "Commands retrieved successfully", "data": list(COMMANDS)}


@router.get("/experiments/{command}", response_model=CommandDocument)
async def run_command(
    command: str,
    n: Optional[List[int]] = Query(default=None),
    seed: int = 0,
    samples: Optional[int] = None,
    grid: Optional[int] = None,
):
    """
    Run one command and return its document.

    Args:
        command (str): Command name.
        n (Optional[List[int]]): Buyer counts, repeatable.
        seed (int): Master seed of stochastic commands.
        samples (Optional[int]): Monte Carlo draws or random probes.
        grid (Optional[int]): Grid size.

    Returns:
        CommandDocument: The command's results.

    Raises:
        HTTPException: 404 for unknown commands, 400 for invalid arguments,
        422 when a computation or check fails.
    """
    if command not in COMMANDS:
        raise HTTPException(status_code=404, detail=f"Unknown command {command}")
    try:
        config = CommandConfig(command=command, n=n, seed=seed, samples=samples, grid=grid, out_format="json")
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=str(e.errors()[0].get("msg", e)))

    try:
        return await run_in_threadpool(run, config)
    except DomainError as e:
        logger.error(f"Invalid arguments for {command}: {e.message}")
        raise HTTPException(status_code=400, detail={"error": e.kind, "message": e.message, "detail": e.detail})
    except RegretLensError as e:
        logger.error(f"Command {command} failed: {e.message}")
        raise HTTPException(status_code=422, detail={"error": e.kind, "message": e.message, "detail": e.detail})
