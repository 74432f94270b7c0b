"""
Models describing a command run and the document it emits.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

CommandName = Literal[
    "reserve", "phi", "table1", "table2", "figure2", "verify-saddle",
    "simulate", "asymptotics", "affiliation", "general-class", "competition",
]

STOCHASTIC_COMMANDS = {"verify-saddle", "simulate", "affiliation", "general-class"}
SAMPLED_COMMANDS = {"simulate", "affiliation", "general-class"}
GRIDDED_COMMANDS = {"phi", "figure2", "verify-saddle"}


class CommandConfig(BaseModel):
    """
    Configuration of one command run.

    Attributes:
        command (CommandName): The command to run.
        n (Optional[List[int]]): Buyer counts; None selects the command's default set.
        seed (int): Master seed of stochastic commands.
        samples (Optional[int]): Monte Carlo draws or random probes; None selects the default.
        grid (Optional[int]): Grid size; None selects the default.
        out_format (str): "csv" or "json".
        out_path (Optional[str]): File to write instead of stdout.
    """
    command: CommandName
    n: Optional[List[int]] = None
    seed: int = Field(default=0, ge=0, lt=2**64)
    samples: Optional[int] = Field(default=None, ge=1)
    grid: Optional[int] = Field(default=None, ge=2)
    out_format: Literal["csv", "json"] = "csv"
    out_path: Optional[str] = None

    @field_validator("n")
    @classmethod
    def _positive_n(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is not None and (not value or any(k < 1 for k in value)):
            raise ValueError("n values must be positive integers")
        return value

    @model_validator(mode="after")
    def _options_apply(self) -> "CommandConfig":
        if self.samples is not None and self.command not in SAMPLED_COMMANDS:
            raise ValueError(f"{self.command} takes no samples option")
        if self.grid is not None and self.command not in GRIDDED_COMMANDS:
            raise ValueError(f"{self.command} takes no grid option")
        if self.command == "simulate" and self.samples is not None and self.samples < 1000:
            raise ValueError("simulate needs at least 1000 samples")
        return self

    @property
    def stochastic(self) -> bool:
        return self.command in STOCHASTIC_COMMANDS


class CommandDocument(BaseModel):
    """
    Document emitted by a command.

    Attributes:
        command (str): The command that produced it.
        config (Dict[str, Any]): The effective configuration.
        results (List[Dict[str, Any]]): One record per output row.
    """
    command: str
    config: Dict[str, Any]
    results: List[Dict[str, Any]]


class ErrorRecord(BaseModel):
    """
    Error document emitted when a check fails.

    Attributes:
        command (str): The command that failed.
        error (str): Error class name.
        message (str): Human readable message.
        detail (Dict[str, Any]): Structured context such as the offending probe.
    """
    command: str
    error: str
    message: str
    detail: Dict[str, Any] = Field(default_factory=dict)
