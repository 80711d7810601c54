"""
Records for experiment configurations and reports.

There is no database: configs come from JSON files and reports go back to
JSON files, so these are plain dataclasses.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from . import __version__


SCHEMA_VERSION = 1


class TaskStatus:
    OK = 'ok'
    FAILED = 'failed'
    ERROR = 'error'


@dataclass
class ExperimentConfig:
    """A validated experiment file."""
    name: str
    window: dict
    lattice: dict
    jitter: dict
    bounds: dict
    grid: dict
    oracle: dict
    tasks: List[dict]
    seed: Optional[int] = None
    output: Optional[str] = None
    base_dir: Path = field(default_factory=Path)
    schema_version: int = SCHEMA_VERSION

    def resolve(self, path: str) -> Path:
        """Paths in a config are relative to the config file's directory."""
        candidate = Path(path)
        return candidate if candidate.is_absolute() else self.base_dir / candidate

    def echo(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "seed": self.seed,
            "window": self.window,
            "lattice": self.lattice,
            "jitter": self.jitter,
            "bounds": self.bounds,
            "grid": self.grid,
            "oracle": self.oracle,
            "tasks": self.tasks,
        }


@dataclass
class TaskResult:
    index: int
    type: str
    status: str = TaskStatus.OK
    result: dict = field(default_factory=dict)
    error: Optional[dict] = None
    elapsed: Optional[float] = None

    def __str__(self):
        return f"task {self.index} ({self.type}): {self.status}"

    def to_dict(self, include_timing: bool = False) -> dict:
        data = {"index": self.index, "type": self.type, "status": self.status,
                "result": self.result, "error": self.error}
        if include_timing and self.elapsed is not None:
            data["elapsed_seconds"] = self.elapsed
        return data


@dataclass
class Report:
    config: dict
    seed: int
    results: List[TaskResult] = field(default_factory=list)
    include_timing: bool = False
    total_elapsed: Optional[float] = None
    version: str = __version__
    schema_version: int = SCHEMA_VERSION

    @property
    def failures(self) -> List[TaskResult]:
        return [r for r in self.results if r.status != TaskStatus.OK]

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0

    def to_dict(self) -> dict:
        data = {
            "schema_version": self.schema_version,
            "tool_version": self.version,
            "seed": self.seed,
            "config": self.config,
            "results": [r.to_dict(self.include_timing) for r in self.results],
            "succeeded": not self.failures,
        }
        if self.include_timing and self.total_elapsed is not None:
            data["total_elapsed_seconds"] = self.total_elapsed
        return data
