"""
Run Configuration
Validated parameters for one CLI run, plus environment-derived settings
"""

import os
import json
import math
import hashlib
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

THREADS_ENV = "GRAPHNLS_THREADS"

Command = Literal["analyze", "groundstate", "stability", "evolve", "sweep", "branch"]


def resolve_threads() -> int:
    """Worker thread cap from GRAPHNLS_THREADS, else the CPU count"""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            value = 0
        if value > 0:
            return value
    return os.cpu_count() or 1


def parse_grid(text: str) -> Tuple[float, float, int]:
    """'a:b:n' -> (a, b, n)"""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid {text!r} must read a:b:n")
    start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ValueError("grid needs at least one point")
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise ValueError("grid bounds must be finite")
    return start, stop, n


class MassGrid(BaseModel):
    start: float
    stop: float
    n: int

    @model_validator(mode="after")
    def _positive(self) -> "MassGrid":
        if self.n < 1:
            raise ValueError("mass grid needs at least one point")
        if self.start <= 0 or self.stop <= 0:
            raise ValueError("masses must be positive")
        return self

    def values(self) -> List[float]:
        return [float(x) for x in np.linspace(self.start, self.stop, self.n)]


class RunConfig(BaseModel):
    """Everything a CLI command needs; validated before any compute starts"""
    command: Command
    graph: str
    p: float = 6.0
    mass: Optional[float] = None
    mass_grid: Optional[MassGrid] = None
    h: Optional[float] = None
    dt: float = 1e-3
    t_end: float = 10.0
    delta: float = 1e-3
    direction: Literal["random", "lambda2"] = "random"
    seed: int = 0
    starts: int = 8
    bracket: Optional[Tuple[float, float]] = None
    ell_grid: List[float] = Field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0, 100.0])
    graph2: Optional[str] = None
    step: float = 0.05
    n_steps: int = 20
    out: Path = Path("output")
    xlsx: bool = False
    threads: int = Field(default_factory=resolve_threads)

    @field_validator("p")
    @classmethod
    def _p_range(cls, v: float) -> float:
        if not (2 < v <= 6):
            raise ValueError("p must lie in (2, 6]")
        return v

    @field_validator("mass")
    @classmethod
    def _mass_positive(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not (v > 0 and math.isfinite(v)):
            raise ValueError("mass must be positive")
        return v

    @field_validator("h", "dt", "t_end", "step")
    @classmethod
    def _positive(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not (v > 0 and math.isfinite(v)):
            raise ValueError("must be positive and finite")
        return v

    @field_validator("delta")
    @classmethod
    def _delta(cls, v: float) -> float:
        if not (v >= 0 and math.isfinite(v)):
            raise ValueError("delta must be nonnegative")
        return v

    @field_validator("starts", "n_steps", "threads")
    @classmethod
    def _count(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @field_validator("ell_grid")
    @classmethod
    def _ell_grid(cls, v: List[float]) -> List[float]:
        if not v or any(not (x > 0 and math.isfinite(x)) for x in v):
            raise ValueError("ell grid must hold positive lengths")
        return v

    @field_validator("bracket")
    @classmethod
    def _bracket(cls, v: Optional[Tuple[float, float]]) -> Optional[Tuple[float, float]]:
        if v is not None and not (0 < v[0] < v[1]):
            raise ValueError("bracket must read lo:hi with 0 < lo < hi")
        return v

    @model_validator(mode="after")
    def _command_needs(self) -> "RunConfig":
        if self.command in ("groundstate", "stability") and self.mass is None and self.mass_grid is None:
            if self.bracket is None:
                raise ValueError(f"{self.command} needs --mass or --mass-grid")
        if self.command in ("evolve", "branch") and self.mass is None:
            raise ValueError(f"{self.command} needs --mass")
        if self.mass is not None and self.mass_grid is not None:
            raise ValueError("give either --mass or --mass-grid, not both")
        return self

    def masses(self) -> List[float]:
        if self.mass_grid is not None:
            return self.mass_grid.values()
        return [self.mass] if self.mass is not None else []

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every field that affects results"""
        payload = self.model_dump(mode="json", exclude={"out", "xlsx", "threads"})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()
