"""Run configuration schema shared by the service endpoints and the CLI."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

SystemTag = Literal["spin-cm", "reduced-cm", "spin-toda", "reduced-toda"]
VerifySuite = Literal["mdybe", "algebroid", "poisson-axioms", "lax", "scaling", "reduction"]


class AlgebraConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    series: Literal["A"] = "A"
    rank: int = Field(ge=1, le=12)


class TimeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    t_max: float = Field(ge=0.0)
    dt: Optional[float] = Field(default=None, gt=0.0)
    n_samples: Optional[int] = Field(default=None, ge=5)


class InitialConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    q: Optional[list[float]] = None       # position for the hyperbolic systems
    x: Optional[list[float]] = None       # position for the Toda systems
    p: list[float]
    spin_h: Optional[list[float]] = None  # Cartan part of the spin
    spin: Optional[dict[str, float]] = None  # root coefficients keyed "m1,m2,..."
    c: Optional[dict[str, float]] = None  # reduced-Toda constants keyed by simple index


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    path: Optional[str] = None
    format: Literal["csv", "json"] = "csv"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    algebra: AlgebraConfig
    pi_prime: list[int] = Field(default_factory=list)
    system: SystemTag
    initial: InitialConfig
    time: TimeConfig
    method: Literal["exact", "rk4", "both"] = "rk4"
    output: OutputConfig = Field(default_factory=OutputConfig)
    seed: int = 0
    tolerance: float = Field(default=1e-6, gt=0.0)

    @model_validator(mode="after")
    def _check_fields(self):
        n = self.algebra.rank
        if len(set(self.pi_prime)) != len(self.pi_prime):
            raise ValueError("pi_prime: indices must be unique")
        for i in self.pi_prime:
            if not 1 <= i <= n:
                raise ValueError(f"pi_prime: index {i} outside 1..{n}")
        if len(self.p_vector) != n:
            raise ValueError(f"initial.p: expected {n} components, got {len(self.p_vector)}")
        pos = self.position_vector
        if pos is None:
            raise ValueError(
                "initial: 'q' is required for spin-cm/reduced-cm, 'x' for the Toda systems")
        if len(pos) != n:
            raise ValueError(f"initial position: expected {n} components, got {len(pos)}")
        if self.initial.spin_h is not None and len(self.initial.spin_h) != n:
            raise ValueError(f"initial.spin_h: expected {n} components")
        if self.system == "reduced-toda" and self.initial.c is None:
            raise ValueError("initial.c: coupling constants required for reduced-toda")
        return self

    @property
    def position_vector(self) -> Optional[list[float]]:
        if self.system in ("spin-cm", "reduced-cm"):
            return self.initial.q
        return self.initial.x

    @property
    def p_vector(self) -> list[float]:
        return self.initial.p


class VerifyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    suite: VerifySuite
    algebra: AlgebraConfig = Field(default_factory=lambda: AlgebraConfig(rank=2))
    pi_prime: Optional[list[int]] = None
    cases: int = Field(default=100, ge=1, le=10000)
    seed: int = 0
    tolerance: Optional[float] = Field(default=None, gt=0.0)
