from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator


DEFAULT_OPTIMIZERS = ("pso", "bbo")


class PsoConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    particles: int = Field(150, ge=1)
    iterations: int = Field(150, ge=1)
    c1: float = Field(2.0, ge=0)
    c2: float = Field(2.5, ge=0)
    inertia_start: float = 1.4
    inertia_end: float = 0.5
    v_max: float = Field(60.0, gt=0)

    @model_validator(mode="after")
    def _inertia_decreases(self) -> "PsoConfig":
        if self.inertia_start < self.inertia_end:
            raise ValueError("inertia_start must be >= inertia_end")
        return self


class BboConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    habitats: int = Field(50, ge=2)
    kept_habitats: int = Field(10, ge=1)
    iterations: int = Field(150, ge=1)
    max_immigration: float = Field(1.0, gt=0)
    max_emigration: float = Field(1.0, gt=0)
    max_mutation: float = Field(0.1, ge=0, le=1)
    s_max: int | None = Field(None, ge=1)  # None: one species slot per habitat

    @model_validator(mode="after")
    def _elites_fit(self) -> "BboConfig":
        if not 0 < self.kept_habitats < self.habitats:
            raise ValueError("kept_habitats must lie strictly between 0 and habitats")
        return self

    @property
    def species_max(self) -> int:
        return self.s_max if self.s_max is not None else self.habitats
