"""Validated JSON and CLI specs: grids, catalog entries, experiments and the
effective run configuration echoed for provenance."""

from __future__ import annotations

import json
import math
import re
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, field_validator, model_validator

from .errors import SpecError
from .filters import Quadrature, frequency_grid
from .simulate import NoiseModel

Family = Literal[
    "primitive", "wamf03", "wamf07", "wpmf_correction", "bb1", "wrse", "uwmf1", "uwmf2"
]

# family -> (required, optional) parameter names
FAMILY_PARAMETERS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "primitive": (("theta",), ("phi",)),
    "wamf03": (("X0", "X3"), ()),
    "wamf07": (("X0",), ("X3", "X5", "X6")),
    "wpmf_correction": (("k", "theta"), ()),
    "bb1": (("theta",), ()),
    "wrse": (("k", "Omega0"), ("phi0",)),
    "uwmf1": (("X0", "X3"), ()),
    "uwmf2": (("X0", "X3"), ()),
}

_ANGLE: re.Pattern[str] = re.compile(
    r"^(?P<sign>[+-])?\s*(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*"
    r"(?P<pi>pi|π)?\s*(?:/\s*(?P<den>\d+\.?\d*))?$"
)


def parse_angle(value: str | float | int) -> float:
    """Parse '3pi', 'pi/2', '-0.65pi' or a plain number; the rational part is exact."""
    if isinstance(value, bool):
        raise SpecError(f"Expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    match: re.Match[str] | None = _ANGLE.match(str(value).strip())
    if match is None or (match["num"] is None and match["pi"] is None):
        raise SpecError(f"Cannot parse {value!r} as a number or multiple of pi")
    ratio: Fraction = Fraction(match["num"] or "1") / Fraction(match["den"] or "1")
    if match["sign"] == "-":
        ratio = -ratio
    return float(ratio) * math.pi if match["pi"] else float(ratio)


def parse_params(text: str) -> dict[str, float]:
    """Parse 'X0=3pi,X3=pi' into a name -> value mapping."""
    params: dict[str, float] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise SpecError(f"Parameter '{item}' is not of the form name=value", key=key or item)
        try:
            params[key] = parse_angle(raw)
        except SpecError as exc:
            raise SpecError(f"Parameter '{key}': {exc}", key=key) from exc
    return params


def parse_range(text: str, size: int) -> tuple[float, ...]:
    """Parse 'low:high' or 'low:high:extra' into floats, checking the field count."""
    parts: list[str] = text.split(":")
    if len(parts) != size:
        raise SpecError(f"Expected {size} ':'-separated fields, got '{text}'")
    return tuple(parse_angle(p) for p in parts)


def load_json(source: str) -> Any:
    """Decode inline JSON or the JSON file it names."""
    text: str = source
    if not source.lstrip().startswith(("{", "[")):
        path = Path(source)
        if not path.is_file():
            raise SpecError(f"Spec file not found: {source}")
        text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"Malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


class GridSpec(BaseModel):
    """Log-spaced frequency grid in units of 1/tau."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    omega_min: PositiveFloat = 1e-9
    omega_max: PositiveFloat = 1e-1
    points_per_decade: int = Field(default=200, ge=1)

    @model_validator(mode="after")
    def _ordered(self) -> GridSpec:
        if self.omega_min >= self.omega_max:
            raise SpecError(
                f"omega_min {self.omega_min} must be below omega_max {self.omega_max}",
                key="omega_min",
            )
        return self

    @classmethod
    def parse(cls, text: str) -> GridSpec:
        """Parse 'omega_min:omega_max:points_per_decade'."""
        low, high, density = parse_range(text, 3)
        if density != int(density):
            raise SpecError(f"Points per decade must be an integer, got {density}")
        return cls(omega_min=low, omega_max=high, points_per_decade=int(density))

    def grid(self) -> NDArray[np.float64]:
        return frequency_grid(self.omega_min, self.omega_max, self.points_per_decade)


class CatalogSpec(BaseModel):
    """{"family": ..., "params": {...}, "tau": 1.0}."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    family: Family
    params: dict[str, float] = Field(default_factory=dict)
    tau: PositiveFloat = 1.0

    @field_validator("params", mode="before")
    @classmethod
    def _symbolic(cls, value: Any) -> Any:
        if isinstance(value, str):
            return parse_params(value)
        if isinstance(value, dict):
            parsed: dict[str, float] = {}
            for key, raw in value.items():
                try:
                    parsed[key] = parse_angle(raw)
                except SpecError as exc:
                    raise SpecError(f"Parameter '{key}': {exc}", key=key) from exc
            return parsed
        return value

    @model_validator(mode="after")
    def _known_parameters(self) -> CatalogSpec:
        required, optional = FAMILY_PARAMETERS[self.family]
        for key in self.params:
            if key not in required and key not in optional:
                raise SpecError(
                    f"Unknown parameter '{key}' for family {self.family}", key=key
                )
        for key in required:
            if key not in self.params:
                raise SpecError(
                    f"Missing parameter '{key}' for family {self.family}", key=key
                )
        return self


class ExperimentSpec(BaseModel):
    """Monte-Carlo experiment: sequence, noise models and ensemble settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    sequence: CatalogSpec
    dephasing: Optional[NoiseModel] = None
    amplitude: Optional[NoiseModel] = None
    n_realizations: int = Field(default=500, ge=100)
    substeps: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    runs: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _quadratures(self) -> ExperimentSpec:
        if self.dephasing is not None and self.dephasing.quadrature is not Quadrature.DEPHASING:
            raise SpecError("'dephasing' model must have quadrature 'z'", key="dephasing")
        if self.amplitude is not None and self.amplitude.quadrature is not Quadrature.AMPLITUDE:
            raise SpecError("'amplitude' model must have quadrature 'omega'", key="amplitude")
        return self

    @property
    def models(self) -> list[NoiseModel]:
        return [m for m in (self.dephasing, self.amplitude) if m is not None]


class RunConfig(BaseModel):
    """Effective configuration of one CLI command with every default resolved."""

    model_config = ConfigDict(extra="forbid")

    command: Literal["catalog", "eval", "cost", "order", "optimize", "map", "shape", "simulate"]
    spec: Optional[dict[str, Any]] = None
    output: Optional[str] = None
    grid: Optional[GridSpec] = None
    seed: Optional[int] = None
    threads: int = Field(default=1, ge=1)
    options: dict[str, Any] = Field(default_factory=dict)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)
