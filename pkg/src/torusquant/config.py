"""Job configuration files.

A job is a strict JSON object; unknown keys are errors.  Axis and parameter
numbers in configs are 1-based (``controlled_axes: [1]`` means I1/phi1), the
Python API is 0-based.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, model_validator

from . import expr as ex
from .errors import ParseError, ValidationError

COMMANDS = ("spectrum", "evolve", "holonomy", "classical-flow", "action", "check")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class Term(_Strict):
    n: list[int]
    re: float = 0.0
    im: float = 0.0


class LambdaEntry(_Strict):
    axis: int = Field(ge=1)
    param: int = Field(ge=1)
    expr: str


class PerturbationConfig(_Strict):
    controlled_axes: list[int] = Field(min_length=1)
    num_params: int = Field(ge=1)
    Lambda: list[LambdaEntry] = Field(min_length=1)


class PathConfig(_Strict):
    t: Optional[list[float]] = None
    s: Optional[list[list[float]]] = None
    csv: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        inline = self.t is not None or self.s is not None
        if inline == (self.csv is not None):
            raise ValueError("give either inline t and s, or csv")
        if inline and (self.t is None or self.s is None):
            raise ValueError("inline paths need both t and s")
        if inline and len(self.t) != len(self.s):
            raise ValueError(f"t has {len(self.t)} nodes but s has {len(self.s)}")
        return self


class ClassicalConfig(_Strict):
    H: str
    q0: list[float] = Field(min_length=1)
    p0: list[float] = Field(min_length=1)
    t0: float = 0.0
    t_end: float
    dt: float = Field(gt=0)
    first_integrals: list[str] = []
    extended: bool = False
    p00: float = 0.0

    @model_validator(mode="after")
    def _dims(self):
        if len(self.q0) != len(self.p0):
            raise ValueError(f"q0 has {len(self.q0)} entries but p0 has {len(self.p0)}")
        return self


class ActionConfig(_Strict):
    H: str
    energies: list[float] = Field(min_length=1)
    t0: float = 0.0
    q_center: float = 0.0
    max_degree: int = Field(default=4, ge=1)
    correspondence: bool = False


class JobConfig(_Strict):
    command: Optional[Literal[COMMANDS]] = None
    m: Optional[int] = Field(default=None, ge=1)
    n_max: Optional[int] = Field(default=None, ge=0)
    lam: Optional[list[float]] = Field(default=None, alias="lambda")
    half_shift: Optional[list[bool]] = None
    H: Optional[str] = None
    psi0: Optional[list[Term]] = None
    t: Optional[list[float] | float] = None
    perturbation: Optional[PerturbationConfig] = None
    path: Optional[PathConfig] = None
    steps: int = Field(default=4096, ge=1)
    classical: Optional[ClassicalConfig] = None
    action: Optional[ActionConfig] = None
    format: Literal["csv", "json"] = "json"
    seed: int = 42
    suites: Optional[list[str]] = None

    @model_validator(mode="after")
    def _consistent(self):
        m = self.m
        if m is not None:
            if self.lam is not None and len(self.lam) != m:
                raise ValueError(f"lambda has {len(self.lam)} entries but m = {m}")
            if self.half_shift is not None and len(self.half_shift) != m:
                raise ValueError(f"half_shift has {len(self.half_shift)} entries but m = {m}")
            for term in self.psi0 or []:
                if len(term.n) != m:
                    raise ValueError(f"psi0 index {term.n} does not have m = {m} components")
        p = self.perturbation
        if p is not None and m is not None:
            for a in p.controlled_axes:
                if not 1 <= a <= m:
                    raise ValueError(f"controlled axis {a} outside 1..{m}")
            for entry in p.Lambda:
                if entry.axis not in p.controlled_axes:
                    raise ValueError(f"Lambda entry for axis {entry.axis}, which is not controlled")
                if entry.param > p.num_params:
                    raise ValueError(f"Lambda entry for parameter {entry.param} > num_params")
        if p is not None and self.path is not None and self.path.s is not None:
            for row in self.path.s:
                if len(row) != p.num_params:
                    raise ValueError(f"path node {row} does not have num_params = {p.num_params} entries")
        needs = {
            "spectrum": ("m", "n_max", "H"),
            "evolve": ("m", "n_max", "H", "psi0", "t"),
            "holonomy": ("m", "n_max", "perturbation", "path"),
            "classical-flow": ("classical",),
            "action": ("action",),
        }
        for key in needs.get(self.command, ()):
            if getattr(self, key) is None:
                raise ValueError(f"command {self.command!r} needs {_alias(key)!r}")
        return self

    @property
    def lambda_(self) -> tuple:
        return tuple(self.lam) if self.lam is not None else (0.0,) * (self.m or 0)

    @property
    def shifts(self) -> tuple:
        return tuple(self.half_shift) if self.half_shift is not None else (False,) * (self.m or 0)

    @property
    def times(self) -> list[float]:
        if self.t is None:
            return []
        return [float(self.t)] if isinstance(self.t, (int, float)) else [float(v) for v in self.t]

    @property
    def is_loop(self) -> bool:
        if self.path is None or self.path.s is None:
            return False
        return bool(np.array_equal(self.path.s[0], self.path.s[-1]))

    def to_json(self) -> str:
        return json.dumps(self.model_dump(by_alias=True, exclude_none=True), indent=2)


def _alias(key):
    return "lambda" if key == "lam" else key


def _check_expressions(cfg: JobConfig) -> list[str]:
    """Parse every expression field; returns diagnostics naming the field."""
    problems = []
    fields = [("H", cfg.H)]
    if cfg.perturbation is not None:
        fields += [(f"perturbation.Lambda[{i}].expr", e.expr) for i, e in enumerate(cfg.perturbation.Lambda)]
    if cfg.classical is not None:
        fields.append(("classical.H", cfg.classical.H))
        fields += [(f"classical.first_integrals[{i}]", s) for i, s in enumerate(cfg.classical.first_integrals)]
    if cfg.action is not None:
        fields.append(("action.H", cfg.action.H))
    for name, text in fields:
        if text is None:
            continue
        try:
            ex.parse(text)
        except ParseError as exc:
            problems.append(f"{name}: {exc}")
    return problems


def parse_config(text: str) -> JobConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    try:
        cfg = JobConfig.model_validate(data)
    except PydanticError as exc:
        diags = []
        for err in exc.errors():
            loc = ".".join(str(_alias(p)) for p in err["loc"]) or "<root>"
            diags.append(f"{loc}: {err['msg']}")
        raise ValidationError(diags) from None
    diags = _check_expressions(cfg)
    if diags:
        raise ValidationError(diags)
    return cfg


def load_config(path) -> JobConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
