"""Run configuration: TOML files validated into a :class:`RunSpec`."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .presets import PresetError, parse_descriptor

__all__ = ["ConfigError", "RunSpec", "parse_config", "load_toml", "COMMANDS"]

COMMANDS = ("algebra-check", "simulate", "steady-verify", "stability-run")


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    nx: int = 64
    ny: int = 64

    @field_validator("nx", "ny")
    @classmethod
    def _even(cls, v):
        if v < 8 or v % 2 or v > 4096:
            raise ValueError("grid sizes must be even and in [8, 4096]")
        return v


def _finite(v: float) -> float:
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


class FieldDescriptor(_Strict):
    preset: Optional[str] = None
    amplitude: float = 1.0
    mode: int = Field(1, ge=1)
    file: Optional[str] = None

    _chk_amp = field_validator("amplitude")(_finite)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.file is None):
            raise ValueError("give exactly one of 'preset' or 'file'")
        if self.preset is not None:
            parse_descriptor(self.preset)
        return self

    def as_dict(self) -> dict:
        if self.file is not None:
            return {"file": self.file}
        return {"preset": self.preset, "amplitude": self.amplitude, "mode": self.mode}


def _descriptor(v):
    if isinstance(v, str):
        try:
            return FieldDescriptor(**parse_descriptor(v))
        except PresetError as exc:
            raise ValueError(str(exc)) from None
    return v


class AlgebraConfig(_Strict):
    kind: Literal["so3", "sine", "file"] = "so3"
    n: int = 5
    inertia: Union[Literal["identity", "diag123", "laplacian"], list[float]] = "identity"
    v_s: Optional[list[float]] = None
    file: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "file" and not self.file:
            raise ValueError("kind = 'file' needs 'file'")
        if self.kind == "sine" and (self.n % 2 == 0 or not 3 <= self.n <= 15):
            raise ValueError("sine algebra needs odd n in [3, 15]")
        return self


class IntegrateConfig(_Strict):
    dt: float = Field(1e-3, gt=0)
    t_end: float = Field(10.0, ge=0)
    a: float = 1.0
    v0: Optional[list[float]] = None
    write_every: int = Field(100, ge=1)

    _chk = field_validator("dt", "t_end", "a")(_finite)


class AlgebraCheckParams(_Strict):
    algebra: AlgebraConfig = AlgebraConfig()
    samples: int = Field(200, ge=1, le=100000)
    tolerance: float = Field(1e-10, gt=0)
    integrate: IntegrateConfig = IntegrateConfig()
    energy_rtol: float = Field(1e-8, gt=0)


class SimulateParams(_Strict):
    grid: GridConfig = GridConfig()
    dt: float = Field(gt=0)
    t_end: float = Field(ge=0)
    monitor_stride: int = Field(50, ge=1)
    initial: FieldDescriptor = FieldDescriptor(preset="random8")
    drift: FieldDescriptor = FieldDescriptor(preset="zero")
    casimir_powers: list[int] = [1, 2, 3]
    energy_rtol: float = Field(1e-6, gt=0)
    casimir_rtol: float = Field(1e-6, gt=0)

    _chk = field_validator("dt", "t_end")(_finite)
    _desc = field_validator("initial", "drift", mode="before")(_descriptor)

    @field_validator("casimir_powers")
    @classmethod
    def _powers(cls, v):
        if not v or any(not 1 <= k <= 8 for k in v):
            raise ValueError("casimir powers must be integers in [1, 8]")
        return v


class SteadyConfig(_Strict):
    u_amp: float = 1.0
    w_amp: float = 2.0
    mode: int = Field(1, ge=1)

    _chk = field_validator("u_amp", "w_amp")(_finite)


class SteadyVerifyParams(_Strict):
    grid: GridConfig = GridConfig()
    steady: SteadyConfig = SteadyConfig()
    samples: int = Field(20, ge=1, le=10000)
    test_kmax: int = Field(6, ge=1)
    steady_tol: float = Field(1e-10, gt=0)
    variation_tol: float = Field(1e-9, gt=0)


class StabilityParams(_Strict):
    grid: GridConfig = GridConfig(nx=128, ny=128)
    steady: SteadyConfig = SteadyConfig()
    perturbation: FieldDescriptor = FieldDescriptor(preset="cosxsiny", amplitude=0.01)
    dt: float = Field(2e-3, gt=0)
    t_end: float = Field(20.0, ge=0)
    monitor_stride: int = Field(50, ge=1)
    tolerance: float = Field(1e-4, gt=0)
    drift_tol: float = Field(1e-6, gt=0)

    _chk = field_validator("dt", "t_end")(_finite)
    _desc = field_validator("perturbation", mode="before")(_descriptor)


PARAMS = {
    "algebra-check": AlgebraCheckParams,
    "simulate": SimulateParams,
    "steady-verify": SteadyVerifyParams,
    "stability-run": StabilityParams,
}


class RunSpec(_Strict):
    command: Literal["algebra-check", "simulate", "steady-verify", "stability-run"]
    parameters: Union[AlgebraCheckParams, SimulateParams, SteadyVerifyParams, StabilityParams]
    seed: int = Field(0, ge=0, le=2 ** 64 - 1)
    output_dir: Path = Path("out")
    base_dir: Path = Path(".")


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from None


def _format_errors(path, exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = "unknown key" if err["type"] == "extra_forbidden" else err["msg"]
        lines.append(f"{path}: key '{loc}': {msg}")
    return "\n".join(lines)


def parse_config(path, command: str | None = None, seed: int | None = None,
                 output_dir=None) -> RunSpec:
    """Read and validate a run configuration.

    The file may name its ``command``; a command given on the command line
    must agree with it.  ``seed`` and ``output_dir`` override file values.
    """
    data = dict(load_toml(path))
    file_cmd = data.pop("command", None)
    if command is None:
        command = file_cmd
    elif file_cmd is not None and file_cmd != command:
        raise ConfigError(f"{path}: config is for '{file_cmd}', not '{command}'")
    if command not in PARAMS:
        raise ConfigError(f"{path}: unknown or missing command {command!r} (expected one of {', '.join(COMMANDS)})")
    file_seed = data.pop("seed", 0)
    file_out = data.pop("output_dir", "out")
    try:
        params = PARAMS[command](**data)
        spec = RunSpec(
            command=command,
            parameters=params,
            seed=file_seed if seed is None else seed,
            output_dir=Path(output_dir if output_dir is not None else file_out),
            base_dir=Path(path).resolve().parent,
        )
    except ValidationError as exc:
        raise ConfigError(_format_errors(path, exc)) from None
    return spec
