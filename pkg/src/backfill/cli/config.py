"""Run configuration: a flat ``key = value`` text file.

Blank lines and lines starting with ``#`` are ignored.  Every key must be
one of the documented fields of :class:`RunConfig`; anything else is an
error, so a typo never silently falls back to a default.

Keys
----
seed            master seed for every random stream (int)
a, c            OU signal ``dX = a X dt + c dW`` used to simulate and, unless
                ``calibrate`` is on, to backfill
x0              initial value; ``stationary`` draws it from the stationary law
calibrate       fit (a, c) to the dense window instead of using the given values
kappa           observation-noise scale of the dense channel in the filter
intensity       tick rate before the liquidity time
liquidity_time  T, end of the sparse segment
observer_time   T0, end of the record
dt              grid step; T and T0 must be multiples of it
n_paths         ensemble size
method          optimal, optimal-conditioned, interp-relaxed, flat, linear, polynomial
poly_degree     degree of the polynomial baseline
benchmarks      number of benchmark series to simulate (0 disables them)
benchmark_noise standard deviation of benchmark level noise
use_benchmarks  feed benchmark files to the filter when they are present
eps_hit         anchor-hit tolerance
save_paths      also write the raw ensemble paths
out             output directory
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Union

from ..errors import ConfigError

METHODS = ("optimal", "optimal-conditioned", "interp-relaxed", "flat", "linear", "polynomial")
STOCHASTIC_METHODS = ("optimal", "optimal-conditioned", "interp-relaxed")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    a: float = -4.0
    c: float = 1.0
    x0: Union[float, str] = "stationary"
    calibrate: bool = False
    kappa: float = 0.005
    intensity: float = 3.0
    liquidity_time: float = 1.0
    observer_time: float = 1.5
    dt: float = 1e-3
    n_paths: int = 500
    method: str = "optimal-conditioned"
    poly_degree: int = 3
    benchmarks: int = 0
    benchmark_noise: float = 0.2
    use_benchmarks: bool = True
    eps_hit: float = 1e-8
    save_paths: bool = False
    out: str = "."

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if not self.observer_time > self.liquidity_time >= 0:
            raise ConfigError("need observer_time > liquidity_time >= 0")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        for name in ("liquidity_time", "observer_time"):
            steps = getattr(self, name) / self.dt
            if abs(steps - round(steps)) > 1e-6:
                raise ConfigError(f"{name} must be a multiple of dt")
        if self.c < 0 or self.kappa <= 0 or self.intensity < 0 or self.benchmark_noise <= 0:
            raise ConfigError("c >= 0, kappa > 0, intensity >= 0 and benchmark_noise > 0 required")
        if self.poly_degree < 0 or self.benchmarks < 0:
            raise ConfigError("poly_degree and benchmarks must be non-negative")
        if isinstance(self.x0, str) and self.x0 != "stationary":
            raise ConfigError("x0 must be a number or 'stationary'")
        if self.x0 == "stationary" and self.a >= 0:
            raise ConfigError("a stationary start needs a < 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.observer_time / self.dt))

    @property
    def i_liquidity(self) -> int:
        return int(round(self.liquidity_time / self.dt))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(name: str, kind, text: str):
    if name == "x0":
        return text if text == "stationary" else float(text)
    if kind in (bool, "bool"):
        return _parse_bool(text)
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines into a :class:`RunConfig`."""
    known = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, known[key], value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def format_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config`."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
