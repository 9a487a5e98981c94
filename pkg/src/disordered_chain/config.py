"""Dataclass configurations and the flat ``key=value`` config reader."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

MASS_LAWS = ("uniform", "two_point", "log_uniform")

# Stream identifiers for counter-based random number derivation.
STREAMS = {
    "disorder": 0,
    "gibbs": 1,
    "waits": 2,
    "kinds": 3,
    "sites": 4,
    "test_functions": 5,
    "bootstrap": 6,
}


@dataclass(frozen=True)
class ModelParams:
    """Noise rates, temperature, disorder bound and ring size.

    Attributes:
        gamma: flip rate per site.
        lam: exchange rate per bond.
        beta: inverse temperature.
        c_bound: masses live in ``[1/c_bound, c_bound]``.
        n: ring size, at least 3.
        mass_law: one of ``MASS_LAWS``.
    """

    gamma: float = 1.0
    lam: float = 1.0
    beta: float = 1.0
    c_bound: float = 2.0
    n: int = 64
    mass_law: str = "uniform"

    def __post_init__(self) -> None:
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.lam >= 0.0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.c_bound >= 1.0:
            raise ValueError(f"c_bound must be >= 1, got {self.c_bound}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"n must be an integer >= 3, got {self.n}")
        if self.mass_law not in MASS_LAWS:
            raise ValueError(f"unknown mass law {self.mass_law!r}; expected one of {MASS_LAWS}")

    @property
    def chi(self) -> float:
        """Static compressibility, the variance of a single site energy."""
        return 2.0 / self.beta**2

    @property
    def total_rate(self) -> float:
        return self.n * (self.gamma + self.lam)

    def replace(self, **changes: Any) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def require_positive_noise(self) -> None:
        if self.gamma <= 0 or self.lam <= 0:
            raise ValueError("this computation needs gamma > 0 and lam > 0")


@dataclass(frozen=True)
class SimulationConfig:
    t_final: float = 10.0
    dt_max: float = 1e-2
    replicas: int = 1
    seed: int = 0
    obs_grid: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        check_seed(self.seed)

    def observation_times(self) -> np.ndarray:
        if self.obs_grid:
            times = np.asarray(self.obs_grid, dtype=float)
        else:
            times = np.linspace(0.0, self.t_final, 11)
        if np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > self.t_final + 1e-12:
            raise ValueError("observation grid must be sorted inside [0, t_final]")
        return times


@dataclass(frozen=True)
class SolverConfig:
    z_grid: tuple[float, ...] = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    krylov_rtol: float = 1e-12
    residual_tol: float = 1e-10
    cg_rtol: float = 1e-10
    ell: int = 8
    samples: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.z_grid) < 1 or min(self.z_grid) <= 0:
            raise ValueError("z grid must contain positive values")
        check_seed(self.seed)


@dataclass(frozen=True)
class FluctuationConfig:
    modes: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
    t_grid: tuple[float, ...] = ()
    replicas: int = 8
    seed: int = 0
    t_traj: float = 400.0
    dt_obs: float = 0.5
    samples: int = 4


def check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def rng_for(seed: int, replica: int = 0, stream: str | int = 0) -> np.random.Generator:
    """Independent generator for a (seed, replica, stream) triple.

    The spawn key makes every stream reproducible on its own, whatever the
    order in which replicas are scheduled.
    """
    stream_id = STREAMS[stream] if isinstance(stream, str) else int(stream)
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=(int(replica), stream_id))
    return np.random.Generator(np.random.PCG64(ss))


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key=value`` lines; ``#`` starts a comment.

    Keys may carry a section prefix such as ``model.gamma``.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key] = value
    return out


def read_config(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())
