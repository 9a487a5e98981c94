"""Ring geometry, disorder and Gibbs sampling, energy and current observables."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .config import ModelParams, rng_for


@dataclass(frozen=True, eq=False)
class DisorderField:
    """Masses on the periodic ring, indexed mod ``n``."""

    masses: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.masses, dtype=float)
        if m.ndim != 1 or m.size < 3:
            raise ValueError("masses must be a 1-d array with at least 3 entries")
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValueError("masses must be finite and positive")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def n(self) -> int:
        return self.masses.size

    def shift(self, y: int) -> "DisorderField":
        """Translated field, ``(tau_y m)_x = m_{x+y}``."""
        return DisorderField(np.roll(self.masses, -int(y)))

    def coupling(self) -> np.ndarray:
        """Bond couplings ``1/sqrt(m_x m_{x+1})`` for ``x = 0..n-1``."""
        m = self.masses
        return 1.0 / np.sqrt(m * np.roll(m, -1))

    def check_bounds(self, c_bound: float) -> bool:
        tol = 1e-12
        return bool(np.all(self.masses >= 1.0 / c_bound - tol) and np.all(self.masses <= c_bound + tol))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write("x,m\n")
        for x, m in enumerate(self.masses):
            buf.write(f"{x},{float(m)!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path) -> "DisorderField":
        text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else str(source)
        return cls(_read_two_column(text, "x,m"))

    @classmethod
    def ordered(cls, n: int) -> "DisorderField":
        return cls(np.ones(n))


@dataclass(eq=False)
class ChainState:
    """Configuration ``omega`` and the simulation clock."""

    omega: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.omega = np.array(self.omega, dtype=float)
        if self.omega.ndim != 1:
            raise ValueError("omega must be 1-d")
        if not np.all(np.isfinite(self.omega)):
            raise ValueError("omega has non-finite entries")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    @property
    def n(self) -> int:
        return self.omega.size

    def energy(self) -> float:
        return float(np.dot(self.omega, self.omega))

    def copy(self) -> "ChainState":
        return ChainState(self.omega.copy(), self.time)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write("x,omega\n")
        for x, w in enumerate(self.omega):
            buf.write(f"{x},{float(w)!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path, time: float = 0.0) -> "ChainState":
        text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else str(source)
        return cls(_read_two_column(text, "x,omega"), time)


def _read_two_column(text: str, header: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != header:
        raise ValueError(f"expected CSV header {header!r}")
    rows = [ln.split(",") for ln in lines[1:]]
    idx = np.array([int(r[0]) for r in rows])
    vals = np.array([float(r[1]) for r in rows])
    if not np.array_equal(np.sort(idx), np.arange(idx.size)):
        raise ValueError("site indices must be 0..n-1")
    out = np.empty(idx.size)
    out[idx] = vals
    return out


def sample_masses(params: ModelParams, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    size = params.n if size is None else size
    c = params.c_bound
    if c == 1.0:
        return np.ones(size)
    if params.mass_law == "uniform":
        return rng.uniform(1.0 / c, c, size=size)
    if params.mass_law == "two_point":
        return np.where(rng.random(size) < 0.5, 1.0 / c, c)
    if params.mass_law == "log_uniform":
        return np.exp(rng.uniform(-np.log(c), np.log(c), size=size))
    raise ValueError(f"unknown mass law {params.mass_law!r}")


def mass_law_moments(params: ModelParams) -> tuple[float, float]:
    """Mean and variance of a single mass under the configured law."""
    c = params.c_bound
    if c == 1.0:
        return 1.0, 0.0
    a, b = 1.0 / c, c
    if params.mass_law == "uniform":
        return (a + b) / 2, (b - a) ** 2 / 12
    if params.mass_law == "two_point":
        return (a + b) / 2, (b - a) ** 2 / 4
    if params.mass_law == "log_uniform":
        w = 2 * np.log(c)
        mean = (b - a) / w
        second = (b**2 - a**2) / (2 * w)
        return mean, second - mean**2
    raise ValueError(f"unknown mass law {params.mass_law!r}")


def sample_disorder(params: ModelParams, seed: int, sample: int = 0) -> DisorderField:
    """I.i.d. masses from the configured law; deterministic in ``(seed, sample)``."""
    return DisorderField(sample_masses(params, rng_for(seed, sample, "disorder")))


def disorder_ensemble(params: ModelParams, seed: int, count: int, first: int = 0) -> list[DisorderField]:
    return [sample_disorder(params, seed, first + k) for k in range(count)]


def sample_gibbs(params: ModelParams, seed: int, replica: int = 0) -> ChainState:
    """Product Gaussian equilibrium: ``omega_x ~ N(0, 1/beta)`` i.i.d."""
    rng = rng_for(seed, replica, "gibbs")
    return ChainState(rng.standard_normal(params.n) / np.sqrt(params.beta), 0.0)


def hopping_matrix(disorder: DisorderField, sparse: bool = False):
    """Skew matrix with ``M[x, x+1] = 1/sqrt(m_x m_{x+1})`` on the ring."""
    n = disorder.n
    c = disorder.coupling()
    rows = np.arange(n)
    cols = (rows + 1) % n
    if sparse:
        upper = sp.coo_matrix((c, (rows, cols)), shape=(n, n))
        return (upper - upper.T).tocsr()
    mat = np.zeros((n, n))
    mat[rows, cols] += c
    mat[cols, rows] -= c
    return mat


def drift_field(state: ChainState | np.ndarray, disorder: DisorderField) -> np.ndarray:
    """Velocity ``F = M omega`` of the hamiltonian flow."""
    omega = state.omega if isinstance(state, ChainState) else np.asarray(state, dtype=float)
    if omega.size != disorder.n:
        raise ValueError(f"size mismatch: state {omega.size}, disorder {disorder.n}")
    c = disorder.coupling()
    return c * np.roll(omega, -1) - np.roll(c * omega, 1)


def bond_currents(omega: np.ndarray, coupling: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian and exchange currents on every bond ``(x, x+1)``."""
    right = np.roll(omega, -1)
    j_a = 2.0 * coupling * omega * right
    j_s = lam * (right**2 - omega**2)
    return j_a, j_s


def bond_current(state: ChainState, disorder: DisorderField, params: ModelParams, x: int) -> tuple[float, float, float]:
    """Current across bond ``(x, x+1)`` as ``(j, jA, jS)``."""
    n = state.n
    if not 0 <= x < n:
        raise IndexError(f"bond index {x} outside 0..{n - 1}")
    w0, w1 = state.omega[x], state.omega[(x + 1) % n]
    j_a = 2.0 * w0 * w1 / np.sqrt(disorder.masses[x] * disorder.masses[(x + 1) % n])
    j_s = params.lam * (w1**2 - w0**2)
    return float(j_a + j_s), float(j_a), float(j_s)


def _check_site(state: ChainState, x: int) -> None:
    if not 0 <= x < state.n:
        raise IndexError(f"site index {x} outside 0..{state.n - 1}")


def apply_flip(state: ChainState, x: int) -> ChainState:
    _check_site(state, x)
    out = state.copy()
    out.omega[x] = -out.omega[x]
    return out


def apply_exchange(state: ChainState, x: int) -> ChainState:
    _check_site(state, x)
    out = state.copy()
    y = (x + 1) % state.n
    out.omega[x], out.omega[y] = state.omega[y], state.omega[x]
    return out


def signed_sites(n: int) -> np.ndarray:
    """Centered coordinates in ``(-n/2, n/2]`` for ring sites ``0..n-1``."""
    x = np.arange(n)
    return np.where(x > n // 2, x - n, x)
