"""Skew-linear flow interrupted by Poisson flip and exchange events.

Between events the flow ``d omega/dt = M omega`` is integrated by the Cayley
map (implicit midpoint), which is orthogonal for skew ``M``. Bond currents are
integrated with the midpoint value, so the local energy balance holds to
round-off on every sub-step.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chain import ChainState, DisorderField
from .config import ModelParams, rng_for

FLIP = 0
EXCHANGE = 1


@numba.njit(cache=True)
def _cayley_inplace(w, c, h, rhs, sub, diag, sup, cp, dp, zz, work):
    """One Cayley step ``w <- (I - h/2 M)^{-1}(I + h/2 M) w`` on the ring.

    Cyclic tridiagonal system solved by Thomas plus a Sherman-Morrison
    correction for the two corner entries.
    """
    n = w.size
    hh = 0.5 * h
    for x in range(n):
        xp = x + 1 if x + 1 < n else 0
        xm = x - 1 if x > 0 else n - 1
        rhs[x] = w[x] + hh * (c[x] * w[xp] - c[xm] * w[xm])
        diag[x] = 1.0
        sup[x] = -hh * c[x]
        sub[x] = hh * c[xm]
    # corners: A[0, n-1] = sub[0], A[n-1, 0] = sup[n-1]
    beta_c = sub[0]
    alpha_c = sup[n - 1]
    gam = -diag[0]
    diag[0] = diag[0] - gam
    diag[n - 1] = diag[n - 1] - alpha_c * beta_c / gam
    # u = (gam, 0, ..., alpha_c)
    for x in range(n):
        zz[x] = 0.0
    zz[0] = gam
    zz[n - 1] = alpha_c
    # forward sweep for both right-hand sides
    cp[0] = sup[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    work[0] = zz[0] / diag[0]
    for x in range(1, n):
        den = diag[x] - sub[x] * cp[x - 1]
        cp[x] = sup[x] / den if x < n - 1 else 0.0
        dp[x] = (rhs[x] - sub[x] * dp[x - 1]) / den
        work[x] = (zz[x] - sub[x] * work[x - 1]) / den
    for x in range(n - 2, -1, -1):
        dp[x] -= cp[x] * dp[x + 1]
        work[x] -= cp[x] * work[x + 1]
    fact = (dp[0] + beta_c * dp[n - 1] / gam) / (1.0 + work[0] + beta_c * work[n - 1] / gam)
    for x in range(n):
        w[x] = dp[x] - fact * work[x]


@numba.njit(cache=True)
def _flow(w, c, lam, span, dt_max, jd, jm, buf):
    """Integrate the flow over ``span``, accumulating drift and compensator."""
    n = w.size
    if span <= 0.0:
        return 0
    steps = int(math.ceil(span / dt_max))
    h = span / steps
    old = buf[0]
    rhs = buf[1]
    sub = buf[2]
    diag = buf[3]
    sup = buf[4]
    cp = buf[5]
    dp = buf[6]
    zz = buf[7]
    work = buf[8]
    for _ in range(steps):
        for x in range(n):
            old[x] = w[x]
        _cayley_inplace(w, c, h, rhs, sub, diag, sup, cp, dp, zz, work)
        for x in range(n):
            xp = x + 1 if x + 1 < n else 0
            a = 0.5 * (old[x] + w[x])
            b = 0.5 * (old[xp] + w[xp])
            grad = lam * (b * b - a * a)
            jd[x] += h * (2.0 * c[x] * a * b + grad)
            jm[x] -= h * grad
        if not np.isfinite(w[0]):
            return 1
    return 0


@numba.njit(cache=True)
def _run(w, c, lam, ev_times, ev_kinds, ev_sites, obs_times, dt_max, out_w, out_jd, out_jm):
    n = w.size
    jd = np.zeros(n)
    jm = np.zeros(n)
    buf = np.empty((9, n))
    t = 0.0
    k = 0
    e = 0
    n_obs = obs_times.size
    n_ev = ev_times.size
    while k < n_obs:
        t_obs = obs_times[k]
        t_ev = ev_times[e] if e < n_ev else np.inf
        target = t_ev if t_ev <= t_obs else t_obs
        if _flow(w, c, lam, target - t, dt_max, jd, jm, buf) != 0:
            return 1
        for x in range(n):
            if not np.isfinite(w[x]):
                return 1
        t = target
        if t_ev <= t_obs:
            x = ev_sites[e]
            if ev_kinds[e] == 0:
                w[x] = -w[x]
            else:
                xp = x + 1 if x + 1 < n else 0
                jm[x] += w[xp] * w[xp] - w[x] * w[x]
                tmp = w[x]
                w[x] = w[xp]
                w[xp] = tmp
            e += 1
        else:
            for x in range(n):
                out_w[k, x] = w[x]
                out_jd[k, x] = jd[x]
                out_jm[k, x] = jm[x]
            k += 1
    return 0


def _as_coupling(hopping) -> np.ndarray:
    if isinstance(hopping, DisorderField):
        return hopping.coupling()
    mat = hopping.toarray() if sp.issparse(hopping) else np.asarray(hopping, dtype=float)
    n = mat.shape[0]
    return np.array([mat[x, (x + 1) % n] for x in range(n)])


def step_deterministic(state: ChainState, hopping, dt: float) -> ChainState:
    """One Cayley step of the hamiltonian flow.

    ``hopping`` is a ``DisorderField`` or the skew matrix ``M`` itself.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    w = state.omega.copy()
    if dt == 0:
        return ChainState(w, state.time)
    c = _as_coupling(hopping)
    if c.size != w.size:
        raise ValueError("size mismatch between state and hopping matrix")
    if dt * np.max(np.abs(c)) < 1.0:
        buf = np.empty((8, w.size))
        _cayley_inplace(w, c, dt, *buf)
    else:
        # large steps: pivoted sparse LU instead of the unpivoted sweep
        m = _matrix_from_coupling(c)
        eye = sp.identity(w.size, format="csc")
        w = spla.spsolve((eye - 0.5 * dt * m).tocsc(), (eye + 0.5 * dt * m) @ w)
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("Cayley step produced non-finite values")
    return ChainState(w, state.time + dt)


def _matrix_from_coupling(c: np.ndarray):
    n = c.size
    rows = np.arange(n)
    upper = sp.coo_matrix((c, (rows, (rows + 1) % n)), shape=(n, n))
    return (upper - upper.T).tocsc()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Observed states and per-bond integrated currents.

    ``j_drift[k, x]`` is the time integral of ``j_{x,x+1}`` up to ``times[k]``
    and ``j_mart[k, x]`` the exchange martingale on the same bond.
    """

    times: np.ndarray
    omega: np.ndarray
    j_drift: np.ndarray
    j_mart: np.ndarray
    n_flips: int
    n_exchanges: int
    time_scale: float = 1.0
    events: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    @property
    def n(self) -> int:
        return self.omega.shape[1]

    @property
    def currents(self) -> np.ndarray:
        return self.j_drift + self.j_mart

    def energy(self) -> np.ndarray:
        return np.sum(self.omega**2, axis=1)

    def conservation_residual(self) -> float:
        """Max over times and sites of the local balance violation."""
        de = self.omega**2 - self.omega[0] ** 2
        cur = self.currents - self.currents[0]
        balance = cur - np.roll(cur, 1, axis=1)
        return float(np.max(np.abs(de - balance)))

    def state_at(self, k: int) -> ChainState:
        return ChainState(self.omega[k].copy(), float(self.times[k]))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write("t,x,omega,J_drift,J_mart\n")
        for k, t in enumerate(self.times):
            for x in range(self.n):
                buf.write(f"{float(t)!r},{x},{float(self.omega[k, x])!r},{float(self.j_drift[k, x])!r},{float(self.j_mart[k, x])!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def poisson_events(params: ModelParams, t_final: float, seed: int, replica: int = 0):
    """Aggregated clock of rate ``n(gamma + lam)`` with categorical marks."""
    rate = params.total_rate
    if rate == 0.0:
        empty = np.empty(0)
        return empty, np.empty(0, dtype=np.int8), np.empty(0, dtype=np.int64)
    waits_rng = rng_for(seed, replica, "waits")
    chunks = []
    total = 0.0
    block = max(16, int(rate * t_final * 1.1) + 16)
    while total <= t_final:
        w = waits_rng.exponential(1.0 / rate, size=block)
        chunks.append(w)
        total += w.sum()
    times = np.cumsum(np.concatenate(chunks))
    times = times[times <= t_final]
    m = times.size
    p_flip = params.gamma / (params.gamma + params.lam)
    kinds = np.where(rng_for(seed, replica, "kinds").random(m) < p_flip, FLIP, EXCHANGE).astype(np.int8)
    sites = rng_for(seed, replica, "sites").integers(0, params.n, size=m).astype(np.int64)
    return times, kinds, sites


def simulate(
    params: ModelParams,
    disorder: DisorderField,
    initial: ChainState,
    t_final: float,
    seed: int,
    obs_grid=None,
    dt_max: float = 1e-2,
    replica: int = 0,
    record_events: bool = False,
) -> Trajectory:
    """Simulate one trajectory on ``[0, t_final]``.

    The observation grid always ends at ``t_final``; times are measured from
    the initial state's clock.
    """
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    if initial.n != disorder.n or initial.n != params.n:
        raise ValueError(f"size mismatch: state {initial.n}, disorder {disorder.n}, params {params.n}")
    grid = np.linspace(0.0, t_final, 11) if obs_grid is None else np.asarray(obs_grid, dtype=float)
    if grid.size and (np.any(np.diff(grid) < 0) or grid[0] < 0 or grid[-1] > t_final * (1 + 1e-12)):
        raise ValueError("observation grid must be sorted inside [0, t_final]")
    if grid.size == 0 or grid[-1] < t_final:
        grid = np.append(grid, t_final)
    times, kinds, sites = poisson_events(params, t_final, seed, replica)
    w = initial.omega.copy()
    n_obs = grid.size
    out_w = np.empty((n_obs, params.n))
    out_jd = np.empty((n_obs, params.n))
    out_jm = np.empty((n_obs, params.n))
    status = _run(w, disorder.coupling(), float(params.lam), times, kinds, sites, grid, float(dt_max), out_w, out_jd, out_jm)
    if status != 0:
        raise FloatingPointError(
            f"non-finite state in replica {replica} (seed {seed}); last finite energy "
            f"{float(np.nansum(initial.omega**2))}, dt_max {dt_max}"
        )
    flips = int(np.count_nonzero(kinds == FLIP))
    return Trajectory(
        times=initial.time + grid,
        omega=out_w,
        j_drift=out_jd,
        j_mart=out_jm,
        n_flips=flips,
        n_exchanges=int(kinds.size - flips),
        events=(times, kinds, sites) if record_events else None,
    )


def time_rescale(trajectory: Trajectory, n: int, inverse: bool = False) -> Trajectory:
    """Diffusive relabeling ``t -> t / n^2`` (or back with ``inverse``)."""
    if n <= 0:
        raise ValueError("n must be positive")
    factor = float(n) ** 2
    if inverse:
        return replace(trajectory, times=trajectory.times * factor, time_scale=trajectory.time_scale * factor)
    return replace(trajectory, times=trajectory.times / factor, time_scale=trajectory.time_scale / factor)
