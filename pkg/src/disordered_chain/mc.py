"""Monte-Carlo routes to the diffusion coefficient.

Three estimators along stationary trajectories: the Laplace transform of the
space-summed hamiltonian current autocorrelation, the decay of long-wave
energy modes, and the time-variance bound for additive functionals. All
uncertainties come from bootstrap resampling over independent replicas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.optimize as so
import scipy.signal as ss
import scipy.stats as st

from .chain import DisorderField, sample_disorder, sample_gibbs
from .config import ModelParams, rng_for
from .dynamics import Trajectory, simulate
from .quadratic import QuadraticObservable, _ensemble, ring_inverse

N_BOOTSTRAP = 1000


class InsufficientReplicasError(RuntimeError):
    """The replica budget cannot deliver the requested relative error."""


class FitError(RuntimeError):
    """Mode autocovariances do not decay."""


def _bootstrap_se(values: np.ndarray, seed: int, statistic=np.mean) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        return float("nan")
    res = st.bootstrap(
        (values,), statistic, n_resamples=N_BOOTSTRAP, vectorized=False, method="percentile",
        random_state=rng_for(seed, 0, "bootstrap"),
    )
    return float(res.standard_error)


def lagged_products(x: np.ndarray, y: np.ndarray, max_lag: int, stride: int = 1) -> np.ndarray:
    """``mean_i x[i + k] * conj(y[i])`` over shared origins, ``k = 0..max_lag``.

    Every lag uses the same origins ``i = 0, stride, ..`` below ``len - max_lag``.
    """
    m = x.shape[0]
    if max_lag >= m:
        raise ValueError(f"series of length {m} too short for lag {max_lag}")
    origins = np.arange(0, m - max_lag, stride)
    if stride == 1:
        # y[:m-max_lag] correlated against x via FFT
        full = ss.correlate(x, y[: m - max_lag], mode="valid", method="fft")
        return full[: max_lag + 1] / origins.size
    out = np.empty(max_lag + 1, dtype=np.result_type(x, y))
    for k in range(max_lag + 1):
        out[k] = np.mean(x[origins + k] * np.conj(y[origins]))
    return out


# ---------------------------------------------------------------------------
# current autocorrelation


@dataclass(frozen=True)
class CurrentACFResult:
    kappa: float
    error: float
    z: float
    t_max: float
    lags: np.ndarray
    acf: np.ndarray              # replica-averaged (1/N) <J(t) J(0)>
    per_replica: np.ndarray      # Laplace integrals per replica


def _summed_hamiltonian_current(omega: np.ndarray, coupling: np.ndarray) -> np.ndarray:
    return 2.0 * np.sum(coupling * omega * np.roll(omega, -1, axis=-1), axis=-1)


def current_acf_green_kubo(
    params: ModelParams,
    disorder,
    t_max: float,
    z: float,
    replicas: int,
    seed: int = 0,
    dt_obs: float = 0.02,
    t_run: float | None = None,
    surrogate: bool = False,
    target_rel_error: float | None = None,
    dt_max: float = 1e-2,
    energy_rescale: bool = True,
) -> CurrentACFResult:
    """``lam + (1/2) int_0^t_max e^{-zt} (1/N) E[J^A(t) J^A(0)] dt`` from simulation.

    ``J^A`` is the summed hamiltonian current. Time origins overlap along each
    trajectory of length ``t_run``; replica ``r`` uses disorder sample
    ``r mod len(ensemble)``. ``surrogate=True`` pairs each origin with a
    shuffled one, which destroys all correlations.

    The dynamics commutes with ``omega -> s omega`` and conserves energy, so a
    replica at energy density ``e`` samples ``e^2`` times the unit-energy
    correlation. With ``energy_rescale`` each replica is divided by its
    ``e^2`` and the mean multiplied by the Gibbs value ``E[e^2]``; this is
    unbiased and removes the energy spread from the error.
    """
    if replicas < 1:
        raise InsufficientReplicasError("at least one replica is needed")
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    if t_max == 0:
        return CurrentACFResult(params.lam, 0.0, z, 0.0, np.zeros(1), np.zeros(1), np.zeros(replicas))
    ens = _ensemble(disorder)
    n = params.n
    if any(m.n != n for m in ens):
        raise ValueError("disorder size does not match params.n")
    max_lag = int(round(t_max / dt_obs))
    t_run = 4.0 * t_max if t_run is None else t_run
    if t_run <= t_max:
        raise ValueError("t_run must exceed t_max")
    grid = np.arange(0.0, t_run + 0.5 * dt_obs, dt_obs)
    lags = np.arange(max_lag + 1) * dt_obs
    weights = np.exp(-z * lags)
    integrals = np.empty(replicas)
    acfs = np.empty((replicas, max_lag + 1))
    for r in range(replicas):
        m = ens[r % len(ens)]
        initial = sample_gibbs(params, seed, replica=r)
        traj = simulate(params, m, initial, float(grid[-1]), seed, obs_grid=grid, dt_max=dt_max, replica=r)
        cur = _summed_hamiltonian_current(traj.omega, m.coupling())
        if surrogate:
            y = cur.copy()
            rng_for(seed, r, "bootstrap").shuffle(y)
        else:
            y = cur
        c = lagged_products(cur, y, max_lag) / n
        if energy_rescale:
            e = float(np.mean(initial.omega**2))
            c = c * (1.0 + 2.0 / n) / (params.beta**2 * e**2)
        acfs[r] = c
        integrals[r] = 0.5 * np.trapezoid(weights * c, lags)
    kappa = params.lam + float(np.mean(integrals))
    err = _bootstrap_se(integrals, seed) if replicas > 1 else float("inf")
    if target_rel_error is not None and not err <= target_rel_error * abs(kappa):
        raise InsufficientReplicasError(
            f"{replicas} replicas give relative error {err / abs(kappa):.3g} > {target_rel_error}"
        )
    return CurrentACFResult(kappa, err, z, t_max, lags, acfs.mean(axis=0), integrals)


# ---------------------------------------------------------------------------
# energy fluctuation field


def sine_test_function(k: int) -> Callable[[np.ndarray], np.ndarray]:
    """``e_k(u) = sqrt(2) sin(pi k u)``."""
    return lambda u: np.sqrt(2.0) * np.sin(np.pi * k * np.asarray(u))


def fluctuation_field(trajectory: Trajectory, test_function, beta: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``(1/sqrt N) sum_x H(x/N) (omega_x^2 - 1/beta)`` on the observation grid.

    ``test_function`` is a callable on ``[0, 1)`` or its samples at ``x/N``.
    Returns ``(diffusive times, field values)``.
    """
    n = trajectory.n
    if callable(test_function):
        h = np.asarray(test_function(np.arange(n) / n), dtype=float)
    else:
        h = np.asarray(test_function, dtype=float)
    if h.shape != (n,):
        raise ValueError(f"test function sampled on {h.shape}, trajectory has {n} sites")
    y = (trajectory.omega**2 - 1.0 / beta) @ h / np.sqrt(n)
    # physical clock unless the trajectory was already relabeled
    times = trajectory.times / n**2 if trajectory.time_scale == 1.0 else trajectory.times
    return times, y


def energy_modes(omega: np.ndarray, modes: Sequence[int], beta: float = 1.0) -> np.ndarray:
    """Complex modes ``(1/sqrt N) sum_x e^{-2 pi i k x / N} (omega_x^2 - 1/beta)``, shape ``(T, K)``."""
    n = omega.shape[-1]
    x = np.arange(n)
    phase = np.exp(-2j * np.pi * np.outer(x, np.asarray(modes)) / n)
    return (omega**2 - 1.0 / beta) @ phase / np.sqrt(n)


# ---------------------------------------------------------------------------
# mode decay


@dataclass(frozen=True)
class ModeDecayResult:
    d_mc: float
    ci: tuple[float, float]
    error: float
    modes: tuple[int, ...]
    lags: np.ndarray
    acf: np.ndarray             # normalized, shape (K, lags)
    acf_err: np.ndarray
    acf0: np.ndarray            # unnormalized autocovariance at lag 0 per mode
    rates: np.ndarray           # per-mode fitted decay rates


def wavenumbers(modes: Sequence[int], n: int) -> np.ndarray:
    return 2.0 * np.pi * np.asarray(modes, dtype=float) / n


def fit_mode_decay(lags: np.ndarray, acf: np.ndarray, q: np.ndarray, sigma: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Joint least-squares fit of ``exp(-D q_k^2 t)``; returns ``(D, per-mode rates)``."""
    lags = np.asarray(lags, dtype=float)
    acf = np.asarray(acf, dtype=float)
    qq = np.repeat((q**2)[:, None], lags.size, axis=1).ravel()
    tt = np.tile(lags, q.size)
    yy = acf.ravel()
    sg = None if sigma is None else np.maximum(np.asarray(sigma, dtype=float).ravel(), 1e-3)
    if not np.any(yy[tt > 0] < 0.95):
        raise FitError("autocovariances do not decay on the lag grid")

    def model(_, d):
        return np.exp(-d * qq * tt)

    guess = max(1e-6, -np.log(np.clip(acf[:, -1], 1e-3, 0.999)).mean() / (np.mean(q**2) * lags[-1]))
    try:
        popt, _ = so.curve_fit(model, tt, yy, p0=[guess], sigma=sg, bounds=(0.0, np.inf))
    except RuntimeError as exc:
        raise FitError(str(exc)) from exc
    rates = np.empty(q.size)
    for i in range(q.size):
        try:
            pi, _ = so.curve_fit(lambda t, a: np.exp(-a * t), lags, acf[i], p0=[popt[0] * q[i] ** 2], bounds=(0.0, np.inf))
            rates[i] = pi[0]
        except RuntimeError:
            rates[i] = np.nan
    return float(popt[0]), rates


def default_lag_grid(n: int, modes: Sequence[int], d_guess: float = 1.0, points: int = 16) -> np.ndarray:
    """Geometric lags up to one decay time of the slowest mode."""
    q_min = wavenumbers([min(modes)], n)[0]
    t_top = 1.0 / (d_guess * q_min**2)
    return np.unique(np.concatenate([[0.0], np.geomspace(1.0, t_top, points)]))


def mode_acf_replica(
    params: ModelParams, m: DisorderField, modes: Sequence[int], t_run: float, dt_obs: float, max_lag: int, seed: int, replica: int
) -> np.ndarray:
    """Real part of ``<Y_k(t) conj Y_k(0)>`` for one stationary trajectory, shape ``(K, max_lag+1)``."""
    grid = np.arange(0.0, t_run + 0.5 * dt_obs, dt_obs)
    traj = simulate(params, m, sample_gibbs(params, seed, replica), float(grid[-1]), seed, obs_grid=grid, replica=replica)
    ym = energy_modes(traj.omega, modes, params.beta)
    return np.array([lagged_products(ym[:, i], ym[:, i], max_lag).real for i in range(len(modes))])


def mode_decay_fit(
    params: ModelParams,
    disorder,
    modes: Sequence[int],
    t_grid: Sequence[float] | None,
    replicas: int,
    seed: int = 0,
    t_run: float | None = None,
    dt_obs: float = 0.5,
    confidence: float = 0.95,
) -> ModeDecayResult:
    """Fit ``exp(-D (2 pi k / N)^2 t)`` to normalized energy-mode autocovariances.

    ``t_grid`` holds the physical-time lags used in the fit (snapped to the
    observation step). The confidence interval and error resample replicas.
    """
    n = params.n
    modes = tuple(int(k) for k in modes)
    if any(k < 1 or k > n // 8 for k in modes):
        raise ValueError(f"modes must lie in 1..{n // 8}")
    if replicas < 2:
        raise InsufficientReplicasError("the fit needs at least two replicas for its error")
    ens = _ensemble(disorder)
    lags_req = default_lag_grid(n, modes) if t_grid is None or len(t_grid) == 0 else np.asarray(t_grid, dtype=float)
    idx = np.unique(np.round(lags_req / dt_obs).astype(int))
    max_lag = int(idx[-1])
    t_run = 10.0 * max_lag * dt_obs if t_run is None else t_run
    raw = np.array([
        mode_acf_replica(params, ens[r % len(ens)], modes, t_run, dt_obs, max_lag, seed, r)[:, idx] for r in range(replicas)
    ])
    lags = idx * dt_obs
    q = wavenumbers(modes, n)

    def norm_acf(sample: np.ndarray) -> np.ndarray:
        mean = sample.mean(axis=0)
        return mean / mean[:, :1]

    acf = norm_acf(raw)
    rng = rng_for(seed, 0, "bootstrap")
    boots = []
    boot_acf = []
    for _ in range(200):
        pick = rng.integers(0, replicas, size=replicas)
        a = norm_acf(raw[pick])
        boot_acf.append(a)
    boot_acf = np.array(boot_acf)
    acf_err = boot_acf.std(axis=0, ddof=1)
    d, rates = fit_mode_decay(lags, acf, q, acf_err)
    for a in boot_acf:
        try:
            boots.append(fit_mode_decay(lags, a, q, acf_err)[0])
        except FitError:
            continue
    boots = np.array(boots)
    alpha = 0.5 * (1 - confidence)
    ci = (float(np.quantile(boots, alpha)), float(np.quantile(boots, 1 - alpha)))
    return ModeDecayResult(d, ci, float(boots.std(ddof=1)), modes, lags, acf, acf_err, raw.mean(axis=0)[:, 0], rates)


def synthetic_ou_modes(d0: float, modes: Sequence[int], n: int, t_run: float, dt_obs: float, replicas: int, chi: float, seed: int) -> np.ndarray:
    """Exact complex OU paths with rates ``d0 q_k^2`` and stationary variance ``chi``; shape ``(R, T, K)``."""
    q = wavenumbers(modes, n)
    rate = d0 * q**2
    steps = int(round(t_run / dt_obs)) + 1
    rho = np.exp(-rate * dt_obs)
    out = np.empty((replicas, steps, len(modes)), dtype=complex)
    for r in range(replicas):
        rng = rng_for(seed, r, "gibbs")
        noise = (rng.standard_normal((steps, len(modes))) + 1j * rng.standard_normal((steps, len(modes)))) * np.sqrt(chi / 2)
        y = noise[0].copy()
        out[r, 0] = y
        amp = np.sqrt(1 - rho**2)
        for t in range(1, steps):
            y = rho * y + amp * noise[t]
            out[r, t] = y
    return out


def fit_synthetic(paths: np.ndarray, modes: Sequence[int], n: int, lags_idx: np.ndarray, dt_obs: float) -> tuple[float, np.ndarray]:
    """Fit of the mode-decay model on precomputed complex paths ``(R, T, K)``."""
    max_lag = int(lags_idx[-1])
    raw = np.array([
        [lagged_products(p[:, i], p[:, i], max_lag).real[lags_idx] for i in range(p.shape[1])] for p in paths
    ])
    mean = raw.mean(axis=0)
    return fit_mode_decay(lags_idx * dt_obs, mean / mean[:, :1], wavenumbers(modes, n))


# ---------------------------------------------------------------------------
# time-variance bound for additive functionals


@dataclass(frozen=True)
class KVReport:
    lhs: float
    lhs_error: float
    rhs: float
    h_minus_one: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 3.0 * self.lhs_error

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def ring_h_minus_one(q: np.ndarray, params: ModelParams) -> float:
    """``<V, (-S)^{-1} V>_beta`` on the ring for a centered quadratic ``V``."""
    q = np.asarray(q, dtype=float)
    if not np.any(q):
        return 0.0
    g = ring_inverse(q.shape[0], params).solve(q, check=True)
    return float(2.0 / params.beta**2 * np.sum(q * g))


def _quadratic_series(omega: np.ndarray, q: np.ndarray, beta: float) -> np.ndarray:
    return np.einsum("ti,ij,tj->t", omega, q, omega) - np.trace(q) / beta


def kipnis_varadhan_check(
    V,
    params: ModelParams,
    T: float,
    replicas: int,
    disorder: DisorderField | None = None,
    seed: int = 0,
    dt_obs: float = 0.01,
) -> KVReport:
    """``E[sup_{t<=T} (int_0^t V)^2]`` by simulation against ``24 T ||V||_{-1}^2``.

    ``V`` is a ``QuadraticObservable`` or its ring matrix; trajectories start
    from the Gibbs measure. The running integral uses the trapezoid rule.
    """
    m = DisorderField.ordered(params.n) if disorder is None else disorder
    q = V.realize(m) if isinstance(V, QuadraticObservable) else np.asarray(V, dtype=float)
    if q.shape != (params.n, params.n):
        raise ValueError("observable size does not match params.n")
    norm = ring_h_minus_one(q, params)
    rhs = 24.0 * T * norm
    if not np.any(q):
        return KVReport(0.0, 0.0, 0.0, 0.0)
    grid = np.arange(0.0, T + 0.5 * dt_obs, dt_obs)
    sups = np.empty(replicas)
    for r in range(replicas):
        traj = simulate(params, m, sample_gibbs(params, seed, r), float(grid[-1]), seed, obs_grid=grid, replica=r)
        v = _quadratic_series(traj.omega, q, params.beta)
        running = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(grid))])
        sups[r] = np.max(running**2)
    err = _bootstrap_se(sups, seed) if replicas > 1 else float("inf")
    return KVReport(float(sups.mean()), err, rhs, norm)


def stationary_current_mean(params: ModelParams, disorder: DisorderField, t_run: float, replicas: int, seed: int = 0) -> tuple[float, float]:
    """Replica mean and standard error of the bond-averaged current at stationarity."""
    vals = np.empty(replicas)
    c = disorder.coupling()
    for r in range(replicas):
        traj = simulate(params, disorder, sample_gibbs(params, seed, r), t_run, seed, replica=r)
        w = traj.omega[-1]
        right = np.roll(w, -1)
        vals[r] = np.mean(2 * c * w * right + params.lam * (right**2 - w**2))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(replicas))


def corrector_sup_scaling(
    params: ModelParams,
    f: QuadraticObservable,
    n_list: Sequence[int],
    t_diffusive: float,
    replicas: int,
    seed: int = 0,
    test_function=None,
    points: int = 200,
) -> tuple[np.ndarray, float]:
    """``E[sup_t (X(t) - X(0))^2]`` with ``X = N^{-3/2} sum_x grad_N H(x/N) tau_x f``.

    By Dynkin's formula ``X(t) - X(0)`` is the sum of the integrated
    ``L(tau_x f)`` term and its martingale. Returns the estimates for each
    ``N`` and the log-log slope; the expected order is ``N^{-2}``.
    """
    h = sine_test_function(1) if test_function is None else test_function
    est = np.empty(len(n_list))
    for a, n in enumerate(n_list):
        p = params.replace(n=int(n))
        m = DisorderField.ordered(n) if p.c_bound == 1.0 else None
        samples = []
        t_phys = t_diffusive * n**2
        grid = np.linspace(0.0, t_phys, points)
        for r in range(replicas):
            mr = m if m is not None else sample_disorder(p, seed, r)
            x = np.arange(n)
            grad_h = n * (np.asarray(h((x + 1) / n)) - np.asarray(h(x / n)))
            q = np.zeros((n, n))
            for y in range(n):
                q += grad_h[y] * f.translate(y).realize(mr)
            q /= n**1.5
            traj = simulate(p, mr, sample_gibbs(p, seed, r), t_phys, seed, obs_grid=grid, replica=r)
            xs = _quadratic_series(traj.omega, q, p.beta)
            samples.append(np.max((xs - xs[0]) ** 2))
        est[a] = np.mean(samples)
    slope = float(np.polyfit(np.log(np.asarray(n_list, dtype=float)), np.log(est), 1)[0])
    return est, slope
