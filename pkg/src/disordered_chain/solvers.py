"""Diffusion coefficient by the resolvent Green-Kubo route and by the
variational formula; explicit solution of ``S J = j^A``; block variances.

Everything is computed on ring samples: the translation sum of the single-bond
current is the summed current on the ring, so one solve per disorder sample
replaces the sum over translates.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chain import DisorderField, hopping_matrix
from .config import ModelParams, SolverConfig
from .quadratic import (
    QuadraticObservable,
    SupportError,
    _ensemble,
    a_action,
    a_operator_sparse,
    box_sites,
    h_minus_one_solve,
    inner_gibbs,
    l_action,
    ring_inverse,
    s_action,
    s_operator_sparse,
    summed_current,
)

# ---------------------------------------------------------------------------
# Green-Kubo resolvent


@dataclass(frozen=True)
class ResolventResult:
    z: float
    h: np.ndarray
    kappa: float
    residual: float
    iterations: int


_L_CACHE: dict = {}


def generator_sparse(params: ModelParams, disorder: DisorderField) -> sp.csr_matrix:
    key = (disorder.masses.tobytes(), params.gamma, params.lam)
    if key not in _L_CACHE:
        if len(_L_CACHE) > 8:
            _L_CACHE.clear()
        _L_CACHE[key] = (a_operator_sparse(disorder) + s_operator_sparse(disorder.n, params)).tocsr()
    return _L_CACHE[key]


def green_kubo_resolvent(z: float, params: ModelParams, disorder: DisorderField, rtol: float = 1e-12, residual_tol: float = 1e-10) -> ResolventResult:
    """Solve ``(z - L) h = J`` for the summed hamiltonian current.

    GMRES with an incomplete-LU preconditioner; the returned ``kappa`` is
    ``lam + <J, h>_1 / (2 n)``.
    """
    if not z > 0:
        raise ValueError("z must be positive")
    params.require_positive_noise()
    n = disorder.n
    lop = generator_sparse(params, disorder)
    mat = (z * sp.identity(n * n, format="csr") - lop).tocsc()
    rhs = summed_current(disorder).ravel()
    ilu = spla.spilu(mat, drop_tol=1e-8, fill_factor=30)
    pre = spla.LinearOperator(mat.shape, matvec=ilu.solve, dtype=float)
    count = {"k": 0}

    def cb(_):
        count["k"] += 1

    x0 = ilu.solve(rhs)
    sol, info = spla.gmres(mat, rhs, x0=x0, M=pre, rtol=rtol, atol=0.0, restart=100, maxiter=50, callback=cb, callback_type="pr_norm")
    res = float(np.linalg.norm(mat @ sol - rhs) / np.linalg.norm(rhs))
    if res > residual_tol:
        raise RuntimeError(f"GMRES residual {res:.3e} above {residual_tol:.1e} at z={z} (info={info})")
    h = sol.reshape(n, n)
    kappa = params.lam + inner_gibbs(summed_current(disorder), h, 1.0) / (2 * n)
    return ResolventResult(float(z), h, float(kappa), res, count["k"])


def green_kubo_direct(z: float, params: ModelParams, disorder: DisorderField) -> float:
    """Sparse direct solve of the same resolvent equation (reference route)."""
    n = disorder.n
    mat = (z * sp.identity(n * n, format="csc") - generator_sparse(params, disorder)).tocsc()
    j = summed_current(disorder)
    h = spla.spsolve(mat, j.ravel()).reshape(n, n)
    return float(params.lam + inner_gibbs(j, h, 1.0) / (2 * n))


def green_kubo_zero(params: ModelParams, disorder: DisorderField) -> float:
    """``lam + <J, (-L)^{-1} J> / (2n)`` on the ring, with the energy kernel removed.

    ``J`` is orthogonal to the conserved energy, so the singular system is
    solved on the complement by bordering with the kernel vector.
    """
    n = disorder.n
    lop = generator_sparse(params, disorder)
    e = np.eye(n).ravel() / np.sqrt(n)
    col = sp.csc_matrix(e[:, None])
    bordered = sp.bmat([[-lop, col], [col.T, None]], format="csc")
    j = summed_current(disorder)
    rhs = np.append(j.ravel(), 0.0)
    sol = spla.spsolve(bordered, rhs)
    h = sol[:-1].reshape(n, n)
    return float(params.lam + inner_gibbs(j, h, 1.0) / (2 * n))


@dataclass(frozen=True)
class Extrapolation:
    value: float
    uncertainty: float
    monotone_tail: bool
    gaps: np.ndarray


def extrapolate_z(z_grid: Sequence[float], kappa: Sequence[float], tail_tol: float = 1e-9) -> Extrapolation:
    """Linear Richardson step through the two smallest ``z``.

    Uncertainty is the last successive gap of the series.
    """
    z = np.asarray(z_grid, dtype=float)
    k = np.asarray(kappa, dtype=float)
    if z.size < 3 or z.size != k.size:
        raise ValueError("need at least 3 matching z points")
    order = np.argsort(-z)
    z, k = z[order], k[order]
    ratios = z[1:] / z[:-1]
    if np.any(ratios >= 1):
        raise ValueError("z grid must be strictly decreasing")
    gaps = np.abs(np.diff(k))
    value = k[-1] - z[-1] * (k[-2] - k[-1]) / (z[-2] - z[-1])
    d = np.diff(k[-3:])
    monotone = bool(np.all(d <= tail_tol * max(1.0, abs(k[-1]))) or np.all(d >= -tail_tol * max(1.0, abs(k[-1]))))
    return Extrapolation(float(value), float(gaps[-1]), monotone, gaps)


@dataclass(frozen=True)
class GreenKuboEnsemble:
    z_grid: np.ndarray
    kappa_samples: np.ndarray          # (samples, z)
    kappa_mean: np.ndarray
    kappa_sem: np.ndarray
    d_bar: float
    d_bar_gap: float
    d_bar_sem: float
    max_residual: float

    @property
    def uncertainty(self) -> float:
        return float(np.hypot(self.d_bar_gap, self.d_bar_sem))

    def relative_gaps(self) -> np.ndarray:
        k = self.kappa_mean
        return np.abs(np.diff(k)) / np.abs(k[1:])


def green_kubo_ensemble(params: ModelParams, disorder, z_grid: Sequence[float] = SolverConfig().z_grid, cfg: SolverConfig | None = None) -> GreenKuboEnsemble:
    cfg = cfg or SolverConfig()
    ens = _ensemble(disorder)
    z = np.asarray(sorted(z_grid, reverse=True), dtype=float)
    vals = np.empty((len(ens), z.size))
    res = 0.0
    for a, m in enumerate(ens):
        for b, zz in enumerate(z):
            out = green_kubo_resolvent(zz, params, m, cfg.krylov_rtol, cfg.residual_tol)
            vals[a, b] = out.kappa
            res = max(res, out.residual)
    mean = vals.mean(axis=0)
    sem = vals.std(axis=0, ddof=1) / np.sqrt(len(ens)) if len(ens) > 1 else np.zeros(z.size)
    ext = extrapolate_z(z, mean)
    per_sample = np.array([extrapolate_z(z, v).value for v in vals])
    d_sem = float(per_sample.std(ddof=1) / np.sqrt(len(ens))) if len(ens) > 1 else 0.0
    return GreenKuboEnsemble(z, vals, mean, sem, ext.value, ext.uncertainty, d_sem, res)


# ---------------------------------------------------------------------------
# variational formula


@dataclass(frozen=True)
class VariationalSample:
    value: float                 # inf of |||Sf|||^2 + |||j^A - Af|||^2
    empty_value: float           # same objective at f = 0
    minimizer: np.ndarray        # band matrix, translation sum of the optimal f
    iterations: int


@dataclass(frozen=True)
class VariationalResult:
    ell: int
    d_var: float
    d_var_lam2: float
    d_empty: float
    samples: tuple[VariationalSample, ...]
    form: str
    correctors: tuple[np.ndarray, ...] | None = None

    @property
    def d_samples(self) -> np.ndarray:
        return np.array([s.value for s in self.samples])


def band_mask(n: int, width: int) -> np.ndarray:
    """Entries with ring distance ``|i - j| <= width``."""
    i = np.arange(n)
    d = np.abs(i[:, None] - i[None, :])
    d = np.minimum(d, n - d)
    return d <= width


class _BandProblem:
    """Shared pieces of the band-restricted quadratic problems on one ring sample.

    Both problems have the normal operator ``H = -S - A (-S)^{-1} A`` (plus a
    rank-one scalar term), restricted to band matrices without trace.
    """

    def __init__(self, ell: int, params: ModelParams, m: DisorderField, rtol: float):
        self.n = m.n
        self.params = params
        self.rtol = rtol
        self.inv = ring_inverse(m.n, params)
        self.hop = hopping_matrix(m)
        self.j = summed_current(m)
        self.chi = 2.0
        self.mask = band_mask(m.n, 2 * ell)
        # the energy direction is a null direction of every objective
        self.eye_dir = np.eye(m.n) / np.sqrt(m.n)

    def project(self, q: np.ndarray) -> np.ndarray:
        q = 0.5 * (q + q.T) * self.mask
        return q - np.sum(q * self.eye_dir) * self.eye_dir

    def minus_s_inv(self, u: np.ndarray) -> np.ndarray:
        return self.inv.solve(u, check=False)

    def hess(self, q: np.ndarray, scalar: bool) -> np.ndarray:
        # A is skew in the trace pairing, so A^T K A = -A K A
        out = -s_action(q, self.params) - a_action(self.minus_s_inv(a_action(q, self.hop)), self.hop)
        if scalar:
            out = out + (2.0 / (self.n * self.params.lam * self.chi)) * np.sum(q * self.j) * self.j
        return out

    def solve(self, rhs: np.ndarray, scalar: bool) -> tuple[np.ndarray, int]:
        n = self.n
        size = n * n
        op = spla.LinearOperator(
            (size, size), matvec=lambda v: self.project(self.hess(self.project(v.reshape(n, n)), scalar)).ravel(), dtype=float
        )
        count = {"k": 0}

        def cb(_):
            count["k"] += 1

        sol, info = spla.cg(op, self.project(rhs).ravel(), rtol=self.rtol, atol=0.0, maxiter=10 * size, callback=cb)
        if info != 0:
            raise RuntimeError(f"band CG did not converge (info={info})")
        return self.project(sol.reshape(n, n)), count["k"]

    def scalar_part(self, q: np.ndarray) -> float:
        """``<<A f>>**`` for the observable whose translation sum is ``q``."""
        return inner_gibbs(q, self.j, 1.0) / self.n

    def dual_norm(self, u: np.ndarray) -> float:
        return inner_gibbs(u, self.minus_s_inv(u), 1.0) / self.n


def _variational_sample(ell: int, params: ModelParams, m: DisorderField, form: str, rtol: float) -> VariationalSample:
    prob = _BandProblem(ell, params, m, rtol)
    hop, j = prob.hop, prob.j
    scalar = form == "seminorm"
    # gradient of the objective at 0 (up to factors): A^T (-S)^{-1} J = -A (-S)^{-1} J
    q, its = prob.solve(-a_action(prob.minus_s_inv(j), hop), scalar)

    def objective(qq: np.ndarray) -> float:
        val = inner_gibbs(qq, -s_action(qq, params), 1.0) / prob.n + prob.dual_norm(j - a_action(qq, hop))
        if scalar:
            # scalar direction: <<j^A - Af>>** = -<<f, j^A>>*
            val += prob.scalar_part(qq) ** 2 / (params.lam * prob.chi)
        return float(val)

    return VariationalSample(objective(q), objective(np.zeros((prob.n, prob.n))), q, its)


def remainder_seminorm(q: np.ndarray, d_coef: float, params: ModelParams, m: DisorderField) -> float:
    """``|||j - D grad - L f|||^2`` for the observable whose translation sum is ``q``.

    The gradient has no translation sum; it enters through the scalar part
    ``<<grad>>** = chi`` only.
    """
    prob = _BandProblem(1, params, m, 1e-12)
    resid = prob.j - l_action(q, m, params)
    ss = (params.lam - d_coef) * prob.chi - prob.scalar_part(q)
    return float(prob.dual_norm(resid) + ss**2 / (params.lam * prob.chi))


def _corrector_sample(ell: int, params: ModelParams, m: DisorderField, d_coef: float, rtol: float) -> np.ndarray:
    # least squares for j - D grad = L f: normal operator L^* K L = H, right side L^* K J
    prob = _BandProblem(ell, params, m, rtol)
    kj = prob.minus_s_inv(prob.j)
    rhs = s_action(kj, params) - a_action(kj, prob.hop)
    c0 = (params.lam - d_coef) * prob.chi
    # scalar part of the remainder is c0 - <<Af>>**
    rhs = rhs + c0 * prob.j / (params.lam * prob.chi)
    q, _ = prob.solve(rhs, True)
    return q


def variational_D(
    ell: int, params: ModelParams, disorder, form: str = "seminorm", rtol: float = 1e-10, correctors: bool = False
) -> VariationalResult:
    """Upper bound ``lam + inf_f {...} / chi`` over band observables of radius ``ell``.

    ``form='seminorm'`` uses the CLT seminorm of each term, ``form='definition'``
    the star-product sup form; they agree in the infinite-volume limit.
    With ``correctors=True`` each sample also carries the band minimizer of
    ``|||j - D grad - L f|||`` at the computed ``D`` (the function entering the
    block variance of the fluctuation-dissipation remainder).
    """
    if form not in ("seminorm", "definition"):
        raise ValueError(f"unknown form {form!r}")
    params.require_positive_noise()
    ens = _ensemble(disorder)
    for m in ens:
        if ell > m.n / 4:
            raise SupportError(f"support radius {ell} exceeds n/4 = {m.n / 4}")
    samples = tuple(_variational_sample(ell, params, m, form, rtol) for m in ens)
    chi = 2.0
    v = float(np.mean([s.value for s in samples]))
    v0 = float(np.mean([s.empty_value for s in samples]))
    d_var = params.lam + v / chi
    fix = tuple(_corrector_sample(ell, params, m, d_var, rtol) for m in ens) if correctors else None
    return VariationalResult(ell, d_var, params.lam**2 + v / chi, params.lam + v0 / chi, samples, form, fix)


# ---------------------------------------------------------------------------
# explicit solution of S J = j^A


def r_of_xi(xi, params: ModelParams) -> np.ndarray:
    """Decaying root ``r(xi)`` of the bulk recurrence, singularity-free form."""
    params.require_positive_noise()
    alpha = (params.lam + params.gamma) / params.lam
    xi = np.asarray(xi, dtype=float)
    c = np.cos(np.pi * xi)
    return np.exp(-1j * np.pi * xi) * c / (alpha * (1.0 + np.sqrt(1.0 - (c / alpha) ** 2)))


def r_of_xi_printed(xi, params: ModelParams) -> np.ndarray:
    """Original closed form ``(alpha e^{-i pi xi}/cos)(1 - sqrt(1 - cos^2/alpha^2))``."""
    alpha = (params.lam + params.gamma) / params.lam
    xi = np.asarray(xi, dtype=float)
    c = np.cos(np.pi * xi)
    return alpha * np.exp(-1j * np.pi * xi) / c * (1.0 - np.sqrt(1.0 - c**2 / alpha**2))


def prefactor(xi, params: ModelParams, theta: float = 1.0) -> np.ndarray:
    """Amplitude fixed by the boundary equation of ``S J = j^A``."""
    r = r_of_xi(xi, params)
    e = np.exp(2j * np.pi * np.asarray(xi, dtype=float))
    return 2.0 * theta / (params.lam * (1.0 + e) * r - (4.0 * params.gamma + 2.0 * params.lam))


def prefactor_printed(xi, params: ModelParams, theta: float = 1.0) -> np.ndarray:
    r = r_of_xi(xi, params)
    return theta / (params.gamma * r + params.lam * (1.0 + np.exp(-2j * np.pi * np.asarray(xi, dtype=float))))


@dataclass(frozen=True)
class FourierSolution:
    grid: np.ndarray          # xi values j/n
    phi_hat: np.ndarray       # (k_max, n) complex, row k-1
    phi: np.ndarray           # (k_max, n) real, phi[k-1, x]

    @property
    def k_max(self) -> int:
        return self.phi.shape[0]


def fourier_closed_form(params: ModelParams, k_max: int, grid: int, theta: float = 1.0) -> FourierSolution:
    """``phi_k(x)`` on a ring of ``grid`` sites from the Fourier closed form.

    ``phi_hat_k(xi) = c(xi) r(xi)^{k-1}`` with ``phi_hat(xi) = sum_x phi(x) e^{2 i pi x xi}``.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if not k_max < grid / 2:
        raise ValueError(f"grid of {grid} points too coarse for k_max={k_max}; need k_max < grid/2")
    xi = np.arange(grid) / grid
    r = r_of_xi(xi, params)
    c = prefactor(xi, params, theta)
    powers = r[None, :] ** np.arange(k_max)[:, None]
    phi_hat = c[None, :] * powers
    # inverse transform: phi(x) = (1/n) sum_j phi_hat(j/n) e^{-2 i pi x j/n}
    phi = np.fft.fft(phi_hat, axis=1) / grid
    return FourierSolution(xi, phi_hat, phi.real.copy())


def recurrence_residual(xi, k, params: ModelParams) -> np.ndarray:
    """Residual of the second-order recurrence for the closed form at ``(xi, k)``."""
    xi = np.asarray(xi, dtype=float)
    k = np.asarray(k)
    alpha = (params.lam + params.gamma) / params.lam
    r = r_of_xi(xi, params)
    c = prefactor(xi, params)
    ph = lambda kk: c * r ** (kk - 1)
    lhs = ph(k + 1) - 2.0 * alpha * np.exp(-1j * np.pi * xi) / np.cos(np.pi * xi) * ph(k) + np.exp(-2j * np.pi * xi) * ph(k - 1)
    # scale-free residual
    return np.abs(lhs) / np.maximum(np.abs(ph(k - 1)), 1e-300)


def truncated_current(sol: FourierSolution, n: int) -> np.ndarray:
    """Matrix of ``sum_{x, k <= k_max} phi_k(x) omega_x omega_{x+k}``."""
    if sol.phi.shape[1] != n:
        raise ValueError("ring size must match the Fourier grid")
    q = np.zeros((n, n))
    x = np.arange(n)
    for k in range(1, sol.k_max + 1):
        q[x, (x + k) % n] += 0.5 * sol.phi[k - 1]
        q[(x + k) % n, x] += 0.5 * sol.phi[k - 1]
    return q


@dataclass(frozen=True)
class SJReport:
    residual: float
    boundary_residual: float
    bulk_residual: float
    printed_boundary_residual: float


def verify_SJ_equals_jA(params: ModelParams, k_max: int, n: int) -> SJReport:
    """Relative Gibbs-norm residual of ``S J_trunc - j^A`` with unit masses."""
    sol = fourier_closed_form(params, k_max, n)
    q = truncated_current(sol, n)
    ja = np.zeros((n, n))
    ja[0, 1] = ja[1, 0] = 1.0
    diff = s_action(q, params) - ja
    res = np.sqrt(inner_gibbs(diff, diff) / inner_gibbs(ja, ja))
    lam, gam = params.lam, params.gamma
    phi = sol.phi
    delta = np.zeros(n)
    delta[0] = 1.0
    bnd = np.zeros(n)
    prt = np.zeros(n)
    bulk = 0.0
    if k_max >= 2:
        p1, p2 = phi[0], phi[1]
        bnd = (4 * gam + 2 * lam) * p1 - lam * (p2 + np.roll(p2, 1)) + 2.0 * delta
        prt = (lam + 2 * gam) * p1 - lam * (p2 + np.roll(p2, 1)) - delta
        for k in range(2, k_max):
            eq = lam * (phi[k] + np.roll(phi[k], 1) + phi[k - 2] + np.roll(phi[k - 2], -1)) - 4 * (lam + gam) * phi[k - 1]
            bulk = max(bulk, float(np.max(np.abs(eq))))
    return SJReport(float(res), float(np.max(np.abs(bnd))), bulk, float(np.max(np.abs(prt))))


def flip_eigenvalue_on_current(disorder: DisorderField) -> float:
    """Ratio ``S^flip(j^A) / j^A``; the site-summed flip gives ``-4``."""
    from .quadratic import flip_action

    q = np.zeros((disorder.n, disorder.n))
    c = disorder.coupling()
    q[0, 1] = q[1, 0] = c[0]
    out = flip_action(q)
    return float(out[0, 1] / q[0, 1])


# ---------------------------------------------------------------------------
# block variance of the fluctuation-dissipation remainder


def band_pieces(q: np.ndarray, s: int) -> dict[int, np.ndarray]:
    """Split a band matrix of width ``2s`` into local pieces.

    Piece ``R_y`` keeps entries ``(y, y+d)``, ``0 <= d <= 2s``, symmetrized;
    it is centered at ``y + s`` and the pieces sum to ``q``.
    """
    n = q.shape[0]
    pieces = {}
    for y in range(n):
        p = np.zeros((n, n))
        for d in range(0, 2 * s + 1):
            b = (y + d) % n
            if d == 0:
                p[y, y] = q[y, y]
            else:
                p[y, b] = p[b, y] = q[y, b]
        centre = y + s
        centre = centre - n if centre > n // 2 else centre
        pieces[centre] = p
    return pieces


def w_matrix(ell: int, d_coef: float, params: ModelParams, disorder: DisorderField, minimizer: np.ndarray | None, s: int) -> np.ndarray:
    """Matrix of ``W^{f,ell}`` inside the box of radius ``ell``.

    Box-measurable bonds ``y in -(ell-1)..(ell-1)`` carry the current and the
    gradient average; the fluctuation part averages ``L`` of the pieces of
    ``f`` centered in ``-(ell-s-1)..(ell-s-1)``.
    """
    n = disorder.n
    if 2 * ell + 2 > n:
        raise SupportError(f"ring of size {n} too small for box radius {ell}")
    c = disorder.coupling()
    w = np.zeros((n, n))
    bonds = range(-(ell - 1), ell)
    for y in bonds:
        a, b = y % n, (y + 1) % n
        w[a, b] += c[a] / len(bonds)
        w[b, a] += c[a] / len(bonds)
        coef = (params.lam - d_coef) / len(bonds)
        w[b, b] += coef
        w[a, a] -= coef
    if minimizer is not None:
        reach = ell - s - 1
        if reach < 0:
            raise SupportError(f"box radius {ell} too small for support {s}")
        pieces = band_pieces(minimizer, s)
        acc = np.zeros((n, n))
        for centre in range(-reach, reach + 1):
            acc += l_action(pieces[centre], disorder, params)
        w -= acc / (2 * reach + 1)
    idx = box_sites(ell, n)
    outside = np.ones(n, dtype=bool)
    outside[idx] = False
    if np.any(np.abs(w[outside]) > 1e-14) or np.any(np.abs(w[:, outside]) > 1e-14):
        raise SupportError("W leaks outside the box")
    return w


def w_f_ell_variance(ell: int, params: ModelParams, disorder, d_coef: float, minimizers: Sequence[np.ndarray] | None = None, s: int = 0) -> float:
    """``2 ell E[<(-S_box)^{-1} W, W>]`` averaged over the disorder samples."""
    ens = _ensemble(disorder)
    vals = []
    for a, m in enumerate(ens):
        q = None if minimizers is None else minimizers[a]
        w = w_matrix(ell, d_coef, params, m, q, s)
        vals.append(2 * ell * h_minus_one_solve(w, ell, params).value)
    return float(np.mean(vals))
