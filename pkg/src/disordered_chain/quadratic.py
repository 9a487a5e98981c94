"""Operator calculus on mean-zero quadratic observables.

A quadratic observable is ``f(m, omega) = omega^T Q(m) omega - tr Q(m) / beta``
with ``Q`` symmetric. Generator actions are matrix maps, Gibbs expectations
follow from Wick's rule ``E[f g] = (2/beta^2) tr(Q_f Q_g)``.

Site indices are ring positions; a signed site ``x`` sits at ``x mod n``.
"""

from __future__ import annotations

import io
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chain import DisorderField, hopping_matrix, signed_sites
from .config import ModelParams, rng_for

Builder = Callable[[DisorderField], np.ndarray]

KERNEL_TOL = 1e-10


class SupportError(ValueError):
    """An observable does not fit the requested window or ring."""


class KernelComponentError(ValueError):
    """Right-hand side has a component along the conserved energy."""


# ---------------------------------------------------------------------------
# observables


@dataclass(eq=False)
class QuadraticObservable:
    """Disorder-to-matrix builder with a declared support radius.

    ``radius`` bounds the signed sites carrying nonzero coefficients,
    including the masses the builder reads.
    """

    builder: Builder
    radius: int
    name: str = "f"
    disorder_free: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def realize(self, disorder: DisorderField) -> np.ndarray:
        key = (disorder.n, None if self.disorder_free else disorder.masses.tobytes())
        q = self._cache.get(key)
        if q is None:
            q = np.asarray(self.builder(disorder), dtype=float)
            if q.shape != (disorder.n, disorder.n):
                raise ValueError(f"builder returned shape {q.shape} for ring size {disorder.n}")
            q = 0.5 * (q + q.T)
            q.setflags(write=False)
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = q
        return q

    def translate(self, y: int) -> "QuadraticObservable":
        """``tau_y f``: shifts both the matrix indices and the disorder."""
        base = self

        def build(m: DisorderField) -> np.ndarray:
            return np.roll(base.realize(m.shift(y)), (y, y), axis=(0, 1))

        return QuadraticObservable(build, self.radius + abs(int(y)), f"tau_{y}({self.name})", self.disorder_free)

    def value(self, omega: np.ndarray, disorder: DisorderField, beta: float = 1.0) -> np.ndarray:
        """Evaluate on one configuration or a stack of configurations."""
        q = self.realize(disorder)
        w = np.atleast_2d(omega)
        vals = np.einsum("ki,ij,kj->k", w, q, w) - np.trace(q) / beta
        return vals if np.ndim(omega) > 1 else vals[0]

    def _combine(self, other: "QuadraticObservable", a: float, b: float, name: str) -> "QuadraticObservable":
        left, right = self, other

        def build(m: DisorderField) -> np.ndarray:
            return a * left.realize(m) + b * right.realize(m)

        return QuadraticObservable(build, max(left.radius, right.radius), name, left.disorder_free and right.disorder_free)

    def __add__(self, other: "QuadraticObservable") -> "QuadraticObservable":
        return self._combine(other, 1.0, 1.0, f"({self.name}+{other.name})")

    def __sub__(self, other: "QuadraticObservable") -> "QuadraticObservable":
        return self._combine(other, 1.0, -1.0, f"({self.name}-{other.name})")

    def __mul__(self, scalar: float) -> "QuadraticObservable":
        base = self
        s = float(scalar)
        return QuadraticObservable(lambda m: s * base.realize(m), self.radius, f"{s}*{self.name}", self.disorder_free)

    __rmul__ = __mul__

    def __neg__(self) -> "QuadraticObservable":
        return self * -1.0


def map_observable(obs: QuadraticObservable, fn: Callable[[np.ndarray, DisorderField], np.ndarray], grow: int, name: str, uses_disorder: bool = False) -> QuadraticObservable:
    def build(m: DisorderField) -> np.ndarray:
        return fn(obs.realize(m), m)

    return QuadraticObservable(build, obs.radius + grow, name, obs.disorder_free and not uses_disorder)


def from_terms(terms: Iterable[tuple[int, int, float]], name: str = "f") -> QuadraticObservable:
    """Disorder-free observable ``sum c * omega_i omega_j`` (centered).

    A diagonal term ``(i, i, c)`` stands for ``c (omega_i^2 - 1/beta)``.
    """
    terms = [(int(i), int(j), float(c)) for i, j, c in terms]
    radius = max([max(abs(i), abs(j)) for i, j, _ in terms], default=0)

    def build(m: DisorderField) -> np.ndarray:
        q = np.zeros((m.n, m.n))
        for i, j, c in terms:
            a, b = i % m.n, j % m.n
            if a == b:
                q[a, a] += c
            else:
                q[a, b] += 0.5 * c
                q[b, a] += 0.5 * c
        return q

    return QuadraticObservable(build, radius, name, disorder_free=True)


def from_window(window: np.ndarray, name: str = "f") -> QuadraticObservable:
    """Disorder-free observable from a symmetric matrix on sites ``-s..s``."""
    window = np.asarray(window, dtype=float)
    size = window.shape[0]
    if window.shape != (size, size) or size % 2 == 0:
        raise ValueError("window must be square with odd size 2s+1")
    s = size // 2
    sym = 0.5 * (window + window.T)

    def build(m: DisorderField) -> np.ndarray:
        if m.n < size:
            raise SupportError("window larger than ring")
        q = np.zeros((m.n, m.n))
        idx = np.arange(-s, s + 1) % m.n
        q[np.ix_(idx, idx)] = sym
        return q

    return QuadraticObservable(build, s, name, disorder_free=True)


def site_energy(x: int = 0) -> QuadraticObservable:
    return from_terms([(x, x, 1.0)], f"omega_{x}^2")


def pair(x: int, y: int) -> QuadraticObservable:
    if x == y:
        raise ValueError("pair needs distinct sites; use site_energy")
    return from_terms([(x, y, 1.0)], f"omega_{x}omega_{y}")


def energy_gradient(x: int = 0) -> QuadraticObservable:
    """``omega_{x+1}^2 - omega_x^2``."""
    return from_terms([(x + 1, x + 1, 1.0), (x, x, -1.0)], f"grad_{x}")


def exchange_current(params: ModelParams, x: int = 0) -> QuadraticObservable:
    return params.lam * energy_gradient(x)


def hamiltonian_current(x: int = 0) -> QuadraticObservable:
    """``2 omega_x omega_{x+1} / sqrt(m_x m_{x+1})``."""

    def build(m: DisorderField) -> np.ndarray:
        q = np.zeros((m.n, m.n))
        a, b = x % m.n, (x + 1) % m.n
        c = 1.0 / np.sqrt(m.masses[a] * m.masses[b])
        q[a, b] = q[b, a] = c
        return q

    return QuadraticObservable(build, max(abs(x), abs(x + 1)), f"jA_{x}")


def total_energy() -> QuadraticObservable:
    return QuadraticObservable(lambda m: np.eye(m.n), 0, "energy", disorder_free=True)


def summed_current(disorder: DisorderField) -> np.ndarray:
    """Matrix of ``sum_x j^A_{x,x+1}``: band one, entries ``1/sqrt(m_x m_{x+1})``."""
    m = hopping_matrix(disorder)
    return np.abs(m)


def random_observable(seed: int, radius: int, disorder_weight: float = 0.0, index: int = 0, name: str = "rnd") -> QuadraticObservable:
    """I.i.d. standard normal coefficients on sites ``-radius..radius``.

    With ``disorder_weight > 0`` a second normal matrix is multiplied by the
    centered mass at site 0.
    """
    rng = rng_for(seed, index, "test_functions")
    size = 2 * radius + 1
    base = rng.standard_normal((size, size))
    base = 0.5 * (base + base.T)
    extra = rng.standard_normal((size, size))
    extra = 0.5 * (extra + extra.T)
    w = float(disorder_weight)

    def build(m: DisorderField) -> np.ndarray:
        window = base + w * (m.masses[0] - 1.0) * extra if w else base
        q = np.zeros((m.n, m.n))
        idx = np.arange(-radius, radius + 1) % m.n
        q[np.ix_(idx, idx)] = window
        return q

    return QuadraticObservable(build, radius, f"{name}{index}", disorder_free=(w == 0.0))


def support_radius(q: np.ndarray, tol: float = 0.0) -> int:
    """Largest ``|x|`` with a nonzero row in ``q`` (signed coordinates)."""
    rows = np.nonzero(np.any(np.abs(q) > tol, axis=1))[0]
    if rows.size == 0:
        return 0
    return int(np.max(np.abs(signed_sites(q.shape[0])[rows])))


# ---------------------------------------------------------------------------
# generator actions on matrices


def a_action(q: np.ndarray, hopping: np.ndarray) -> np.ndarray:
    """Liouville action: ``A f`` has matrix ``Q M - M Q``."""
    return q @ hopping - hopping @ q


def flip_action(q: np.ndarray, sites: Iterable[int] | None = None) -> np.ndarray:
    """``sum_x [f(omega^x) - f(omega)]`` over ``sites`` (all by default)."""
    n = q.shape[0]
    if sites is None:
        out = -4.0 * q
        out[np.diag_indices(n)] = 0.0
        return out
    mask = np.zeros(n)
    for x in sites:
        mask[x % n] += 1.0
    # entry (i, j), i != j, picks -2 for every flipped endpoint
    weight = mask[:, None] + mask[None, :]
    out = -2.0 * weight * q
    out[np.diag_indices(n)] = 0.0
    return out


def site_flip_action(q: np.ndarray, x: int) -> np.ndarray:
    return flip_action(q, [x])


def _add_bond_exchange(out: np.ndarray, q: np.ndarray, x: int, weight: float = 1.0) -> None:
    """Accumulate ``weight (P Q P - Q)`` for the bond ``(x, x+1)``; only rows and columns ``x, x+1`` change."""
    n = q.shape[0]
    a, b = x % n, (x + 1) % n
    perm = np.arange(n)
    perm[a], perm[b] = b, a
    rows = np.array([a, b])
    out[rows, :] += weight * (q[[b, a]][:, perm] - q[rows, :])
    col = q[:, [b, a]] - q[:, rows]
    col[rows, :] = 0.0
    out[:, rows] += weight * col


def bond_exchange_action(q: np.ndarray, x: int) -> np.ndarray:
    """``f(omega^{x,x+1}) - f(omega)`` as a matrix: ``P Q P - Q``."""
    out = np.zeros_like(q)
    _add_bond_exchange(out, q, x)
    return out


def exchange_action(q: np.ndarray, bonds: Iterable[int] | None = None) -> np.ndarray:
    n = q.shape[0]
    bonds = range(n) if bonds is None else bonds
    out = np.zeros_like(q)
    for x in bonds:
        _add_bond_exchange(out, q, x)
    return out


def s_action(q: np.ndarray, params: ModelParams, sites=None, bonds=None) -> np.ndarray:
    return params.gamma * flip_action(q, sites) + params.lam * exchange_action(q, bonds)


def local_s_action(q: np.ndarray, params: ModelParams, x: int) -> np.ndarray:
    """``S_x = gamma grad_x + lam grad_{x,x+1}``."""
    return params.gamma * site_flip_action(q, x) + params.lam * bond_exchange_action(q, x)


def l_action(q: np.ndarray, disorder: DisorderField, params: ModelParams) -> np.ndarray:
    return a_action(q, hopping_matrix(disorder)) + s_action(q, params)


def box_sites(ell: int, n: int) -> np.ndarray:
    if 2 * ell + 1 > n:
        raise SupportError(f"box of radius {ell} does not fit a ring of size {n}")
    return np.arange(-ell, ell + 1) % n


def box_s_action(q: np.ndarray, ell: int, params: ModelParams) -> np.ndarray:
    """Generator restricted to the open box: bonds with both ends inside."""
    n = q.shape[0]
    sites = box_sites(ell, n)
    return s_action(q, params, sites=sites, bonds=range(-ell, ell))


# observable-level wrappers


def act_A(obs: QuadraticObservable) -> QuadraticObservable:
    return map_observable(obs, lambda q, m: a_action(q, hopping_matrix(m)), 1, f"A({obs.name})", uses_disorder=True)


def act_Sflip(obs: QuadraticObservable) -> QuadraticObservable:
    return map_observable(obs, lambda q, m: flip_action(q), 0, f"Sflip({obs.name})")


def act_Sexch(obs: QuadraticObservable) -> QuadraticObservable:
    return map_observable(obs, lambda q, m: exchange_action(q), 1, f"Sexch({obs.name})")


def act_S(obs: QuadraticObservable, params: ModelParams) -> QuadraticObservable:
    return map_observable(obs, lambda q, m: s_action(q, params), 1, f"S({obs.name})")


def act_L(obs: QuadraticObservable, params: ModelParams) -> QuadraticObservable:
    return map_observable(obs, lambda q, m: l_action(q, m, params), 1, f"L({obs.name})", uses_disorder=True)


def grad_site(obs: QuadraticObservable, x: int) -> QuadraticObservable:
    return map_observable(obs, lambda q, m: site_flip_action(q, x), 0, f"grad_{x}({obs.name})")


def grad_bond(obs: QuadraticObservable, x: int) -> QuadraticObservable:
    return map_observable(obs, lambda q, m: bond_exchange_action(q, x), 1, f"grad_{x},{x + 1}({obs.name})")


def from_gradients(pieces: Sequence[tuple[int, QuadraticObservable | None, QuadraticObservable | None]]) -> QuadraticObservable:
    """``phi = sum_x grad_x(F_x) + grad_{x,x+1}(G_x)``, an element of the gradient space."""
    out = None
    for x, f_x, g_x in pieces:
        for term in (grad_site(f_x, x) if f_x is not None else None, grad_bond(g_x, x) if g_x is not None else None):
            if term is not None:
                out = term if out is None else out + term
    if out is None:
        return QuadraticObservable(lambda m: np.zeros((m.n, m.n)), 0, "0", disorder_free=True)
    out.name = "phi"
    return out


# ---------------------------------------------------------------------------
# inner products


def _matrix(f, disorder: DisorderField | None) -> np.ndarray:
    if isinstance(f, QuadraticObservable):
        if disorder is None:
            raise ValueError("a disorder field is needed to realize an observable")
        return f.realize(disorder)
    return np.asarray(f, dtype=float)


def inner_gibbs(f, g, beta: float = 1.0, disorder: DisorderField | None = None) -> float:
    """Gibbs covariance of two centered quadratic forms."""
    qf, qg = _matrix(f, disorder), _matrix(g, disorder)
    if qf.shape != qg.shape:
        raise ValueError(f"size mismatch: {qf.shape} vs {qg.shape}")
    return float(2.0 / beta**2 * np.sum(qf * qg))


def _ensemble(disorder) -> list[DisorderField]:
    if isinstance(disorder, DisorderField):
        return [disorder]
    out = list(disorder)
    if not out:
        raise ValueError("empty disorder ensemble")
    return out


def _check_ring(obs: QuadraticObservable, n: int) -> None:
    if not obs.radius < n / 4:
        raise SupportError(f"support radius {obs.radius} of {obs.name} too large for ring of size {n}")


def gamma_sum(obs: QuadraticObservable, disorder: DisorderField) -> np.ndarray:
    """Matrix of ``sum_y tau_y f`` on the ring."""
    n = disorder.n
    if obs.disorder_free:
        q = obs.realize(disorder)
        out = np.zeros_like(q)
        for y in range(n):
            out += np.roll(q, (y, y), axis=(0, 1))
        return out
    out = np.zeros((n, n))
    for y in range(n):
        out += np.roll(obs.realize(disorder.shift(y)), (y, y), axis=(0, 1))
    return out


def star_inner(f: QuadraticObservable, g: QuadraticObservable, disorder, beta: float = 1.0) -> float:
    """Disorder and translation averaged ``sum_x <f, tau_x g>``."""
    vals = []
    for m in _ensemble(disorder):
        _check_ring(f, m.n)
        _check_ring(g, m.n)
        vals.append(2.0 / (beta**2 * m.n) * np.sum(gamma_sum(f, m) * gamma_sum(g, m)))
    return float(np.mean(vals))


def star_star_sample(f: QuadraticObservable, m: DisorderField, beta: float = 1.0) -> float:
    _check_ring(f, m.n)
    x = signed_sites(m.n)
    if f.disorder_free:
        return float(2.0 / beta**2 * np.dot(x, np.diag(f.realize(m))))
    acc = 0.0
    for y in range(m.n):
        acc += np.dot(x, np.diag(f.realize(m.shift(y))))
    return float(2.0 / beta**2 * acc / m.n)


def star_star(f: QuadraticObservable, disorder, beta: float = 1.0) -> float:
    """Disorder-averaged ``sum_x x E[f omega_x^2]`` on the centered window."""
    return float(np.mean([star_star_sample(f, m, beta) for m in _ensemble(disorder)]))


def dirichlet_form(f, ell: int, params: ModelParams, beta: float = 1.0, disorder=None) -> float:
    """``sum_{x in box} (gamma/2) E[(grad_x f)^2] + (lam/2) E[(grad_{x,x+1} f)^2]``.

    The box ``-ell..ell`` includes the bond leaving its right end.
    """
    mats = [_matrix(f, m) for m in _ensemble(disorder)] if isinstance(f, QuadraticObservable) else [np.asarray(f, float)]
    vals = []
    for q in mats:
        n = q.shape[0]
        if 2 * ell + 2 > n:
            raise SupportError(f"box of radius {ell} needs a ring of size >= {2 * ell + 2}")
        if support_radius(q) > ell:
            raise SupportError(f"support radius {support_radius(q)} exceeds box radius {ell}")
        acc = 0.0
        for x in range(-ell, ell + 1):
            acc += 0.5 * params.gamma * inner_gibbs(site_flip_action(q, x), site_flip_action(q, x), beta)
            acc += 0.5 * params.lam * inner_gibbs(bond_exchange_action(q, x), bond_exchange_action(q, x), beta)
        vals.append(acc)
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# sparse form of the symmetric part


def _vec_index(n: int, i, j):
    return np.asarray(i) * n + np.asarray(j)


def s_operator_sparse(n: int, params: ModelParams, sites: Iterable[int] | None = None, bonds: Iterable[int] | None = None) -> sp.csr_matrix:
    """Matrix of ``Q -> S Q`` acting on row-major ``vec(Q)``."""
    sites = np.arange(n) if sites is None else np.asarray(list(sites)) % n
    bonds = range(n) if bonds is None else bonds
    mask = np.zeros(n)
    np.add.at(mask, sites, 1.0)
    weight = mask[:, None] + mask[None, :]
    np.fill_diagonal(weight, 0.0)
    diag = -2.0 * params.gamma * weight.ravel()
    rows, cols, vals = [np.arange(n * n)], [np.arange(n * n)], [diag]
    idx = np.arange(n)
    for x in bonds:
        a, b = x % n, (x + 1) % n
        perm = idx.copy()
        perm[a], perm[b] = b, a
        ii, jj = np.meshgrid(idx, idx, indexing="ij")
        moved = (perm[ii] != ii) | (perm[jj] != jj)
        src_i, src_j = ii[moved], jj[moved]
        r = _vec_index(n, src_i, src_j)
        c = _vec_index(n, perm[src_i], perm[src_j])
        rows += [r, r]
        cols += [c, r]
        vals += [np.full(r.size, params.lam), np.full(r.size, -params.lam)]
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n))
    return mat.tocsr()


def a_operator_sparse(disorder: DisorderField) -> sp.csr_matrix:
    """Matrix of ``Q -> Q M - M Q`` on row-major ``vec(Q)``."""
    m = hopping_matrix(disorder, sparse=True)
    eye = sp.identity(disorder.n, format="csr")
    return (sp.kron(eye, m.T) - sp.kron(m, eye)).tocsr()


class SymmetricPartInverse:
    """Direct solver for ``(-S) g = u`` with ``tr u = 0``.

    Diagonal and off-diagonal coefficients decouple: the diagonal block is a
    graph Laplacian whose kernel is the conserved energy, the off-diagonal
    block is positive definite for ``gamma > 0``. Both are factored once.
    """

    def __init__(self, n: int, params: ModelParams, sites=None, bonds=None):
        params.require_positive_noise()
        self.n = n
        self.op = s_operator_sparse(n, params, sites, bonds)
        diag_idx = _vec_index(n, np.arange(n), np.arange(n))
        off = np.ones(n * n, dtype=bool)
        off[diag_idx] = False
        self.diag_idx = diag_idx
        self.off_idx = np.nonzero(off)[0]
        neg = (-self.op).tocsc()
        lap = neg[diag_idx][:, diag_idx].toarray()
        self.lap_pinv = np.linalg.pinv(lap, rcond=1e-12, hermitian=True)
        self.kernel = np.ones(n) / np.sqrt(n)
        self.off_lu = spla.splu(neg[self.off_idx][:, self.off_idx].tocsc())

    def apply(self, q: np.ndarray) -> np.ndarray:
        return (self.op @ q.ravel()).reshape(q.shape)

    def solve(self, u: np.ndarray, check: bool = True) -> np.ndarray:
        n = self.n
        flat = np.asarray(u, dtype=float).ravel()
        d = flat[self.diag_idx]
        along = float(np.dot(self.kernel, d))
        if check and abs(along) > KERNEL_TOL * max(1.0, np.linalg.norm(flat)):
            raise KernelComponentError(f"right-hand side has energy component {along:.3e}")
        out = np.zeros(n * n)
        out[self.diag_idx] = self.lap_pinv @ (d - along * self.kernel)
        out[self.off_idx] = self.off_lu.solve(flat[self.off_idx])
        return out.reshape(n, n)


_RING_CACHE: dict = {}


def ring_inverse(n: int, params: ModelParams) -> SymmetricPartInverse:
    key = (n, params.gamma, params.lam)
    if key not in _RING_CACHE:
        if len(_RING_CACHE) > 16:
            _RING_CACHE.clear()
        _RING_CACHE[key] = SymmetricPartInverse(n, params)
    return _RING_CACHE[key]


# ---------------------------------------------------------------------------
# H_{-1} solves on a box


@dataclass(frozen=True)
class MinusOneSolution:
    g: np.ndarray
    value: float
    iterations: int
    residual: float


def h_minus_one_solve(u, ell: int, params: ModelParams, beta: float = 1.0, disorder: DisorderField | None = None, rtol: float = 1e-10) -> MinusOneSolution:
    """Solve ``S_box g = -u`` by conjugate gradients off the energy kernel.

    Returns the maximizer of ``2<u,g> - <g,-S g>`` and its value
    ``<u, (-S)^{-1} u>``.
    """
    params.require_positive_noise()
    q = _matrix(u, disorder)
    n = q.shape[0]
    idx = box_sites(ell, n)
    inside = np.zeros(n, dtype=bool)
    inside[idx] = True
    if np.any(np.abs(q[~inside]) > 0) or np.any(np.abs(q[:, ~inside]) > 0):
        raise SupportError(f"right-hand side not supported in the box of radius {ell}")
    sub = q[np.ix_(idx, idx)]
    size = idx.size
    scale = max(1.0, float(np.linalg.norm(sub)))
    tr = float(np.trace(sub))
    if abs(tr) > KERNEL_TOL * scale * np.sqrt(size):
        raise KernelComponentError(f"right-hand side has box-energy component {tr:.3e}")
    op = box_operator(ell, params)
    neg = -op

    def project(v: np.ndarray) -> np.ndarray:
        m = v.reshape(size, size)
        return (m - np.trace(m) / size * np.eye(size)).ravel()

    lin = spla.LinearOperator((size * size, size * size), matvec=lambda v: project(neg @ project(v)), dtype=float)
    rhs = project(sub.ravel())
    if not np.any(rhs):
        g_box = np.zeros(size * size)
        info, iters = 0, 0
    else:
        counter = {"k": 0}

        def cb(_):
            counter["k"] += 1

        g_box, info = spla.cg(lin, rhs, rtol=rtol, atol=0.0, maxiter=10 * size * size, callback=cb)
        iters = counter["k"]
        if info != 0:
            raise RuntimeError(f"CG did not converge in {iters} iterations")
    g_box = project(g_box)
    res = float(np.linalg.norm(neg @ g_box - rhs) / max(np.linalg.norm(rhs), 1e-300))
    g_mat = 0.5 * (g_box.reshape(size, size) + g_box.reshape(size, size).T)
    g = np.zeros((n, n))
    g[np.ix_(idx, idx)] = g_mat
    value = 2.0 / beta**2 * float(np.sum(sub * g_mat))
    return MinusOneSolution(g, value, iters, res)


_BOX_CACHE: dict = {}


def box_operator(ell: int, params: ModelParams) -> sp.csr_matrix:
    """``S`` on the open box in local coordinates ``0..2 ell``."""
    key = (ell, params.gamma, params.lam)
    if key not in _BOX_CACHE:
        size = 2 * ell + 1
        # a line of `size` sites: all sites flip, bonds 0..size-2
        _BOX_CACHE[key] = s_operator_sparse(size, params, sites=range(size), bonds=range(size - 1))
    return _BOX_CACHE[key]


def box_linear_moment(ell: int, n: int) -> np.ndarray:
    """Matrix of ``sum_{x in box} x omega_x^2``."""
    q = np.zeros((n, n))
    for x in range(-ell, ell + 1):
        q[x % n, x % n] = x
    return q


def box_current(ell: int, n: int, lam: float) -> np.ndarray:
    """Matrix of ``J_ell``: exchange currents over bonds inside the box."""
    q = np.zeros((n, n))
    for y in range(-ell, ell):
        q[(y + 1) % n, (y + 1) % n] += lam
        q[y % n, y % n] -= lam
    return q


# ---------------------------------------------------------------------------
# seminorm and CLT variances


def _traceless_gamma(phi: QuadraticObservable, m: DisorderField) -> np.ndarray:
    q = phi.realize(m)
    scale = max(1.0, float(np.abs(q).max()))
    if abs(np.trace(q)) > 1e-9 * scale:
        raise ValueError(f"{phi.name} is not a gradient: trace {np.trace(q):.3e} on a disorder sample")
    return gamma_sum(phi, m)


def triple_inner(phi: QuadraticObservable, psi: QuadraticObservable, params: ModelParams, disorder, beta: float = 1.0) -> float:
    """Semi-inner product associated with the CLT seminorm.

    On a ring sample the supremum over ``g`` is the ``(-S)^{-1}`` pairing of
    the translation sums; the scalar ``a`` contributes the squared
    ``star_star`` term divided by ``lam chi``.
    """
    params.require_positive_noise()
    chi = 2.0 / beta**2
    first, ss_phi, ss_psi = [], [], []
    for m in _ensemble(disorder):
        _check_ring(phi, m.n)
        _check_ring(psi, m.n)
        inv = ring_inverse(m.n, params)
        big_phi = _traceless_gamma(phi, m)
        big_psi = big_phi if psi is phi else _traceless_gamma(psi, m)
        first.append(inner_gibbs(big_phi, inv.solve(big_psi), beta) / m.n)
        ss_phi.append(star_star_sample(phi, m, beta))
        ss_psi.append(ss_phi[-1] if psi is phi else star_star_sample(psi, m, beta))
    return float(np.mean(first) + np.mean(ss_phi) * np.mean(ss_psi) / (params.lam * chi))


def seminorm_triple(phi: QuadraticObservable, params: ModelParams, disorder, beta: float = 1.0) -> float:
    """Squared CLT seminorm of a gradient-type quadratic observable."""
    return triple_inner(phi, phi, params, disorder, beta)


def seminorm_sup_form(phi: QuadraticObservable, g: QuadraticObservable, a: float, params: ModelParams, disorder, beta: float = 1.0) -> float:
    """Objective ``2<<phi,g>>* + 2a<<phi>>** - D_0(a omega_0^2 + Gamma_g)``.

    Evaluated directly for a given trial pair, so that the supremum can be
    probed independently of the closed form.
    """
    chi = 2.0 / beta**2
    lin = star_inner(phi, g, disorder, beta) + a * star_star(phi, disorder, beta)
    quad = []
    for m in _ensemble(disorder):
        big_g = gamma_sum(g, m)
        # D_0 of a*omega_0^2 + Gamma_g, the cross term telescopes on the ring
        quad.append(-inner_gibbs(big_g, s_action(big_g, params), beta) / m.n)
    return float(2.0 * lin - np.mean(quad) - a * a * params.lam * chi)


def clt_sum(phi: QuadraticObservable, ell: int, m: DisorderField) -> np.ndarray:
    """Matrix of ``sum_{|x| <= ell - s - 1} tau_x phi``."""
    reach = ell - phi.radius - 1
    if reach < 0:
        raise SupportError(f"box radius {ell} too small for support {phi.radius}")
    out = np.zeros((m.n, m.n))
    for x in range(-reach, reach + 1):
        out += np.roll(phi.realize(m.shift(x)), (x, x), axis=(0, 1))
    return out


def clt_variance_scan(phi: QuadraticObservable, ell_list: Sequence[int], params: ModelParams, disorder, beta: float = 1.0) -> np.ndarray:
    """``(2 ell)^{-1} E[<(-S_box)^{-1} sum tau_x phi, sum tau_x phi>]`` per ``ell``."""
    out = []
    for ell in ell_list:
        vals = []
        for m in _ensemble(disorder):
            if m.n < 2 * ell + 2:
                raise SupportError(f"ring of size {m.n} too small for box radius {ell}")
            u = clt_sum(phi, ell, m)
            vals.append(h_minus_one_solve(u, ell, params, beta).value / (2 * ell))
        out.append(float(np.mean(vals)))
    return np.asarray(out)


def extrapolate_inverse_ell(ells: Sequence[int], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit ``a + b/ell``; returns ``(a, b)``."""
    x = 1.0 / np.asarray(ells, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, np.asarray(values, dtype=float), rcond=None)
    return float(coef[0]), float(coef[1])


def dirichlet_bound_constant(pieces: Sequence[tuple[int, QuadraticObservable | None, QuadraticObservable | None]], disorder, beta: float = 1.0) -> tuple[float, int]:
    """``(2 s + 1)(sup E[F_x^2]^{1/2} + sup E[G_x^2]^{1/2})`` and ``s``.

    ``F_x, G_x`` are taken centered, which gives the smallest constant.
    """
    ens = _ensemble(disorder)
    phi = from_gradients(pieces)
    s = max(support_radius(phi.realize(m)) for m in ens)
    sup_f = sup_g = 0.0
    for _, f_x, g_x in pieces:
        if f_x is not None:
            sup_f = max(sup_f, float(np.mean([inner_gibbs(f_x, f_x, beta, m) for m in ens])))
        if g_x is not None:
            sup_g = max(sup_g, float(np.mean([inner_gibbs(g_x, g_x, beta, m) for m in ens])))
    return (2 * s + 1) * (np.sqrt(sup_f) + np.sqrt(sup_g)), s


# ---------------------------------------------------------------------------
# Hermite basis


@dataclass
class OccupationFunction:
    """Degree-two Hermite coefficients on a ring of size ``n``.

    ``coeffs[(x, y)]`` with ``x < y`` is the weight of ``omega_x omega_y``;
    ``coeffs[(x, x)]`` the weight of ``(omega_x^2 - 1)/sqrt(2)``.
    """

    n: int
    coeffs: dict[tuple[int, int], float]

    def get(self, x: int, y: int) -> float:
        a, b = sorted((x % self.n, y % self.n))
        return self.coeffs.get((a, b), 0.0)

    def inner(self, other: "OccupationFunction") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return float(sum(self.coeffs.get(k, 0.0) * other.coeffs.get(k, 0.0) for k in keys))

    def to_matrix(self) -> np.ndarray:
        q = np.zeros((self.n, self.n))
        for (x, y), c in self.coeffs.items():
            if x == y:
                q[x, x] = c / np.sqrt(2.0)
            else:
                q[x, y] = q[y, x] = 0.5 * c
        return q

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write("x,y,coeff\n")
        for (x, y), c in sorted(self.coeffs.items()):
            buf.write(f"{x},{y},{float(c)!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str, n: int) -> "OccupationFunction":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if lines[0].replace(" ", "") != "x,y,coeff":
            raise ValueError("expected header x,y,coeff")
        coeffs = {}
        for ln in lines[1:]:
            x, y, c = ln.split(",")
            a, b = sorted((int(x), int(y)))
            coeffs[(a, b)] = float(c)
        return cls(n, coeffs)


def hermite_decompose(f, beta: float = 1.0, disorder: DisorderField | None = None, tol: float = 0.0) -> OccupationFunction:
    """Coefficients in the normalized degree-two Hermite basis (``beta = 1``)."""
    if beta != 1.0:
        raise ValueError("Hermite basis is normalized for beta = 1; rescale omega by sqrt(beta) first")
    q = _matrix(f, disorder)
    n = q.shape[0]
    coeffs = {}
    for x in range(n):
        if abs(q[x, x]) > tol:
            coeffs[(x, x)] = float(np.sqrt(2.0) * q[x, x])
        for y in range(x + 1, n):
            if abs(q[x, y]) > tol:
                coeffs[(x, y)] = float(2.0 * q[x, y])
    return OccupationFunction(n, coeffs)


def _occupations(n: int):
    for x in range(n):
        for y in range(x, n):
            xi = np.zeros(n, dtype=int)
            xi[x] += 1
            xi[y] += 1
            yield (x, y), xi


def _key(xi: np.ndarray) -> tuple[int, int]:
    occ = np.repeat(np.arange(xi.size), xi)
    return int(occ[0]), int(occ[1])


def act_frak_S(F: OccupationFunction, params: ModelParams) -> OccupationFunction:
    """Symmetric part in occupation variables, from the defining display.

    ``(SF)(xi) = lam sum_x [F(xi^{x,x+1}) - F(xi)] + gamma sum_x ((-1)^{xi_x} - 1) F(xi)``.
    """
    n = F.n
    out = {}
    for key, xi in _occupations(n):
        val = 0.0
        fx = F.coeffs.get(key, 0.0)
        for x in range(n):
            y = (x + 1) % n
            swapped = xi.copy()
            swapped[x], swapped[y] = xi[y], xi[x]
            val += params.lam * (F.coeffs.get(_key(swapped), 0.0) - fx)
            val += params.gamma * ((-1.0) ** xi[x] - 1.0) * fx
        if val != 0.0:
            out[key] = val
    return OccupationFunction(n, out)


def hermite_dirichlet(F: OccupationFunction, params: ModelParams, sites: Iterable[int]) -> float:
    """Dirichlet form in occupation variables over the given sites and their right bonds.

    ``(lam/2) sum (F(xi^{x,x+1}) - F(xi))^2 + gamma sum (1 - (-1)^{xi_x}) F(xi)^2``.
    """
    n = F.n
    sites = [x % n for x in sites]
    acc = 0.0
    for key, xi in _occupations(n):
        fx = F.coeffs.get(key, 0.0)
        for x in sites:
            y = (x + 1) % n
            swapped = xi.copy()
            swapped[x], swapped[y] = xi[y], xi[x]
            acc += 0.5 * params.lam * (F.coeffs.get(_key(swapped), 0.0) - fx) ** 2
            acc += params.gamma * (1.0 - (-1.0) ** xi[x]) * fx**2
    return float(acc)


# ---------------------------------------------------------------------------
# CSV triplets


def observable_to_csv(q: np.ndarray, path: str | Path | None = None) -> str:
    buf = io.StringIO()
    buf.write("i,j,value\n")
    n = q.shape[0]
    for i in range(n):
        for j in range(i, n):
            if q[i, j] != 0.0:
                buf.write(f"{i},{j},{float(q[i, j])!r}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def observable_from_csv(text: str, n: int) -> np.ndarray:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if lines[0].replace(" ", "") != "i,j,value":
        raise ValueError("expected header i,j,value")
    q = np.zeros((n, n))
    for ln in lines[1:]:
        i, j, v = ln.split(",")
        i, j = int(i), int(j)
        q[i, j] = q[j, i] = float(v)
    return q
