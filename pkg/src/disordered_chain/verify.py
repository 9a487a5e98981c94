"""Machine checks of operator identities, closed forms, the sector condition
and the Hermite computations.

Every check returns a ``Check`` carrying the claimed bound, the observed value
and the slack; nothing is clamped. ``quick_checks`` gathers the identities
that hold to round-off.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.integrate as si
from numpy.polynomial import hermite_e as He

from .chain import DisorderField, disorder_ensemble, hopping_matrix, sample_disorder, signed_sites
from .config import ModelParams, rng_for
from .quadratic import (
    QuadraticObservable,
    a_action,
    act_A,
    act_S,
    act_frak_S,
    bond_exchange_action,
    box_current,
    box_linear_moment,
    box_s_action,
    gamma_sum,
    hamiltonian_current,
    hermite_decompose,
    hermite_dirichlet,
    inner_gibbs,
    l_action,
    local_s_action,
    pair,
    random_observable,
    ring_inverse,
    s_action,
    seminorm_triple,
    site_flip_action,
    star_star_sample,
    triple_inner,
    OccupationFunction,
)

IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class Check:
    """One verified statement: ``observed`` against the ``claimed`` bound."""

    name: str
    claimed: float
    observed: float
    passed: bool
    kind: str = "residual"       # residual: observed <= claimed; lower: observed >= claimed
    detail: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.claimed - self.observed if self.kind == "residual" else self.observed - self.claimed

    def as_dict(self) -> dict:
        out = asdict(self)
        out["slack"] = self.slack
        return out


def residual_check(name: str, observed: float, tol: float = IDENTITY_TOL, **detail) -> Check:
    observed = float(observed)
    return Check(name, tol, observed, bool(observed <= tol), "residual", detail)


def lower_check(name: str, observed: float, bound: float, **detail) -> Check:
    observed = float(observed)
    return Check(name, float(bound), observed, bool(observed >= bound), "lower", detail)


# ---------------------------------------------------------------------------
# generator identities


def generator_display(disorder: DisorderField, params: ModelParams, x: int = 0) -> np.ndarray:
    """Matrix of the explicit expression for ``L(omega_x omega_{x+1})``."""
    n, m = disorder.n, disorder.masses
    q = np.zeros((n, n))

    def add(i, j, c):
        i, j = i % n, j % n
        if i == j:
            q[i, i] += c
        else:
            q[i, j] += 0.5 * c
            q[j, i] += 0.5 * c

    c = lambda a, b: 1.0 / math.sqrt(m[a % n] * m[b % n])
    add(x, x + 2, c(x + 1, x + 2))
    add(x + 1, x - 1, -c(x, x - 1))
    add(x + 1, x + 1, c(x, x + 1))
    add(x, x, -c(x, x + 1))
    add(x, x + 1, -4 * params.gamma)
    add(x + 2, x, params.lam)
    add(x + 1, x, -params.lam)
    add(x - 1, x + 1, params.lam)
    add(x, x + 1, -params.lam)
    return q


def check_generator_display(params: ModelParams, n: int = 12, seed: int = 0) -> Check:
    m = sample_disorder(params.replace(n=n), seed)
    q = np.zeros((n, n))
    q[0, 1] = q[1, 0] = 0.5
    res = np.abs(l_action(q, m, params) - generator_display(m, params)).max()
    return residual_check("generator on omega_x omega_{x+1}", res)


def check_gradient_identities(params: ModelParams, k_max: int = 5, n: int = 16) -> list[Check]:
    """Site energy gradient and the local representation of ``omega_x omega_{x+k}``.

    The representation uses ``-omega_x omega_{x+1} / (2 gamma)`` for the flip
    term; the printed ``1/gamma`` coefficient's residual is reported in the
    details.
    """
    out = []
    e0 = np.zeros((n, n))
    e0[0, 0] = 1.0
    grad = np.zeros((n, n))
    grad[1, 1], grad[0, 0] = 1.0, -1.0
    out.append(residual_check("energy gradient as a bond difference", np.abs(bond_exchange_action(e0, 0) - grad).max()))

    def mono(i, j):
        q = np.zeros((n, n))
        q[i % n, j % n] = q[j % n, i % n] = 0.5
        return q

    for k in range(1, k_max + 1):
        target = mono(0, k)
        flip_term = local_s_action(-mono(0, 1) / params.gamma, params, 0)
        rest = sum((local_s_action(-mono(0, l + 1) / params.lam, params, l) for l in range(1, k)), np.zeros((n, n)))
        res = np.abs(0.5 * flip_term + rest - target).max()
        printed = np.abs(flip_term + rest - target).max()
        out.append(residual_check(f"local representation of omega_0 omega_{k}", res, printed_residual=float(printed)))
    return out


def check_box_identity(params: ModelParams, ell: int = 4, n: int = 16) -> Check:
    """Open-box symmetric part of ``sum x omega_x^2`` is minus the box current."""
    lhs = box_s_action(box_linear_moment(ell, n), ell, params)
    res = np.abs(lhs + box_current(ell, n, params.lam)).max()
    printed = np.abs(lhs - box_current(ell, n, params.lam)).max()
    return residual_check("box identity for sum x omega_x^2", res, printed_sign_residual=float(printed))


def check_hermite_roundtrip(params: ModelParams, n: int = 8, seed: int = 0) -> Check:
    """``S`` on matrices against the occupation-variable operator."""
    rng = rng_for(seed, 0, "test_functions")
    q = rng.standard_normal((n, n))
    q = 0.5 * (q + q.T)
    lhs = hermite_decompose(s_action(q, params))
    rhs = act_frak_S(hermite_decompose(q), params)
    keys = set(lhs.coeffs) | set(rhs.coeffs)
    res = max(abs(lhs.coeffs.get(k, 0.0) - rhs.coeffs.get(k, 0.0)) for k in keys)
    return residual_check("Hermite round trip of S", res)


def flip_eigenvalue(params: ModelParams, n: int = 12, seed: int = 0) -> Check:
    """Ratio of the summed flip generator on ``j^A`` (value ``-4``)."""
    from .solvers import flip_eigenvalue_on_current

    val = flip_eigenvalue_on_current(sample_disorder(params.replace(n=n), seed))
    return residual_check("flip eigenvalue on j^A is -4", abs(val + 4.0), observed_ratio=val)


# ---------------------------------------------------------------------------
# closed forms


class ClosedFormError(ValueError):
    """A pair of coefficient functions violates one of the relations R1..R4."""

    def __init__(self, relation: str, residual: float):
        super().__init__(f"relation {relation} violated (residual {residual:.3e})")
        self.relation = relation
        self.residual = residual


Monomials = dict  # {(x, y) with x <= y: coefficient of omega_x omega_y (omega_x^2 when x = y)}


def _norm_key(x: int, y: int) -> tuple[int, int]:
    return (x, y) if x <= y else (y, x)


def matrix_to_monomials(q: np.ndarray, tol: float = 0.0) -> Monomials:
    """Monomial coefficients with signed site labels."""
    n = q.shape[0]
    lab = signed_sites(n)
    out: Monomials = {}
    for i in range(n):
        for j in range(i, n):
            c = q[i, j] if i == j else 2.0 * q[i, j]
            if abs(c) > tol:
                out[_norm_key(int(lab[i]), int(lab[j]))] = float(c)
    return out


def monomials_to_matrix(mono: Monomials, n: int) -> np.ndarray:
    q = np.zeros((n, n))
    for (x, y), c in mono.items():
        a, b = x % n, y % n
        if a == b:
            q[a, a] += c
        else:
            q[a, b] += 0.5 * c
            q[b, a] += 0.5 * c
    return q


def psi1_line(g: Monomials) -> dict[int, float]:
    """``psi_1(x, 0)``: coefficient of ``omega_x omega_0``."""
    return {(y if x == 0 else x): c for (x, y), c in g.items() if 0 in (x, y) and (x, y) != (0, 0)}


def psi2_line(h: Monomials) -> dict[int, float]:
    """``psi_2(x, 0)`` with ``h = sum psi_2(x,0)(omega_1 - omega_0) omega_x + psi_2(0,0)(omega_0^2 - omega_1^2)``."""
    out = {}
    for (x, y), c in h.items():
        if 1 in (x, y) and (x, y) not in ((0, 1), (1, 1)):
            out[x if y == 1 else y] = c
    out[0] = h.get((0, 0), 0.0)
    return out


def closed_form_pair(f: QuadraticObservable, a: float = 0.0, ring: int | None = None, tol: float = 1e-14) -> tuple[Monomials, Monomials]:
    """``g = grad_0 Gamma_f`` and ``h = a(omega_0^2 - omega_1^2) + grad_{0,1} Gamma_f`` (ordered chain)."""
    n = ring if ring is not None else max(16, 4 * f.radius + 12)
    m = DisorderField.ordered(n)
    big = gamma_sum(f, m)
    g = site_flip_action(big, 0)
    h = bond_exchange_action(big, 0)
    h[0, 0] += a
    h[1, 1] -= a
    return matrix_to_monomials(g, tol), matrix_to_monomials(h, tol)


def relation_residuals(g: Monomials, h: Monomials) -> dict[str, float]:
    """Residuals of R1..R4 written on coefficient functions.

    R2 is the antisymmetry of ``h`` under the exchange of sites 0 and 1.
    """
    res = {}
    r1 = [abs(c) for (x, y), c in g.items() if (x != 0 and y != 0) or (x, y) == (0, 0)]
    res["R1"] = max(r1, default=0.0)

    def swap(s):
        return {0: 1, 1: 0}.get(s, s)

    keys = set(h) | {_norm_key(swap(x), swap(y)) for x, y in h}
    res["R2"] = max((abs(h.get(k, 0.0) + h.get(_norm_key(swap(k[0]), swap(k[1])), 0.0)) for k in keys), default=0.0)
    p1, p2 = psi1_line(g), psi2_line(h)
    xs = set(p1) | set(p2) | {x + 1 for x in p1}
    r3 = [abs(2 * p2.get(x, 0.0) - (p1.get(x - 1, 0.0) - p1.get(x, 0.0))) for x in xs if x not in (0, 1)]
    r3.append(abs(p1.get(-1, 0.0) - p1.get(1, 0.0)))
    res["R3"] = max(r3)
    res["R4"] = max((abs(p1.get(x, 0.0) - p1.get(-x, 0.0)) for x in p1), default=0.0)
    return res


def validate_closed_form(g: Monomials, h: Monomials, tol: float = 1e-12) -> dict[str, float]:
    res = relation_residuals(g, h)
    for rel in ("R1", "R2", "R3", "R4"):
        if res[rel] > tol:
            raise ClosedFormError(rel, res[rel])
    return res


def reconstruct_closed_form(psi1: Monomials, psi2: Monomials, phi00: float = 0.0, tol: float = 1e-12) -> tuple[float, QuadraticObservable]:
    """Recover ``(a, f)`` from a pair satisfying R1..R4.

    ``a = psi_2(0,0)`` and ``f = phi(0,0) omega_0^2 + sum_{x != 0} phi(x,0) omega_x omega_0``
    with ``phi(x,0) = phi(-x,0) = -psi_1(x,0)/4``; ``phi(0,0)`` is a free gauge.
    """
    from .quadratic import from_terms

    validate_closed_form(psi1, psi2, tol)
    p1 = psi1_line(psi1)
    terms = [(x, 0, -0.25 * c) for x, c in sorted(p1.items()) if c != 0.0]
    if phi00:
        terms.append((0, 0, float(phi00)))
    return float(psi2.get((0, 0), 0.0)), from_terms(terms, "reconstructed")


def _monomial_distance(a: Monomials, b: Monomials) -> float:
    keys = set(a) | set(b)
    return max((abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys), default=0.0)


def check_closed_forms(f: QuadraticObservable, a: float = 0.0, phi00: Sequence[float] = (0.0, 1.0)) -> dict:
    """Forward relations and the reconstruction round trip under two gauges."""
    g, h = closed_form_pair(f, a)
    res = relation_residuals(g, h)
    trips = []
    for gauge in phi00:
        a_rec, f_rec = reconstruct_closed_form(g, h, gauge)
        g2, h2 = closed_form_pair(f_rec, a_rec)
        trips.append(max(_monomial_distance(g, g2), _monomial_distance(h, h2)))
    return {"relations": res, "a": a, "round_trip": max(trips), "gauges": list(phi00), "g": g, "h": h}


def closed_form_checks(seed: int = 0, count: int = 5, radius: int = 2) -> list[Check]:
    out = []
    rep = check_closed_forms(pair(0, 1))
    p1 = psi1_line(rep["g"])
    out.append(residual_check("closed form of omega_0 omega_1", max(abs(p1.get(1, 0) + 2), abs(p1.get(-1, 0) + 2)), 1e-12))
    for k in range(count):
        f = random_observable(seed, radius, index=k)
        a = float(rng_for(seed, k, "test_functions").standard_normal())
        rep = check_closed_forms(f, a)
        out.append(residual_check(f"relations R1-R4 (random f #{k})", max(rep["relations"].values())))
        out.append(residual_check(f"closed-form round trip (random f #{k})", rep["round_trip"]))
    return out


# ---------------------------------------------------------------------------
# sector condition


@dataclass(frozen=True)
class SectorReport:
    samples: int
    c0: float
    c1: float
    c_ii: float
    max_ratio_i: float           # |<<Ag, Sf>>| / (C0 |||Sf||| |||Sg|||)
    max_ratio_i_additive: float  # |<<Ag, Sf>>| / (C1 |||Sg|||^2 + |||Sf|||^2 / 2)
    max_ratio_ii: float          # |||Ag||| / (C |||Sg|||)
    ja_norm2: float
    homogeneity_gap: float       # change of the ratio of (i) under g -> 2g
    dual_route_gap: float        # fast pairing against the seminorm evaluator on a subset

    @property
    def holds(self) -> bool:
        return self.max_ratio_i <= 1.0 and self.max_ratio_i_additive <= 1.0 and self.max_ratio_ii <= 1.0


def sector_quantities(f: QuadraticObservable, g: QuadraticObservable, params: ModelParams, ensemble: Sequence[DisorderField]) -> tuple[float, float, float, float]:
    """``(<<Ag, Sf>>, |||Sf|||^2, |||Sg|||^2, |||Ag|||^2)`` averaged over the ensemble.

    ``S f`` has no scalar part, so ``<<Ag, Sf>>`` is the ``(-S)^{-1}`` pairing
    of translation sums; ``|||Ag|||^2`` adds the squared scalar part.
    """
    chi = params.chi
    cross, sf2, sg2, ag2 = [], [], [], []
    for m in ensemble:
        n = m.n
        inv = ring_inverse(n, params)
        hop = hopping_matrix(m)
        gf, gg = gamma_sum(f, m), gamma_sum(g, m)
        sgf, sgg = s_action(gf, params), s_action(gg, params)
        agg = a_action(gg, hop)
        k_agg = inv.solve(agg, check=False)
        cross.append(inner_gibbs(sgf, k_agg, params.beta) / n)
        sf2.append(-inner_gibbs(gf, sgf, params.beta) / n)
        sg2.append(-inner_gibbs(gg, sgg, params.beta) / n)
        ss = star_star_sample(act_A(g), m, params.beta)
        ag2.append((inner_gibbs(agg, k_agg, params.beta) / n, ss))
    ag_first = np.mean([a for a, _ in ag2])
    ag_ss = np.mean([s for _, s in ag2])
    return float(np.mean(cross)), float(np.mean(sf2)), float(np.mean(sg2)), float(ag_first + ag_ss**2 / (params.lam * chi))


def check_sector_condition(samples: int, params: ModelParams, support: int = 2, seed: int = 0, disorder_samples: int = 2, disorder_weight: float = 1.0, cross_checks: int = 5) -> SectorReport:
    """Random pairs ``(f, g)`` with i.i.d. normal coefficients on ``-support..support``."""
    params.require_positive_noise()
    n = 4 * (support + 2) + 4
    p = params.replace(n=n)
    c2 = params.c_bound**2
    c0 = math.sqrt(18 * c2 / (params.gamma * params.lam))
    c1 = 9 * c2 / (params.gamma * params.lam)
    ens = disorder_ensemble(p, seed, disorder_samples)
    ja2 = seminorm_triple(hamiltonian_current(), p, ens, params.beta)
    c_ii = math.sqrt(ja2 / (params.lam * params.chi) + c1)
    r_i = r_add = r_ii = 0.0
    homog = gap = 0.0
    for k in range(samples):
        f = random_observable(seed, support, disorder_weight, index=2 * k, name="f")
        g = random_observable(seed, support, disorder_weight, index=2 * k + 1, name="g")
        cross, sf2, sg2, ag2 = sector_quantities(f, g, p, ens)
        if sf2 <= 0 or sg2 <= 0:
            continue
        ratio = abs(cross) / (c0 * math.sqrt(sf2 * sg2))
        r_i = max(r_i, ratio)
        r_add = max(r_add, abs(cross) / (c1 * sg2 + 0.5 * sf2))
        r_ii = max(r_ii, math.sqrt(max(ag2, 0.0) / sg2) / c_ii)
        if k < cross_checks:
            ref = triple_inner(act_A(g), act_S(f, p), p, ens, params.beta)
            gap = max(gap, abs(ref - cross) / max(abs(ref), 1e-300))
        if k == 0:
            cross2, _, sg2b, _ = sector_quantities(f, 2.0 * g, p, ens)
            homog = abs(abs(cross2) / (c0 * math.sqrt(sf2 * sg2b)) - ratio)
    return SectorReport(samples, c0, c1, c_ii, r_i, r_add, r_ii, ja2, homog, gap)


# ---------------------------------------------------------------------------
# Hermite computations


def hermite_normalized(k: int, u):
    """``He_k(u) / sqrt(k!)``, orthonormal for the standard Gaussian."""
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    return He.hermeval(u, coef) / math.sqrt(math.factorial(k))


def gauss_hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``E[F(u)]`` with ``u`` standard normal."""
    x, w = He.hermegauss(nodes)
    return x, w / math.sqrt(2 * math.pi)


def hermite_box_dirichlet(k: int, ell: int, params: ModelParams, nodes: int = 200) -> float:
    """``D_ell`` of ``H_k(omega_0)`` by quadrature (sites of the box and their right bonds)."""
    x, w = gauss_hermite(nodes)
    hk = hermite_normalized(k, x)
    flip = float(np.sum(w * (hermite_normalized(k, -x) - hk) ** 2))
    # two independent coordinates for a bond touching site 0
    exch = float(np.einsum("i,j,ij->", w, w, (hk[None, :] - hk[:, None]) ** 2))
    bonds = 2 if ell >= 1 else 1
    return 0.5 * params.gamma * flip + 0.5 * params.lam * exch * bonds


def _gauss_legendre_on(f, a: float, b: float, nodes: int = 64) -> float:
    t, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (b - a) * t + 0.5 * (a + b)
    return float(0.5 * (b - a) * np.sum(w * f(u)))


def _gaussian_density(u):
    return np.exp(-0.5 * u**2) / math.sqrt(2 * math.pi)


def abs_moment_split(k: int, weight=lambda u: u**2 - 1.0, cutoff: float = 14.0, nodes: int = 64) -> float:
    """``E[weight(u) |H_k(u)|]`` by Gauss-Legendre between consecutive roots of ``H_k``."""
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    roots = np.sort(He.hermeroots(coef).real)
    edges = np.concatenate([[-cutoff], roots, [cutoff]])
    integrand = lambda u: weight(u) * np.abs(hermite_normalized(k, u)) * _gaussian_density(u)
    return float(sum(_gauss_legendre_on(integrand, a, b, nodes) for a, b in zip(edges[:-1], edges[1:])))


def abs_moment_quad(k: int, weight=lambda u: u**2 - 1.0) -> float:
    """Adaptive-quadrature oracle for ``abs_moment_split``."""
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    roots = list(np.sort(He.hermeroots(coef).real))
    integrand = lambda u: weight(u) * abs(hermite_normalized(k, u)) * _gaussian_density(u)
    val, _ = si.quad(integrand, -40.0, 40.0, points=roots, limit=400, epsabs=1e-14, epsrel=1e-13)
    return float(val)


def counterexample_moment(k: int, nodes: int = 200) -> float:
    """``E[(u^2 - 1)(|H_k(u)| - 1)^2]``: smooth parts by Gauss-Hermite, the kink by split quadrature."""
    x, w = gauss_hermite(nodes)
    smooth = float(np.sum(w * (x**2 - 1) * (hermite_normalized(k, x) ** 2 + 1.0)))
    return smooth - 2.0 * abs_moment_split(k)


@dataclass(frozen=True)
class HermiteReport:
    dirichlet: dict[int, float]                 # at the requested ell
    dirichlet_single_bond: dict[int, float]     # ell = 0
    counterexample: dict[int, float]
    bound: dict[int, float]
    display_residual: float
    checks: tuple[Check, ...]


def quadrature_dirichlet(q: np.ndarray, ell: int, params: ModelParams, nodes: int = 8) -> float:
    """Dirichlet form of ``omega^T q omega`` on the box by tensor Gauss-Hermite (exact for degree 2)."""
    n = q.shape[0]
    x, w = gauss_hermite(nodes)
    supp = set(np.nonzero(np.any(q != 0.0, axis=1))[0].tolist())

    def expect_sq(change, touched):
        act = sorted(supp | {t % n for t in touched})
        if not act:
            return 0.0
        grids = np.meshgrid(*([x] * len(act)), indexing="ij")
        wts = np.ones_like(grids[0])
        for gi in range(len(act)):
            wts = wts * np.meshgrid(*([w] * len(act)), indexing="ij")[gi]
        om = np.zeros(grids[0].shape + (n,))
        for gi, s in enumerate(act):
            om[..., s] = grids[gi]
        new = change(om)
        f0 = np.einsum("...i,ij,...j->...", om, q, om)
        f1 = np.einsum("...i,ij,...j->...", new, q, new)
        return float(np.sum(wts * (f1 - f0) ** 2))

    acc = 0.0
    for s in range(-ell, ell + 1):
        a, b = s % n, (s + 1) % n

        def flip(om, a=a):
            out = om.copy()
            out[..., a] = -out[..., a]
            return out

        def swap(om, a=a, b=b):
            out = om.copy()
            out[..., a], out[..., b] = om[..., b], om[..., a]
            return out

        acc += 0.5 * params.gamma * expect_sq(flip, [a])
        acc += 0.5 * params.lam * expect_sq(swap, [a, b])
    return acc


def check_dirichlet_display(params: ModelParams, ell: int = 1, n: int = 8) -> float:
    """Max gap between the occupation-variable Dirichlet display and quadrature over basis elements."""
    worst = 0.0
    sites = list(range(-ell, ell + 1))
    for x in range(-ell - 1, ell + 2):
        for y in range(x, ell + 2):
            F = OccupationFunction(n, {tuple(sorted((x % n, y % n))): 1.0})
            q = F.to_matrix()
            worst = max(worst, abs(hermite_dirichlet(F, params, sites) - quadrature_dirichlet(q, ell, params)))
    return worst


def check_hermite_identities(n_list: Iterable[int], ell: int, params: ModelParams, nodes: int = 200) -> HermiteReport:
    n_list = [int(k) for k in n_list]
    if any(k > 12 for k in n_list):
        raise ValueError("degrees above 12 are outside the quadrature range")
    d_ell = {k: hermite_box_dirichlet(k, ell, params, nodes) for k in n_list}
    d_0 = {k: hermite_box_dirichlet(k, 0, params, nodes) for k in n_list}
    moments = {k: counterexample_moment(k, nodes) for k in n_list if k >= 3}
    bounds = {k: float(k * k - 2) for k in moments}
    checks = []
    for k in n_list:
        if k % 2 == 0:
            checks.append(residual_check(f"D_0(H_{k}) = lam", abs(d_0[k] - params.lam), 1e-8, at_ell=ell, value_at_ell=d_ell[k]))
    for k in (4, 6, 8):
        if k in moments:
            checks.append(lower_check(f"<H_2(|H_{k}|-1)^2> >= {k * k - 2}", moments[k], bounds[k]))
    disp = check_dirichlet_display(params)
    checks.append(residual_check("Dirichlet display vs quadrature", disp, 1e-10))
    return HermiteReport(d_ell, d_0, moments, bounds, disp, tuple(checks))


# ---------------------------------------------------------------------------
# suites


def quick_checks(params: ModelParams | None = None, seed: int = 0) -> list[Check]:
    """Identities that hold to round-off; each runs well under a second."""
    p = ModelParams(gamma=1.0, lam=1.0, c_bound=2.0) if params is None else params
    out = [check_generator_display(p, seed=seed)]
    out += check_gradient_identities(p)
    out.append(check_box_identity(p))
    out.append(check_hermite_roundtrip(p, seed=seed))
    out.append(flip_eigenvalue(p, seed=seed))
    out += closed_form_checks(seed)
    return out


def full_checks(params: ModelParams | None = None, seed: int = 0, sector_samples: int = 10_000) -> list[Check]:
    """Quick identities plus sector condition, Fourier closed form and Hermite suite."""
    from .solvers import recurrence_residual, verify_SJ_equals_jA

    p = ModelParams(gamma=1.0, lam=1.0, c_bound=2.0) if params is None else params
    out = quick_checks(p, seed)
    rep = check_sector_condition(sector_samples, p, seed=seed)
    out.append(Check("sector (i) product form", 1.0, rep.max_ratio_i, rep.max_ratio_i <= 1.0, "residual", {"C0": rep.c0}))
    out.append(Check("sector (i) additive form", 1.0, rep.max_ratio_i_additive, rep.max_ratio_i_additive <= 1.0, "residual", {"C1": rep.c1}))
    out.append(Check("sector (ii)", 1.0, rep.max_ratio_ii, rep.max_ratio_ii <= 1.0, "residual", {"C": rep.c_ii}))
    rng = rng_for(seed, 0, "test_functions")
    xi = rng.random(1000)
    ks = rng.integers(2, 60, size=1000)
    rr = max(float(np.max(np.abs(recurrence_residual(xi[i : i + 1], int(ks[i]), p)))) for i in range(1000))
    out.append(residual_check("Fourier recurrence", rr))
    sj = verify_SJ_equals_jA(p.replace(c_bound=1.0), 50, 128)
    out.append(residual_check("S J_trunc = j^A", sj.residual, 1e-6, printed_boundary_residual=sj.printed_boundary_residual))
    out.append(residual_check("Fourier boundary line", sj.boundary_residual, 1e-10))
    herm = check_hermite_identities([2, 3, 4, 6, 8], 1, p)
    out += list(herm.checks)
    return out
