import numpy as np
import pytest
from hypothesis import given, strategies as st

from disordered_chain.chain import DisorderField, hopping_matrix, sample_disorder
from disordered_chain.config import ModelParams, rng_for
from disordered_chain.quadratic import (
    KernelComponentError,
    OccupationFunction,
    SupportError,
    a_action,
    act_A,
    act_frak_S,
    box_current,
    box_linear_moment,
    box_s_action,
    dirichlet_form,
    energy_gradient,
    exchange_action,
    exchange_current,
    flip_action,
    from_terms,
    from_window,
    gamma_sum,
    h_minus_one_solve,
    hamiltonian_current,
    hermite_decompose,
    hermite_dirichlet,
    inner_gibbs,
    l_action,
    observable_from_csv,
    observable_to_csv,
    pair,
    random_observable,
    ring_inverse,
    s_action,
    seminorm_sup_form,
    seminorm_triple,
    site_energy,
    star_inner,
    star_star,
    summed_current,
    total_energy,
)

P = ModelParams(gamma=1.0, lam=1.0, c_bound=2.0, n=12)
seeds = st.integers(0, 2**32 - 1)


def sym(seed, n):
    a = rng_for(seed, 0, "test_functions").standard_normal((n, n))
    return 0.5 * (a + a.T)


def values(q, omega, beta=1.0):
    return np.einsum("ki,ij,kj->k", omega, q, omega) - np.trace(q) / beta


def configs(seed, n, k=6):
    return rng_for(seed, 1, "gibbs").standard_normal((k, n))


@given(seeds, st.integers(0, 7))
def test_flip_matches_pointwise_evaluation(seed, x):
    n = 8
    q, w = sym(seed, n), configs(seed, n)
    flipped = w.copy()
    flipped[:, x] *= -1
    direct = values(q, flipped) - values(q, w)
    assert np.allclose(values(flip_action(q, [x]), w), direct, atol=1e-12)


@given(seeds)
def test_summed_flip_and_exchange_match_pointwise(seed):
    n = 7
    q, w = sym(seed, n), configs(seed, n)
    flip_sum = sum(values(q, w * np.where(np.arange(n) == x, -1, 1)) - values(q, w) for x in range(n))
    assert np.allclose(values(flip_action(q), w), flip_sum, atol=1e-11)
    exch_sum = 0.0
    for x in range(n):
        s = w.copy()
        s[:, [x, (x + 1) % n]] = w[:, [(x + 1) % n, x]]
        exch_sum = exch_sum + values(q, s) - values(q, w)
    assert np.allclose(values(exchange_action(q), w), exch_sum, atol=1e-11)


@given(seeds)
def test_liouville_action_is_directional_derivative(seed):
    n = 9
    m = sample_disorder(P.replace(n=n), seed)
    q, w = sym(seed, n), configs(seed, n)
    mat = hopping_matrix(m)
    eps = 1e-6
    fd = (values(q, w + eps * w @ mat.T) - values(q, w - eps * w @ mat.T)) / (2 * eps)
    assert np.allclose(values(a_action(q, mat), w), fd, atol=1e-6)


@given(seeds)
def test_generator_parts_under_gibbs_pairing(seed):
    n = 9
    m = sample_disorder(P.replace(n=n), seed)
    mat = hopping_matrix(m)
    f, g = sym(seed, n), sym(seed + 1, n)
    # A is skew, S is symmetric and nonpositive
    assert inner_gibbs(a_action(f, mat), g) == pytest.approx(-inner_gibbs(f, a_action(g, mat)), abs=1e-10)
    assert inner_gibbs(s_action(f, P), g) == pytest.approx(inner_gibbs(f, s_action(g, P)), abs=1e-10)
    assert inner_gibbs(f, s_action(f, P)) <= 1e-12
    assert np.allclose(l_action(f, m, P), a_action(f, mat) + s_action(f, P))


def test_gibbs_inner_product_against_sampling():
    n = 5
    f, g = sym(0, n), sym(1, n)
    beta = 2.0
    w = rng_for(0, 0, "gibbs").standard_normal((200_000, n)) / np.sqrt(beta)
    prod = values(f, w, beta) * values(g, w, beta)
    assert abs(prod.mean() - inner_gibbs(f, g, beta)) < 5 * prod.std() / np.sqrt(prod.size)


def test_energy_is_conserved_by_every_part():
    n = 10
    m = sample_disorder(P.replace(n=n), 0)
    e = np.eye(n)
    assert np.abs(l_action(e, m, P)).max() < 1e-13


def test_observable_builders():
    m = DisorderField.ordered(10)
    assert np.allclose(pair(0, 1).realize(m)[0, 1], 0.5)
    assert site_energy(3).realize(m)[3, 3] == 1.0
    assert np.allclose(total_energy().realize(m), np.eye(10))
    g = energy_gradient(0).realize(m)
    assert g[1, 1] == 1.0 and g[0, 0] == -1.0
    assert np.allclose(exchange_current(P).realize(m), P.lam * g)
    with pytest.raises(ValueError):
        pair(2, 2)
    with pytest.raises(ValueError):
        from_window(np.ones((2, 2)))
    w = from_window(np.arange(9.0).reshape(3, 3))
    assert w.radius == 1 and np.allclose(w.realize(m), w.realize(m).T)


def test_summed_current_is_translation_sum_of_bond_current():
    m = sample_disorder(P.replace(n=10), 2)
    assert np.allclose(gamma_sum(hamiltonian_current(), m), summed_current(m))


@given(seeds, st.integers(-5, 5))
def test_translation_sums_are_shift_invariant(seed, y):
    m = sample_disorder(P.replace(n=12), seed)
    f = random_observable(seed, 1, disorder_weight=1.0)
    assert np.allclose(gamma_sum(f.translate(y), m), gamma_sum(f, m))


def test_star_inner_is_symmetric_and_catches_large_support():
    ens = [sample_disorder(P.replace(n=16), k) for k in range(2)]
    f, g = random_observable(0, 2, 1.0, 0), random_observable(0, 2, 1.0, 1)
    assert star_inner(f, g, ens) == pytest.approx(star_inner(g, f, ens))
    with pytest.raises(SupportError):
        star_inner(random_observable(0, 4), g, ens)


def test_star_star_of_gradient_is_compressibility():
    m = DisorderField.ordered(16)
    assert star_star(energy_gradient(0), m) == pytest.approx(P.chi)
    assert star_star(hamiltonian_current(), sample_disorder(P.replace(n=16), 0)) == 0.0


def test_seminorm_of_pure_gradient_and_exchange_current():
    # both translation sums vanish; only the scalar term remains
    ens = [sample_disorder(P.replace(n=16), k) for k in range(2)]
    assert seminorm_triple(energy_gradient(0), P, ens) == pytest.approx(P.chi / P.lam)
    assert seminorm_triple(exchange_current(P), P, ens) == pytest.approx(P.lam * P.chi)


@given(seeds, st.floats(-2, 2))
def test_sup_form_never_exceeds_seminorm(seed, a):
    ens = [sample_disorder(P.replace(n=16), 0)]
    phi = act_A(random_observable(seed, 1)) + energy_gradient(0)
    g = random_observable(seed + 7, 2)
    assert seminorm_sup_form(phi, g, a, P, ens) <= seminorm_triple(phi, P, ens) + 1e-9


def test_ring_inverse_solves_and_rejects_energy():
    inv = ring_inverse(10, P)
    u = sym(3, 10)
    u -= np.trace(u) / 10 * np.eye(10)
    g = inv.solve(u)
    assert np.abs(-s_action(g, P) - u).max() < 1e-10
    with pytest.raises(KernelComponentError):
        inv.solve(np.eye(10))


def test_box_minus_one_solve_inverts_box_identity():
    ell, n = 3, 12
    sol = h_minus_one_solve(box_current(ell, n, P.lam), ell, P)
    target = box_linear_moment(ell, n)
    diff = sol.g - target
    idx = [x % n for x in range(-ell, ell + 1)]
    block = diff[np.ix_(idx, idx)]
    # equal up to the box energy
    assert np.abs(block - np.trace(block) / block.shape[0] * np.eye(block.shape[0])).max() < 1e-8
    assert np.allclose(box_s_action(sol.g, ell, P), -box_current(ell, n, P.lam), atol=1e-8)


@given(seeds)
def test_minus_one_value_is_a_supremum(seed):
    ell, n = 2, 10
    p = P.replace(n=n)
    u = random_observable(seed, 1).realize(DisorderField.ordered(n)).copy()
    u[0, 0] -= np.trace(u)
    sol = h_minus_one_solve(u, ell, p)
    g = random_observable(seed + 1, 2).realize(DisorderField.ordered(n))
    trial = 2 * inner_gibbs(u, g) + inner_gibbs(g, box_s_action(g, ell, p))
    assert trial <= sol.value + 1e-9
    assert sol.residual < 1e-8


def test_minus_one_solve_errors():
    n = 10
    with pytest.raises(KernelComponentError):
        h_minus_one_solve(site_energy(0).realize(DisorderField.ordered(n)), 2, P)
    q = np.zeros((n, n))
    q[0, 4] = q[4, 0] = 1.0
    with pytest.raises(SupportError):
        h_minus_one_solve(q, 2, P)
    with pytest.raises(ValueError):
        h_minus_one_solve(q, 4, P.replace(gamma=0.0))


@given(seeds)
def test_hermite_round_trip_and_symmetric_part(seed):
    n = 6
    q = sym(seed, n)
    F = hermite_decompose(q)
    assert np.allclose(F.to_matrix(), q)
    assert F.inner(F) == pytest.approx(inner_gibbs(q, q))
    lhs, rhs = hermite_decompose(s_action(q, P)), act_frak_S(F, P)
    for key in set(lhs.coeffs) | set(rhs.coeffs):
        assert lhs.coeffs.get(key, 0.0) == pytest.approx(rhs.coeffs.get(key, 0.0), abs=1e-10)


@given(seeds)
def test_hermite_dirichlet_matches_dirichlet_form(seed):
    n, ell = 10, 2
    q = random_observable(seed, 2).realize(DisorderField.ordered(n))
    F = hermite_decompose(q)
    assert hermite_dirichlet(F, P, range(-ell, ell + 1)) == pytest.approx(dirichlet_form(q, ell, P), rel=1e-10)


def test_hermite_needs_unit_temperature():
    with pytest.raises(ValueError):
        hermite_decompose(np.eye(3), beta=2.0)


def test_csv_round_trips():
    q = sym(5, 6)
    assert np.allclose(observable_from_csv(observable_to_csv(q), 6), q)
    F = hermite_decompose(q)
    back = OccupationFunction.from_csv(F.to_csv(), 6)
    assert back.coeffs == pytest.approx(F.coeffs)


def test_observable_arithmetic():
    m = sample_disorder(P.replace(n=8), 0)
    f, g = random_observable(0, 1, 1.0, 0), random_observable(0, 1, 1.0, 1)
    assert np.allclose((2.0 * f - g).realize(m), 2 * f.realize(m) - g.realize(m))
    assert np.allclose((-f).realize(m), -f.realize(m))
    w = configs(0, 8)
    assert np.allclose(f.value(w, m), values(f.realize(m), w))
    assert from_terms([(0, 0, 1.0)]).value(np.ones(8), m, beta=1.0) == 0.0
