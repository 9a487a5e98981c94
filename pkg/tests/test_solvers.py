import numpy as np
import pytest
from hypothesis import given, strategies as st

from disordered_chain.chain import DisorderField, disorder_ensemble, sample_disorder
from disordered_chain.config import ModelParams
from disordered_chain.quadratic import SupportError
from disordered_chain.solvers import (
    band_mask,
    band_pieces,
    extrapolate_z,
    flip_eigenvalue_on_current,
    fourier_closed_form,
    green_kubo_direct,
    green_kubo_ensemble,
    green_kubo_resolvent,
    green_kubo_zero,
    prefactor,
    prefactor_printed,
    r_of_xi,
    r_of_xi_printed,
    recurrence_residual,
    remainder_seminorm,
    variational_D,
    verify_SJ_equals_jA,
    w_f_ell_variance,
    w_matrix,
)

P = ModelParams(gamma=1.0, lam=1.0, c_bound=2.0, n=12)


def test_krylov_resolvent_matches_direct_solve():
    m = sample_disorder(P, 0)
    for z in (1.0, 0.1, 0.01):
        out = green_kubo_resolvent(z, P, m)
        assert out.residual < 1e-10
        assert out.kappa == pytest.approx(green_kubo_direct(z, P, m), rel=1e-9)


def test_resolvent_tends_to_the_singular_solve():
    m = sample_disorder(P, 1)
    k0 = green_kubo_zero(P, m)
    gaps = [abs(green_kubo_resolvent(z, P, m).kappa - k0) for z in (1e-2, 1e-3, 1e-4)]
    assert gaps[2] < gaps[1] < gaps[0] and gaps[2] < 1e-4


def test_resolvent_rejects_bad_input():
    m = sample_disorder(P, 0)
    with pytest.raises(ValueError):
        green_kubo_resolvent(0.0, P, m)
    with pytest.raises(ValueError):
        green_kubo_resolvent(0.1, P.replace(gamma=0.0), m)


def test_coefficient_exceeds_exchange_rate():
    ens = disorder_ensemble(P, 0, 3)
    gk = green_kubo_ensemble(P, ens, (0.1, 0.03, 0.01))
    assert gk.d_bar >= P.lam
    assert gk.kappa_samples.shape == (3, 3)
    assert np.all(gk.relative_gaps() < 0.01)


@given(st.floats(0.5, 2.0), st.floats(-3.0, 3.0))
def test_extrapolation_is_exact_on_linear_series(a, b):
    z = np.array([0.1, 0.03, 0.01])
    ext = extrapolate_z(z, a + b * z)
    assert ext.value == pytest.approx(a, abs=1e-12)
    assert ext.monotone_tail


def test_extrapolation_errors():
    with pytest.raises(ValueError):
        extrapolate_z([0.1, 0.01], [1.0, 1.0])
    with pytest.raises(ValueError):
        extrapolate_z([0.1, 0.1, 0.01], [1.0, 1.0, 1.0])


def test_variational_upper_bounds_and_ordering():
    p = P.replace(n=16)
    ens = disorder_ensemble(p, 2, 2)
    v1, v2 = variational_D(1, p, ens), variational_D(2, p, ens)
    assert v1.d_empty >= v1.d_var >= v2.d_var - 1e-10
    assert np.all(v2.d_samples >= 0)
    # the ring Green-Kubo value of the same ensemble
    d_bar = np.mean([green_kubo_zero(p, m) for m in ens])
    assert v2.d_var == pytest.approx(d_bar, rel=1e-3)
    d = variational_D(2, p, ens, form="definition")
    assert d.d_var <= v2.d_var + 1e-10
    with pytest.raises(ValueError):
        variational_D(2, p, ens, form="other")
    with pytest.raises(SupportError):
        variational_D(5, p, ens)


def test_corrector_cancels_the_remainder():
    p = P.replace(n=16)
    m = sample_disorder(p, 3)
    v = variational_D(2, p, [m], correctors=True)
    assert remainder_seminorm(v.correctors[0], v.d_var, p, m) < 1e-3
    assert remainder_seminorm(np.zeros((16, 16)), v.d_var, p, m) > 0.1


def test_band_helpers():
    mask = band_mask(8, 1)
    assert mask[0, 7] and mask[0, 1] and not mask[0, 2]
    q = np.random.default_rng(0).standard_normal((10, 10))
    q = 0.5 * (q + q.T) * band_mask(10, 2)
    pieces = band_pieces(q, 1)
    assert np.allclose(sum(pieces.values()), q)


def test_w_matrix_stays_in_box_and_variance_is_positive():
    p = P.replace(n=24)
    m = sample_disorder(p, 0)
    w = w_matrix(4, 1.2, p, m, None, 0)
    assert np.abs(np.trace(w)) < 1e-12
    assert w_f_ell_variance(4, p, [m], 1.2) > 0
    with pytest.raises(SupportError):
        w_matrix(12, 1.2, p, m, None, 0)


def test_fourier_closed_form():
    xi = np.random.default_rng(1).random(200)
    assert np.max(recurrence_residual(xi, np.arange(2, 202), P)) < 1e-12
    assert np.max(np.abs(r_of_xi(xi, P))) < 1.0
    rep = verify_SJ_equals_jA(P, 50, 128)
    assert rep.residual < 1e-6 and rep.boundary_residual < 1e-10 and rep.bulk_residual < 1e-10
    # the alternative prefactor does not satisfy the boundary line
    assert rep.printed_boundary_residual > 1e-2


def test_rationalized_root_matches_quadratic_formula():
    xi = np.linspace(0.05, 0.45, 9)
    assert np.allclose(r_of_xi(xi, P), r_of_xi_printed(xi, P))
    assert np.all(np.isfinite(r_of_xi(np.array([0.5]), P)))
    assert not np.allclose(prefactor(xi, P), prefactor_printed(xi, P))
    sol = fourier_closed_form(P, 5, 32)
    assert sol.k_max == 5 and sol.phi.shape == (5, 32)


def test_flip_eigenvalue_on_current():
    assert flip_eigenvalue_on_current(sample_disorder(P, 0)) == pytest.approx(-4.0)
