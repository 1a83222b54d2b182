import math

import numpy as np
import pytest
from scipy.linalg import block_diag, eigh

from fblsecure.channel import ScenarioConfig, generate_drop
from fblsecure.core import FblParams, secrecy_rate_exact
from fblsecure.forms import (QuadraticFormSet, bound_coeffs, bound_coeffs_at, build_forms,
                             mrt_init, objective_log_lambda)
from fblsecure.gpi import (GpiSettings, align_phase, assemble_kkt, block_cholesky_solve,
                           fbl_coeff_provider, fix_phase, gpi_solve, gpi_solve_infinite_L,
                           gpi_solve_se_max, infinite_sum_secrecy, kkt_gradient, kkt_residual,
                           solve_fbl)

from conftest import random_forms, random_unit, unit_params


def _fd_gradient(fun, f, h=1e-6):
    g = np.empty_like(f)
    for i in range(f.size):
        e = np.zeros_like(f)
        e[i] = h
        d_re = (fun(f + e) - fun(f - e)) / (2 * h)
        d_im = (fun(f + 1j * e) - fun(f - 1j * e)) / (2 * h)
        g[i] = 0.5 * (d_re + 1j * d_im)
    return g


@pytest.mark.parametrize("shape", [(2, 2, 2), (4, 3, 2), (3, 1, 1), (2, 2, 4)])
def test_gradient_matches_finite_differences(rng, shape):
    n, k, m = shape
    forms = random_forms(rng, n=n, k=k, m=m)
    params = unit_params()
    f = random_unit(rng, n * k)
    coeffs = bound_coeffs_at(f, forms, np.full(k, 1e-3), np.full((m, k), 1e-4), params)
    grad = kkt_gradient(f, forms, coeffs, params)
    fd = _fd_gradient(lambda x: objective_log_lambda(x, forms, coeffs, params) * math.log(2), f)
    assert np.linalg.norm(fd - grad) / np.linalg.norm(grad) <= 1e-5


def test_gradient_orthogonal_to_scaling(rng):
    # ln lambda is scale invariant, so Re<f, grad> vanishes
    forms = random_forms(rng)
    params = unit_params()
    f = random_unit(rng, 8)
    c = bound_coeffs_at(f, forms, np.full(2, 1e-3), np.full((2, 2), 1e-3), params)
    assert abs(np.vdot(f, kkt_gradient(f, forms, c, params))) < 1e-12


def test_pencil_is_hermitian_pd(rng):
    forms = random_forms(rng, n=3, k=3, m=2)
    params = unit_params()
    f = random_unit(rng, 9)
    pair = assemble_kkt(f, forms, bound_coeffs_at(f, forms, 1e-3, 1e-3, params), params)
    for blocks in (pair.a_blocks, pair.b_blocks):
        np.testing.assert_allclose(blocks, blocks.conj().transpose(0, 2, 1), atol=1e-13)
        assert np.linalg.eigvalsh(blocks).min() > 0


def test_lambda_factors(rng):
    # lambda_num / lambda_den reproduces the objective
    forms = random_forms(rng, m=3)
    params = unit_params()
    f = random_unit(rng, 8)
    c = bound_coeffs_at(f, forms, 1e-3, 1e-3, params)
    pair = assemble_kkt(f, forms, c, params)
    assert pair.log2_lambda == pytest.approx(objective_log_lambda(f, forms, c, params), abs=1e-12)


def test_single_eve_pencil(rng):
    # M = 1: the eavesdropper part of A~ is omega_e/alpha D/(fDf) on every block
    n, k = 3, 2
    forms = random_forms(rng, n=n, k=k, m=1)
    params = unit_params()
    f = random_unit(rng, n * k)
    c = bound_coeffs_at(f, forms, 1e-3, 1e-3, params)
    bare = QuadraticFormSet(forms.user_terms, np.zeros((0, n, n)), forms.user_load, forms.eve_load)
    c_bare = bound_coeffs(c.rho_lin_user, np.zeros((0, k)), 1e-3, np.zeros((0, k)) + 1e-3, params)
    a_eve = assemble_kkt(f, forms, c, params).dense()[0] - assemble_kkt(f, bare, c_bare,
                                                                         params).dense()[0]
    _, _, _, D = forms.dense()
    _, _, _, fDf, _, _ = forms.values(f)
    ref = sum(c.omega_eve[0, j] / params.alpha * D[0, j] / fDf[0, j] for j in range(k))
    np.testing.assert_allclose(a_eve, ref, atol=1e-12)


def test_block_solve_matches_dense(rng):
    n, k = 4, 3
    x = rng.standard_normal((k, n, n)) + 1j * rng.standard_normal((k, n, n))
    blocks = np.einsum("knp,kqp->knq", x, x.conj()) + 0.5 * np.eye(n)
    dense_inv = np.linalg.inv(block_diag(*blocks))
    cols = np.stack([block_cholesky_solve(blocks, e) for e in np.eye(n * k)], axis=1)
    assert np.linalg.norm(cols - dense_inv) <= 1e-10


def test_kkt_pair_dense_scaling(rng):
    forms = random_forms(rng, n=2, k=2, m=2)
    params = unit_params()
    f = random_unit(rng, 4)
    pair = assemble_kkt(f, forms, bound_coeffs_at(f, forms, 1e-3, 1e-3, params), params)
    a, b = pair.dense()
    a_s, b_s = pair.dense(scaled=True)
    np.testing.assert_allclose(a_s, a * math.exp(pair.log_num))
    np.testing.assert_allclose(b_s, b * math.exp(pair.log_den))


class TestIteration:
    def _setup(self, rng, **kw):
        forms = random_forms(rng, **kw)
        params = unit_params()
        k, m = forms.n_users, forms.n_eves
        return forms, params, np.full(k, 1e-4), np.full((m, k), 1e-4)

    def test_unit_norm_and_trajectory(self, rng):
        forms, params, eps, delta = self._setup(rng)
        res = solve_fbl(forms, eps, delta, params, GpiSettings(tol=1e-8, max_iter=40))
        assert np.linalg.norm(res.f) == pytest.approx(1.0, abs=1e-12)
        assert len(res.trajectory) == res.iterations + 1
        assert len(res.steps) == res.iterations
        assert res.kkt_residual >= 0

    def test_every_iterate_unit_norm(self, rng):
        forms, params, eps, delta = self._setup(rng)
        seen = []

        def spy(f):
            seen.append(np.linalg.norm(f))
            return bound_coeffs_at(f, forms, eps, delta, params)
        gpi_solve(forms, spy, GpiSettings(max_iter=10, tol=1e-12), mrt_init(forms), params)
        np.testing.assert_allclose(seen, 1.0, atol=1e-12)

    def test_phase_invariance(self, rng):
        forms, params, eps, delta = self._setup(rng)
        f0 = mrt_init(forms)
        a = solve_fbl(forms, eps, delta, params, f0=f0)
        b = solve_fbl(forms, eps, delta, params, f0=np.exp(1.3j) * f0)
        np.testing.assert_allclose(a.trajectory, b.trajectory, atol=1e-9)

    def test_deterministic(self, rng):
        forms, params, eps, delta = self._setup(rng)
        a = solve_fbl(forms, eps, delta, params)
        b = solve_fbl(forms, eps, delta, params)
        assert a.trajectory == b.trajectory
        np.testing.assert_array_equal(a.f, b.f)

    def test_best_iterate_when_not_converged(self, rng):
        forms, params, eps, delta = self._setup(rng)
        res = solve_fbl(forms, eps, delta, params, GpiSettings(tol=1e-14, max_iter=3))
        assert not res.converged and res.iterations == 3
        c = bound_coeffs_at(res.f, forms, eps, delta, params)
        assert objective_log_lambda(res.f, forms, c, params) == pytest.approx(max(res.trajectory))

    def test_frozen_coefficients(self, rng):
        forms, params, eps, delta = self._setup(rng)
        calls = []
        settings = GpiSettings(refresh=False, max_iter=5, tol=1e-12)
        provider = fbl_coeff_provider(forms, eps, delta, params, settings)
        first = provider(mrt_init(forms))
        for _ in range(3):
            calls.append(provider(random_unit(rng, 8)))
        assert all(c is first for c in calls)
        refreshed = fbl_coeff_provider(forms, eps, delta, params, GpiSettings())
        assert refreshed(mrt_init(forms)) is not refreshed(mrt_init(forms))

    def test_fixed_point_residual_tight(self, rng):
        # well-conditioned instance: the tight run lands on a KKT point
        forms, params, eps, delta = self._setup(rng, n=3, k=1, m=1)
        res = solve_fbl(forms, eps, delta, params, GpiSettings(tol=1e-10, max_iter=500))
        assert res.converged and res.kkt_residual <= 1e-6

    @pytest.mark.parametrize("settings", [dict(tol=0.0), dict(max_iter=0)])
    def test_invalid_settings(self, settings):
        with pytest.raises(ValueError):
            GpiSettings(**settings)


def test_single_user_no_eve_is_matched_filter(rng):
    forms = random_forms(rng, n=5, k=1, m=1, eve_scale=0.0)
    params = unit_params()
    res = solve_fbl(forms, np.full(1, 0.5), np.full((1, 1), 0.5), params,
                    GpiSettings(tol=1e-12, max_iter=50), f0=random_unit(rng, 5))
    h = np.linalg.eigh(forms.user_terms[0])[1][:, -1]
    assert abs(np.vdot(h, res.f)) == pytest.approx(1.0, abs=1e-9)


def test_fixed_point_is_principal_eigenvector(rng):
    forms = random_forms(rng, n=2, k=1, m=1)
    params = unit_params()
    eps, delta = np.full(1, 1e-4), np.full((1, 1), 1e-4)
    res = solve_fbl(forms, eps, delta, params, GpiSettings(tol=1e-10, max_iter=500))
    pair = assemble_kkt(res.f, forms, bound_coeffs_at(res.f, forms, eps, delta, params), params)
    a, b = pair.dense(scaled=True)
    v = eigh(a, b)[1][:, -1]
    v /= np.linalg.norm(v)
    assert abs(np.vdot(v, res.f)) >= 1 - 1e-6


def test_se_max_single_user(rng):
    forms = random_forms(rng, n=4, k=1, m=2)
    res = gpi_solve_se_max(forms, np.full(1, 1e-5), unit_params(),
                           GpiSettings(tol=1e-12, max_iter=50))
    h = np.linalg.eigh(forms.user_terms[0])[1][:, -1]
    assert abs(np.vdot(h, res.f)) == pytest.approx(1.0, abs=1e-9)


class TestInfiniteBlocklength:
    def test_coefficients(self, rng):
        forms = random_forms(rng)
        f = random_unit(rng, 8)
        p = FblParams(power=1.0, noise_user=0.1, noise_eve=0.1, blocklength=math.inf)
        c = bound_coeffs_at(f, forms, 1e-6, 1e-6, p)
        np.testing.assert_array_equal(c.omega_user, 1.0)
        np.testing.assert_array_equal(c.psi_eve, 0.0)
        np.testing.assert_allclose(c.omega_eve, 10 / math.log(2))

    def test_r_inf_properties(self):
        cfg = ScenarioConfig()
        ch = generate_drop(cfg, 11)
        params = cfg.fbl_params()
        forms = build_forms(ch, params)
        res = gpi_solve_infinite_L(forms, params)
        assert res.r_inf == pytest.approx(infinite_sum_secrecy(res.f, forms))
        eps, delta = np.full(4, 1e-6), np.full((4, 4), 1e-6)
        assert res.r_inf >= np.sum(secrecy_rate_exact(res.f, ch, eps, delta, params))
        # no dependence on the reliability inputs or the finite blocklength
        again = gpi_solve_infinite_L(forms, FblParams(**{**params.__dict__, "blocklength": 50}))
        assert again.r_inf == res.r_inf
