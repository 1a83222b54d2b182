import math
from dataclasses import replace

import numpy as np
import pytest

from fblsecure.channel import ScenarioConfig, drop_seed, generate_drop
from fblsecure.core import secrecy_rate_exact
from fblsecure.forms import build_forms, build_forms_partial, mrt_init
from fblsecure.gpi import GpiSettings, gpi_solve_infinite_L, solve_fbl
from fblsecure.joint import (CsitMode, JointSettings, joint_solve, rate_scale, solve_fixed,
                             weighted_objective)
from fblsecure.reliability import make_caps


@pytest.fixture(scope="module")
def drops():
    cfg = ScenarioConfig()
    return cfg, [generate_drop(cfg, drop_seed(5, i)) for i in range(12)]


def test_weighted_objective_straight_line(drops):
    cfg, chs = drops
    ch = chs[0]
    params = cfg.fbl_params()
    rng = np.random.default_rng(0)
    f = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    f /= np.linalg.norm(f)
    eps_cap, delta_cap = make_caps(4, 4)
    eps, delta = eps_cap * 0.3, delta_cap * 0.7
    w, r_inf = params.weight, 17.5
    rates = secrecy_rate_exact(f, ch, eps, delta, params)
    ref = (w / r_inf * sum(rates)
           + (1 - w) * ((2e-6 - eps.max()) / 2e-6 + (2e-6 - delta.max()) / 2e-6))
    got = weighted_objective(f, eps, delta, r_inf, eps_cap, delta_cap, params, ch)
    assert got == pytest.approx(ref, abs=1e-12)


def test_weighted_objective_limits(drops):
    cfg, chs = drops
    ch = chs[1]
    eps_cap, delta_cap = make_caps(4, 4)
    f = mrt_init(build_forms(ch, cfg.fbl_params()))
    eps, delta = eps_cap / 2, delta_cap / 4
    p1 = cfg.fbl_params(weight=1.0)
    total = np.sum(secrecy_rate_exact(f, ch, eps, delta, p1))
    assert weighted_objective(f, eps, delta, 12.0, eps_cap, delta_cap, p1, ch) == pytest.approx(
        total / 12.0)
    p0 = cfg.fbl_params(weight=0.0)
    assert weighted_objective(f, eps, delta, 12.0, eps_cap, delta_cap, p0, ch) == pytest.approx(
        2 - eps.max() / 2e-6 - delta.max() / 2e-6)


def test_weighted_objective_from_forms(drops):
    cfg, chs = drops
    params = cfg.fbl_params()
    forms = build_forms(chs[2], params)
    f = mrt_init(forms)
    eps_cap, delta_cap = make_caps(4, 4)
    a = weighted_objective(f, eps_cap, delta_cap, 9.0, eps_cap, delta_cap, params, forms)
    b = weighted_objective(f, eps_cap, delta_cap, 9.0, eps_cap, delta_cap, params, chs[2])
    assert a == pytest.approx(b, rel=1e-10)


def test_rate_scale():
    assert rate_scale(4.0) == 4.0
    assert rate_scale(0.0) == 1.0 and rate_scale(-2.0) == 1.0


def test_single_outer_rate_only(drops):
    cfg, chs = drops
    params = cfg.fbl_params(weight=1.0)
    settings = JointSettings(max_outer=1)
    res = joint_solve(chs[3], params, settings)
    eps_cap, delta_cap = make_caps(4, 4)
    # rate-only weight: the reliability step keeps every cap
    np.testing.assert_array_equal(res.eps, eps_cap)
    np.testing.assert_array_equal(res.delta, delta_cap)
    phase1 = solve_fbl(build_forms(chs[3], params), eps_cap, delta_cap, params, settings.gpi)
    if res.objective[1] > res.objective[0]:
        np.testing.assert_allclose(res.f, phase1.f, atol=1e-12)


def test_dominates_initial_point_and_terminates(drops):
    cfg, chs = drops
    params = cfg.fbl_params()
    eps_cap, delta_cap = make_caps(4, 4)
    for ch in chs:
        res = joint_solve(ch, params)
        assert 1 <= res.outer_iterations <= 5
        assert len(res.objective) == res.outer_iterations + 1
        start = weighted_objective(mrt_init(build_forms(ch, params)), eps_cap, delta_cap,
                                   rate_scale(res.r_inf), eps_cap, delta_cap, params, ch)
        assert max(res.objective) >= start - 1e-12
        assert res.objective[0] == pytest.approx(start)
        final = weighted_objective(res.f, res.eps, res.delta, rate_scale(res.r_inf), eps_cap,
                                   delta_cap, params, ch)
        assert final == pytest.approx(max(res.objective), rel=1e-12)
        assert np.all((res.eps > 0) & (res.eps <= eps_cap))
        assert np.all((res.delta > 0) & (res.delta <= delta_cap))
        assert res.max_error_prob == res.eps.max() and res.max_leakage == res.delta.max()
        assert res.sum_secrecy_rate == pytest.approx(
            np.sum(secrecy_rate_exact(res.f, ch, res.eps, res.delta, params)))


def test_r_inf_computed_once_and_reusable(drops):
    cfg, chs = drops
    params = cfg.fbl_params()
    forms = build_forms(chs[4], params)
    a = gpi_solve_infinite_L(forms, params).r_inf
    b = gpi_solve_infinite_L(forms, params).r_inf
    assert a == b
    full = joint_solve(chs[4], params)
    given = joint_solve(chs[4], params, r_inf=a)
    assert full.r_inf == a
    np.testing.assert_array_equal(full.f, given.f)
    assert full.objective == given.objective


def test_covariance_mode(drops):
    cfg, chs = drops
    params = cfg.fbl_params()
    res = joint_solve(chs[5], params, JointSettings(csit="covariance"))
    assert JointSettings(csit="covariance").csit is CsitMode.COVARIANCE
    forms = build_forms_partial(chs[5], params)
    assert res.r_inf == gpi_solve_infinite_L(forms, params).r_inf
    assert np.linalg.norm(res.f) == pytest.approx(1.0)


def test_custom_caps(drops):
    cfg, chs = drops
    caps = (np.full(4, 1e-3), np.full((4, 4), 1e-3))
    res = joint_solve(chs[6], cfg.fbl_params(), JointSettings(eps_cap=caps[0], delta_cap=caps[1]))
    assert res.max_error_prob <= 1e-3 and res.max_leakage <= 1e-3


def test_solve_fixed(drops):
    cfg, chs = drops
    params = cfg.fbl_params()
    res, forms = solve_fixed(chs[7], params)
    assert not forms.partial and np.linalg.norm(res.f) == pytest.approx(1.0)
    _, forms = solve_fixed(chs[7], params, JointSettings(csit="covariance"))
    assert forms.partial


@pytest.mark.parametrize("kw", [dict(tol_out=0.0), dict(max_outer=0), dict(csit="none")])
def test_invalid_settings(kw):
    with pytest.raises(ValueError):
        JointSettings(**kw)
