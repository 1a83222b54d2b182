"""Quick numerical self-checks against independent oracles.

These are a compact subset of the test suite that runs from an installed
package (no pytest needed). Each check returns ``(name, passed, detail)``.
"""

from __future__ import annotations

import math

import numpy as np


def _check_q_roundtrip():
    from .core import gaussian_q, gaussian_q_inv

    p = np.array([1e-300, 1e-100, 1e-11, 1e-6, 0.1, 0.4, 0.5])
    err = float(np.max(np.abs(gaussian_q(gaussian_q_inv(p)) / p - 1.0)))
    return "Q(Q^-1(p)) round trip", err <= 1e-12, f"max rel err {err:.2e}"


def _check_tangent_bound():
    from .core import lemma1_coeffs

    x = np.logspace(-3, 3, 2001)
    worst = math.inf
    for rt in (0.1, 1.0, 10.0):
        q, r = lemma1_coeffs(rt)
        worst = min(worst, float(np.min(q * np.log1p(x) + r - np.sqrt(2 * x / (1 + x)))))
    return "tangent bound dominance", worst >= -1e-12, f"min slack {worst:.2e}"


def _random_forms(rng, n=4, k=2, m=2):
    from .forms import QuadraticFormSet

    h = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    g = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    return QuadraticFormSet(np.einsum("kn,kp->knp", h, h.conj()),
                            0.5 * np.einsum("kn,kp->knp", g, g.conj()), 0.1, 0.1)


def _check_gradient():
    from .core import FblParams
    from .forms import bound_coeffs_at, objective_log_lambda
    from .gpi import kkt_gradient

    rng = np.random.default_rng(7)
    forms = _random_forms(rng)
    params = FblParams(power=1.0, noise_user=0.1, noise_eve=0.1)
    eps = np.full(2, 1e-3)
    delta = np.full((2, 2), 1e-3)
    f = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    f /= np.linalg.norm(f)
    coeffs = bound_coeffs_at(f, forms, eps, delta, params)
    grad = kkt_gradient(f, forms, coeffs, params)

    def obj(x):
        return objective_log_lambda(x, forms, coeffs, params) * math.log(2.0)

    h = 1e-6
    fd = np.empty_like(f)
    for i in range(f.size):
        e = np.zeros_like(f)
        e[i] = h
        d_re = (obj(f + e) - obj(f - e)) / (2 * h)
        d_im = (obj(f + 1j * e) - obj(f - 1j * e)) / (2 * h)
        fd[i] = 0.5 * (d_re + 1j * d_im)
    err = float(np.linalg.norm(fd - grad) / np.linalg.norm(grad))
    return "KKT gradient vs finite differences", err <= 1e-5, f"rel err {err:.2e}"


def _check_block_solve():
    from .gpi import block_cholesky_solve

    rng = np.random.default_rng(3)
    k, n = 4, 8
    x = rng.standard_normal((k, n, n)) + 1j * rng.standard_normal((k, n, n))
    blocks = np.einsum("knp,kqp->knq", x, x.conj()) + n * np.eye(n)
    rhs = rng.standard_normal(k * n) + 1j * rng.standard_normal(k * n)
    from scipy.linalg import block_diag

    dense = np.linalg.inv(block_diag(*blocks)) @ rhs
    err = float(np.max(np.abs(block_cholesky_solve(blocks, rhs) - dense)))
    return "block solve vs dense inverse", err <= 1e-10, f"max abs err {err:.2e}"


def _check_phase2_grid():
    from .core import gaussian_q_inv
    from .reliability import solve_levels

    rng = np.random.default_rng(11)
    caps = np.sort(rng.uniform(1e-6, 2e-6, 4))
    disp = rng.uniform(0.5, 4.0, 4)
    r_inf, w, L = 20.0, 0.01, 200
    st = solve_levels(disp, np.zeros((0, 4)), caps, np.zeros((0, 4)), r_inf, w, L)
    grid = np.logspace(-15, math.log10(caps.max()), 100001)
    cost = [(w / r_inf) * np.sum(np.sqrt(disp / L) * gaussian_q_inv(np.minimum(caps, t)))
            + (1 - w) * t / caps.max() for t in grid]
    t_grid = grid[int(np.argmin(cost))]
    rel = abs(st.tau - t_grid) / t_grid
    step = grid[1] / grid[0] - 1.0
    return "reliability step vs grid search", rel <= 2 * step, f"rel gap {rel:.2e}"


def _check_zf_eve():
    from .baselines import baseline_precoder, strongest_eves
    from .channel import ScenarioConfig, generate_drop
    from .core import unstack_precoder

    cfg = ScenarioConfig(n_antennas=16, n_eves=12)
    ch = generate_drop(cfg, 0)
    F = unstack_precoder(baseline_precoder("zf-eve", ch, cfg.fbl_params()), 16)
    worst = float(np.max(np.abs(ch.g[strongest_eves(ch, 12)].conj() @ F)))
    return "ZF-EVE wiretap nulling", worst <= 1e-10, f"max |g^H f| {worst:.2e}"


CHECKS = (_check_q_roundtrip, _check_tangent_bound, _check_gradient, _check_block_solve,
          _check_phase2_grid, _check_zf_eve)


def run_selftest() -> list:
    out = []
    for check in CHECKS:
        try:
            out.append(check())
        except Exception as exc:  # report, do not abort the remaining checks
            out.append((check.__name__.lstrip("_"), False, f"{type(exc).__name__}: {exc}"))
    return out
