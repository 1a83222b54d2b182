"""Generalized power iteration for the secure precoder.

Stationary points of ``log2 lambda(f)`` satisfy ``A(f) f = lambda(f) B(f) f``
with Hermitian, block-diagonal, positive definite ``A`` and ``B``. The
iteration ``f <- normalize(B(f)^{-1} A(f) f)`` drives ``f`` towards the
principal eigenvector of that nonlinear pencil.

Internally the pencil is kept without the scalar factors ``lambda_num`` and
``lambda_den`` (``A_KKT = A~ lambda_num``, ``B_KKT = B~ lambda_den``). Those
only rescale the update, and carrying them in log domain avoids overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .core import LOG2E, FblParams
from .forms import (
    OMEGA_FLOOR,
    BoundCoefficients,
    QuadraticFormSet,
    bound_coeffs_at,
    mrt_init,
    objective_log_lambda,
    without_eves,
)

CoeffProvider = Callable[[np.ndarray], BoundCoefficients]


class KktError(FloatingPointError):
    """Raised when the KKT pencil contains non-finite entries."""


@dataclass(frozen=True)
class GpiSettings:
    """Stopping rule and coefficient policy of the power iteration.

    With ``refresh`` (the default) the linearization points follow the
    current iterate; otherwise they stay at the starting precoder.
    """

    tol: float = 0.01
    max_iter: int = 15
    omega_floor: float = OMEGA_FLOOR
    refresh: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class GpiResult:
    """Outcome of one power-iteration run.

    ``kkt_residual`` is ``||B~^-1 A~ f - f||``, which equals
    ``||B_KKT^-1 A_KKT f - lambda f|| / lambda`` for unit-norm ``f``.
    """

    f: np.ndarray
    trajectory: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    kkt_residual: float = math.nan
    steps: list = field(default_factory=list)
    r_inf: float | None = None

    @property
    def log2_lambda(self) -> float:
        return self.trajectory[-1] if self.trajectory else math.nan


@dataclass(frozen=True)
class KktPair:
    """Block-diagonal KKT pencil at one precoder.

    ``a_blocks`` and ``b_blocks`` hold the ``K`` diagonal ``N x N`` blocks of
    ``A~`` and ``B~``. ``log_num`` and ``log_den`` are ``ln lambda_num`` and
    ``ln lambda_den``.
    """

    a_blocks: np.ndarray
    b_blocks: np.ndarray
    log_num: float
    log_den: float

    @property
    def log2_lambda(self) -> float:
        return (self.log_num - self.log_den) * LOG2E

    def apply_a(self, f) -> np.ndarray:
        fb = np.asarray(f).reshape(self.a_blocks.shape[:2])
        return np.einsum("jnp,jp->jn", self.a_blocks, fb).ravel()

    def apply_b(self, f) -> np.ndarray:
        fb = np.asarray(f).reshape(self.b_blocks.shape[:2])
        return np.einsum("jnp,jp->jn", self.b_blocks, fb).ravel()

    def solve_b(self, rhs) -> np.ndarray:
        return block_cholesky_solve(self.b_blocks, rhs)

    def dense(self, scaled: bool = False):
        """Dense ``(A, B)``; with ``scaled`` the factors ``lambda_num/den`` are applied."""
        from scipy.linalg import block_diag

        a = block_diag(*self.a_blocks)
        b = block_diag(*self.b_blocks)
        if scaled:
            a = a * math.exp(self.log_num)
            b = b * math.exp(self.log_den)
        return a, b


def block_cholesky_solve(blocks: np.ndarray, rhs) -> np.ndarray:
    """Solve a Hermitian positive definite block-diagonal system block by block.

    Cost is ``K`` Cholesky factorizations of ``N x N`` blocks instead of one
    ``NK x NK`` factorization.
    """
    k, n, _ = blocks.shape
    rb = np.asarray(rhs).reshape(k, n)
    out = np.empty_like(rb, dtype=np.result_type(blocks, rb))
    for j in range(k):
        out[j] = cho_solve(cho_factor(blocks[j], lower=True, check_finite=False), rb[j],
                           check_finite=False)
    return out.ravel()


def assemble_kkt(f, forms: QuadraticFormSet, coeffs: BoundCoefficients,
                 params: FblParams) -> KktPair:
    """Blocks of the KKT pencil at ``f`` for the given bound coefficients."""
    k, n, m = forms.n_users, forms.n_antennas, forms.n_eves
    fAf, fBf, fCf, fDf, _, _ = forms.values(f)
    lr_user = np.log(fAf / fBf)
    w_user = coeffs.omega_user * LOG2E
    a = w_user / fAf
    b = w_user / fBf
    eye = np.eye(n)

    A = np.broadcast_to(np.einsum("k,knp->np", a, forms.user_terms), (k, n, n)).copy()
    A += a.sum() * forms.user_load * eye
    B = np.einsum("k,knp->np", b, forms.user_terms)[None] - b[:, None, None] * forms.user_terms
    B += b.sum() * forms.user_load * eye
    log_num = float(np.sum(coeffs.omega_user * lr_user))
    log_den = 0.0

    if m:
        z = coeffs.log_beta + coeffs.omega_eve * np.log(fCf[:, None] / fDf)
        lse = logsumexp(z, axis=0)
        soft = np.exp(z - lse)
        e = soft * coeffs.omega_eve / params.alpha
        c_d = e / fDf  # (M, K)
        c_c = e / fCf[:, None]
        # A~ block j: sum_{m,k} c_d (E_m + n_e I) minus the k = j rank term
        tot_d = c_d.sum(axis=1)
        A += np.einsum("mj,mnp->jnp", tot_d[:, None] - c_d, forms.eve_terms)
        A += c_d.sum() * forms.eve_load * eye
        tot_c = c_c.sum(axis=1)
        B += np.einsum("m,mnp->np", tot_c, forms.eve_terms)[None]
        B += c_c.sum() * forms.eve_load * eye
        log_den = float(np.sum(lse)) * math.log(2.0) / params.alpha

    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise KktError("non-finite entries in the KKT pencil; check the coefficient scaling")
    return KktPair(A, B, log_num, log_den)


def kkt_gradient(f, forms, coeffs, params) -> np.ndarray:
    """Wirtinger gradient of ``ln lambda`` with respect to ``conj(f)``."""
    pair = assemble_kkt(f, forms, coeffs, params)
    return math.log(2.0) * (pair.apply_a(f) - pair.apply_b(f))


def fix_phase(f: np.ndarray) -> np.ndarray:
    """Rotate ``f`` so its largest-magnitude entry is real and positive."""
    i = int(np.argmax(np.abs(f)))
    a = f[i]
    return f * (abs(a) / a) if a != 0 else f


def align_phase(f: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Rotate ``f`` by the global phase that brings it closest to ``ref``."""
    c = np.vdot(ref, f)
    return f * (abs(c) / c).conjugate() if c != 0 else f


def _normalize(f):
    return f / np.linalg.norm(f)


def kkt_residual(f, forms, coeffs, params) -> float:
    pair = assemble_kkt(f, forms, coeffs, params)
    return float(np.linalg.norm(pair.solve_b(pair.apply_a(f)) - f) / np.linalg.norm(f))


def fbl_coeff_provider(forms, eps, delta, params, settings: GpiSettings) -> CoeffProvider:
    """Coefficients at the current iterate for fixed ``(eps, Delta)``.

    When ``settings.refresh`` is off, the first evaluation is cached and
    reused for every later iterate.
    """
    frozen = []

    def provider(f):
        if settings.refresh or not frozen:
            c = bound_coeffs_at(f, forms, eps, delta, params, settings.omega_floor)
            if not settings.refresh:
                frozen.append(c)
            return c
        return frozen[0]
    return provider


def gpi_solve(forms: QuadraticFormSet, coeffs_provider: CoeffProvider, settings: GpiSettings,
              f0, params: FblParams) -> GpiResult:
    """Run the power iteration from ``f0``.

    Each new iterate is rotated onto the previous one before the step
    ``||f_t - f_{t-1}||`` is measured, so a global phase never counts as
    movement. Stops once the step is ``<= settings.tol`` or after
    ``settings.max_iter`` updates. If it does not converge, the iterate with
    the largest ``log2 lambda`` is returned.
    """
    f = fix_phase(_normalize(np.asarray(f0, dtype=complex)))
    coeffs = coeffs_provider(f)
    traj = [objective_log_lambda(f, forms, coeffs, params)]
    iterates = [f]
    steps = []
    converged = False
    t = 0
    for t in range(1, settings.max_iter + 1):
        pair = assemble_kkt(f, forms, coeffs, params)
        f_new = align_phase(_normalize(pair.solve_b(pair.apply_a(f))), f)
        step = float(np.linalg.norm(f_new - f))
        f = f_new
        coeffs = coeffs_provider(f)
        traj.append(objective_log_lambda(f, forms, coeffs, params))
        iterates.append(f)
        steps.append(step)
        if step <= settings.tol:
            converged = True
            break
    if not converged:
        best = int(np.argmax(traj))
        f = iterates[best]
        coeffs = coeffs_provider(f)
    res = kkt_residual(f, forms, coeffs, params)
    return GpiResult(f=fix_phase(f), trajectory=traj, iterations=t, converged=converged,
                     kkt_residual=res, steps=steps)


def solve_fbl(forms, eps, delta, params, settings: GpiSettings = GpiSettings(),
              f0=None) -> GpiResult:
    """Secure precoder for fixed error probabilities and leakage levels."""
    f0 = mrt_init(forms) if f0 is None else f0
    provider = fbl_coeff_provider(forms, eps, delta, params, settings)
    return gpi_solve(forms, provider, settings, f0, params)


def infinite_sum_secrecy(f, forms: QuadraticFormSet) -> float:
    """Sum over users of ``R_k - max_m R^e_mk`` with no back-off."""
    rho_user, rho_eve = forms.sinrs(f)
    return float(np.sum(np.log2(1.0 + rho_user) - np.log2(1.0 + rho_eve).max(axis=0)))


def gpi_solve_infinite_L(forms: QuadraticFormSet, params: FblParams,
                         settings: GpiSettings = GpiSettings(), f0=None) -> GpiResult:
    """Power iteration with every back-off term removed.

    The returned result carries ``r_inf``, the infinite-blocklength sum
    secrecy rate at the final precoder, which normalizes the weighted-sum
    objective.
    """
    p_inf = _with_blocklength(params, math.inf)
    k, m = forms.n_users, forms.n_eves
    half_user = np.full(k, 0.5)
    half_eve = np.full((m, k), 0.5)
    res = solve_fbl(forms, half_user, half_eve, p_inf, settings, f0)
    res.r_inf = infinite_sum_secrecy(res.f, forms)
    return res


def gpi_solve_se_max(forms: QuadraticFormSet, eps, params: FblParams,
                     settings: GpiSettings = GpiSettings(), f0=None) -> GpiResult:
    """Finite-blocklength sum-rate precoder that ignores the eavesdroppers."""
    bare = without_eves(forms)
    k = forms.n_users
    return solve_fbl(bare, eps, np.zeros((0, k)), params, settings,
                     mrt_init(forms) if f0 is None else f0)


def _with_blocklength(params: FblParams, blocklength) -> FblParams:
    from dataclasses import replace

    return replace(params, blocklength=blocklength)
