"""Block-diagonal quadratic forms of the stacked precoder.

For a stacked precoder ``f = [f_1; ...; f_K]`` every SINR in the network is a
ratio of two quadratic forms whose matrices are block diagonal with ``K``
blocks of size ``N x N``. Each of those matrices is the noise loading times
the identity plus a rank term repeated over blocks, with one block removed
for the interference-only forms. :class:`QuadraticFormSet` keeps only those
per-link terms and evaluates the forms without ever assembling an
``NK x NK`` matrix.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import LOG2E, FblParams, gaussian_q_inv, lemma1_coeffs, unstack_precoder

log = logging.getLogger(__name__)

OMEGA_FLOOR = 1e-3
RHO_LIN_FLOOR = 1e-9


@dataclass(frozen=True)
class QuadraticFormSet:
    """Per-link data behind the matrices ``A_k, B_k, C_m, D_mk``.

    ``A_k`` repeats ``user_terms[k] + user_load I`` on every block, ``B_k``
    drops the rank term from block ``k``. ``C_m`` and ``D_mk`` are built the
    same way from ``eve_terms[m]`` and ``eve_load``. With perfect CSIT the
    eavesdropper terms are ``gamma g g^H``, with covariance CSIT they are
    ``gamma R``.
    """

    user_terms: np.ndarray  # (K, N, N)
    eve_terms: np.ndarray  # (M, N, N)
    user_load: float
    eve_load: float
    partial: bool = False

    @property
    def n_antennas(self) -> int:
        return self.user_terms.shape[1]

    @property
    def n_users(self) -> int:
        return self.user_terms.shape[0]

    @property
    def n_eves(self) -> int:
        return self.eve_terms.shape[0]

    def blocks(self, f) -> np.ndarray:
        """Per-block view ``(K, N)`` of a stacked precoder."""
        return np.asarray(f).reshape(self.n_users, self.n_antennas)

    def values(self, f):
        """Quadratic form values at ``f``.

        Returns ``(fAf, fBf, fCf, fDf, q_user, q_eve)`` where ``fAf, fBf`` are
        ``(K,)``, ``fCf`` is ``(M,)``, ``fDf`` is ``(M, K)`` and
        ``q_user[k, j] = f_j^H U_k f_j``, ``q_eve[m, j] = f_j^H E_m f_j``.
        """
        fb = self.blocks(f)
        power = float(np.vdot(fb, fb).real)
        q_user = np.einsum("jn,knp,jp->kj", fb.conj(), self.user_terms, fb).real
        q_eve = np.einsum("jn,mnp,jp->mj", fb.conj(), self.eve_terms, fb).real
        # PSD forms; rounding can leave tiny negatives after exact nulling
        q_user = np.maximum(q_user, 0.0)
        q_eve = np.maximum(q_eve, 0.0)
        fAf = self.user_load * power + q_user.sum(axis=1)
        fBf = fAf - np.diag(q_user)
        fCf = self.eve_load * power + q_eve.sum(axis=1)
        fDf = fCf[:, None] - q_eve
        return fAf, fBf, fCf, fDf, q_user, q_eve

    def sinrs(self, f):
        """``(rho_user, rho_eve)`` of shapes ``(K,)`` and ``(M, K)``."""
        _, fBf, _, fDf, q_user, q_eve = self.values(f)
        return np.diag(q_user) / fBf, q_eve / fDf

    def log_ratios(self, f):
        """Natural logs of ``fAf/fBf`` (K,) and ``fCf/fDf`` (M, K), i.e. ``ln(1 + SINR)``."""
        rho_user, rho_eve = self.sinrs(f)
        return np.log1p(rho_user), np.log1p(rho_eve)

    def dense(self):
        """Dense ``(A, B, C, D)`` stacks. For tests and small oracles only."""
        k, n = self.n_users, self.n_antennas
        eye = np.eye(n * k)

        def tiled(term):
            return np.kron(np.eye(k), term)

        def one_block(term, j):
            out = np.zeros((n * k, n * k), dtype=complex)
            out[j * n:(j + 1) * n, j * n:(j + 1) * n] = term
            return out

        A = np.stack([tiled(u) + self.user_load * eye for u in self.user_terms])
        B = np.stack([A[j] - one_block(self.user_terms[j], j) for j in range(k)])
        C = np.stack([tiled(e) + self.eve_load * eye for e in self.eve_terms])
        D = np.stack([[C[m] - one_block(self.eve_terms[m], j) for j in range(k)]
                      for m in range(self.n_eves)]).reshape(self.n_eves, k, n * k, n * k)
        return A, B, C, D


def _outer_terms(vectors, gains):
    v = np.asarray(vectors)
    return np.asarray(gains)[:, None, None] * np.einsum("kn,kp->knp", v, v.conj())


def build_forms(channels, params: FblParams) -> QuadraticFormSet:
    """Forms for perfect CSIT of every legitimate and wiretap channel."""
    return QuadraticFormSet(
        user_terms=_outer_terms(channels.h, channels.gain_user),
        eve_terms=_outer_terms(channels.g, channels.gain_eve),
        user_load=params.user_load,
        eve_load=params.eve_load,
    )


def build_forms_partial(channels, params: FblParams) -> QuadraticFormSet:
    """Forms when only the wiretap covariances are known at the transmitter."""
    if channels.cov_eve is None:
        raise ValueError("covariance CSIT requires wiretap covariances")
    return QuadraticFormSet(
        user_terms=_outer_terms(channels.h, channels.gain_user),
        eve_terms=np.asarray(channels.gain_eve)[:, None, None] * np.asarray(channels.cov_eve),
        user_load=params.user_load,
        eve_load=params.eve_load,
        partial=True,
    )


def without_eves(forms: QuadraticFormSet) -> QuadraticFormSet:
    """Same legitimate links with the eavesdropper set emptied."""
    n = forms.n_antennas
    return QuadraticFormSet(forms.user_terms, np.zeros((0, n, n), dtype=complex),
                            forms.user_load, forms.eve_load, forms.partial)


@dataclass(frozen=True)
class BoundCoefficients:
    """Scalars of the smoothed lower bound at one linearization point.

    ``omega_user`` is clamped to ``[OMEGA_FLOOR, 1]`` and drives the precoder
    update; ``omega_user_raw`` is the unclamped value that keeps the bound
    valid and is used when the bound itself is reported.
    """

    omega_user: np.ndarray  # (K,)
    omega_user_raw: np.ndarray  # (K,)
    omega_eve: np.ndarray  # (M, K)
    psi_user: np.ndarray  # (K,)
    psi_eve: np.ndarray  # (M, K)
    log_beta: np.ndarray  # (M, K), equals alpha * psi_eve
    rho_lin_user: np.ndarray
    rho_lin_eve: np.ndarray


def bound_coeffs(rho_lin_user, rho_lin_eve, eps, delta, params: FblParams,
                 omega_floor: float = OMEGA_FLOOR) -> BoundCoefficients:
    """Bound coefficients for explicit linearization points."""
    rho_lin_user = np.maximum(np.asarray(rho_lin_user, dtype=float), RHO_LIN_FLOOR)
    rho_lin_eve = np.maximum(np.asarray(rho_lin_eve, dtype=float), RHO_LIN_FLOOR)
    scale = params.inv_sqrt_blocklength
    if scale == 0.0:
        qe = np.zeros_like(rho_lin_user)
        qd = np.zeros_like(rho_lin_eve)
    else:
        qe = gaussian_q_inv(np.broadcast_to(eps, rho_lin_user.shape)) * scale
        qd = gaussian_q_inv(np.broadcast_to(delta, rho_lin_eve.shape)) * scale
    q_u, r_u = lemma1_coeffs(rho_lin_user)
    q_e, r_e = lemma1_coeffs(rho_lin_eve)
    raw = 1.0 - qe * q_u
    omega = np.clip(raw, omega_floor, 1.0)
    if np.any(raw < omega_floor):
        log.warning("user rate weight clamped to %g for %d user(s)", omega_floor,
                    int(np.sum(raw < omega_floor)))
    omega_eve = params.alpha * LOG2E * (1.0 + qd * q_e)
    psi_user = qe * LOG2E * r_u
    psi_eve = qd * LOG2E * r_e
    return BoundCoefficients(
        omega_user=np.atleast_1d(omega), omega_user_raw=np.atleast_1d(raw),
        omega_eve=np.atleast_2d(omega_eve), psi_user=np.atleast_1d(psi_user),
        psi_eve=np.atleast_2d(psi_eve), log_beta=np.atleast_2d(params.alpha * psi_eve),
        rho_lin_user=rho_lin_user, rho_lin_eve=rho_lin_eve,
    )


def bound_coeffs_at(f, forms: QuadraticFormSet, eps, delta, params: FblParams,
                    omega_floor: float = OMEGA_FLOOR) -> BoundCoefficients:
    """Bound coefficients linearized at the SINRs of precoder ``f``."""
    rho_user, rho_eve = forms.sinrs(f)
    return bound_coeffs(rho_user, rho_eve, eps, delta, params, omega_floor)


def _eve_log_terms(log_c_over_d, coeffs):
    # ln(beta_mk) + omega_mk ln(fCf / fDf), shape (M, K)
    return coeffs.log_beta + coeffs.omega_eve * log_c_over_d


def eve_softmax(f, forms: QuadraticFormSet, coeffs: BoundCoefficients) -> np.ndarray:
    """Softmax weights over eavesdroppers, per user, shape ``(M, K)``."""
    _, lr_eve = forms.log_ratios(f)
    z = _eve_log_terms(lr_eve, coeffs)
    return np.exp(z - logsumexp(z, axis=0, keepdims=True))


def _per_user_terms(f, forms, coeffs, params, omega):
    lr_user, lr_eve = forms.log_ratios(f)
    user = omega * lr_user * LOG2E
    if forms.n_eves == 0:
        return user, np.zeros_like(user)
    eve = logsumexp(_eve_log_terms(lr_eve, coeffs), axis=0) / params.alpha
    return user, eve


def objective_log_lambda(f, forms: QuadraticFormSet, coeffs: BoundCoefficients,
                         params: FblParams) -> float:
    """``log2 lambda(f)``: the product-of-Rayleigh-quotients objective.

    Invariant to scaling and global phase of ``f``. Uses the clamped user
    weights, i.e. the quantity the power iteration ascends.
    """
    user, eve = _per_user_terms(f, forms, coeffs, params, coeffs.omega_user)
    return float(np.sum(user - eve))


def secrecy_lb(f, forms: QuadraticFormSet, coeffs: BoundCoefficients,
               params: FblParams) -> np.ndarray:
    """Per-user smoothed lower bound on the secrecy rate, in bits."""
    user, eve = _per_user_terms(f, forms, coeffs, params, coeffs.omega_user_raw)
    return user - coeffs.psi_user - eve


def sum_secrecy_from_forms(f, forms: QuadraticFormSet, eps, delta, params: FblParams) -> float:
    """Sum secrecy rate evaluated through the forms (covariance-based if partial)."""
    from .core import secrecy_rate_from_sinr

    rho_user, rho_eve = forms.sinrs(f)
    return float(np.sum(secrecy_rate_from_sinr(rho_user, rho_eve, eps, delta, params.blocklength)))


def mrt_init(forms: QuadraticFormSet) -> np.ndarray:
    """Stacked, unit-norm maximum-ratio precoder built from the user terms.

    Each ``f_k`` is the principal eigenvector of the ``k``-th user term scaled
    by its eigenvalue, which for rank-one terms is ``sqrt(gamma_k) h_k``.
    """
    cols = []
    for term in forms.user_terms:
        w, v = np.linalg.eigh(term)
        cols.append(v[:, -1] * math.sqrt(max(w[-1], 0.0)))
    f = np.concatenate(cols)
    return f / np.linalg.norm(f)


def as_matrix(f, forms: QuadraticFormSet) -> np.ndarray:
    return unstack_precoder(f, forms.n_antennas)
