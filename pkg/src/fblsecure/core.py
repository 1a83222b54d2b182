"""Scalar primitives for finite-blocklength secrecy analysis.

Gaussian tail function and its inverse, channel dispersion, the LogSumExp
smooth maximum, tangent-line coefficients for the dispersion square root,
and the finite-blocklength secrecy rate itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

LOG2E = 1.0 / math.log(2.0)
#: Asymptote of the i.i.d. Gaussian dispersion, 2 (log2 e)^2.
DISPERSION_MAX = 2.0 * LOG2E**2
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FblParams:
    """Link-level parameters shared by every optimizer.

    ``blocklength`` may be ``math.inf`` to request the infinite-blocklength
    limit, in which case every back-off term vanishes.
    """

    blocklength: float = 200
    power: float = 0.1
    noise_user: float = 1e-13
    noise_eve: float = 1e-13
    alpha: float = 10.0
    weight: float = 0.01

    def __post_init__(self):
        if not self.blocklength >= 1:
            raise ValueError(f"blocklength must be >= 1, got {self.blocklength}")
        if math.isfinite(self.blocklength) and self.blocklength != int(self.blocklength):
            raise ValueError("blocklength must be an integer or inf")
        for name in ("power", "noise_user", "noise_eve", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")

    @property
    def inv_sqrt_blocklength(self) -> float:
        return 0.0 if math.isinf(self.blocklength) else 1.0 / math.sqrt(self.blocklength)

    @property
    def user_load(self) -> float:
        """Noise-to-power loading sigma^2 / P of the legitimate links."""
        return self.noise_user / self.power

    @property
    def eve_load(self) -> float:
        return self.noise_eve / self.power


def gaussian_q(x):
    """Standard normal upper tail probability Q(x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)[()]


# Rational approximation of the lower-tail normal quantile (P. J. Acklam),
# relative error 1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam_upper(p: np.ndarray) -> np.ndarray:
    # quantile of the upper tail: x with Q(x) = p
    x = np.empty_like(p)
    low = p < _P_LOW
    high = p > 1.0 - _P_LOW
    mid = ~(low | high)

    if low.any():
        q = np.sqrt(-2.0 * np.log(p[low]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[low] = -num / den
    if high.any():
        q = np.sqrt(-2.0 * np.log1p(-p[high]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[high] = num / den
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = -num / den
    return x


def gaussian_q_inv(p):
    """Inverse of the Gaussian tail function, accurate deep into the tail.

    A rational approximation of the normal quantile is polished with one
    Halley step on Q itself, which brings the round trip ``Q(Q^-1(p))`` to
    near machine precision for ``1e-300 <= p < 1``.

    Raises
    ------
    ValueError
        If any ``p`` is outside the open interval (0, 1).
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("gaussian_q_inv requires 0 < p < 1")
    flat = np.atleast_1d(p).astype(float)
    # work in the lower tail; 1 - p is exact for p > 1/2
    upper = flat > 0.5
    flat = np.where(upper, 1.0 - flat, flat)
    x = _acklam_upper(flat)
    # Halley step on g(x) = Q(x) - p, g' = -phi(x), g'' = x phi(x)
    err = 0.5 * erfc(x / _SQRT2) - flat
    u = -err * _SQRT2PI * np.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    x[flat == 0.5] = 0.0
    x[upper] = -x[upper]
    return x.reshape(p.shape)[()]


def dispersion(rho):
    """Channel dispersion ``2 rho / (1 + rho) (log2 e)^2`` of an i.i.d. Gaussian code."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("dispersion requires a nonnegative SINR")
    return (DISPERSION_MAX * rho / (1.0 + rho))[()]


def smooth_max(values, alpha: float) -> float:
    """LogSumExp approximation ``(1/alpha) ln sum exp(alpha x_i)`` of the maximum.

    Evaluated with the maximum shifted out, so it never overflows. The
    result lies in ``[max, max + ln(M)/alpha]``.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("smooth_max of an empty sequence")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    top = x.max()
    return float(top + np.log(np.sum(np.exp(alpha * (x - top)))) / alpha)


def lemma1_coeffs(rho_lin):
    """Slope and intercept of the tangent bound on ``sqrt(2x/(1+x))``.

    Returns ``(q, r)`` such that ``sqrt(2x/(1+x)) <= q ln(1+x) + r`` for all
    ``x > 0``, with equality at ``x = rho_lin``.
    """
    rho_lin = np.asarray(rho_lin, dtype=float)
    if np.any(~(rho_lin > 0)):
        raise ValueError("linearization point must be positive")
    q = 1.0 / np.sqrt(2.0 * rho_lin * (1.0 + rho_lin))
    r = np.sqrt(2.0 * rho_lin / (1.0 + rho_lin)) - q * np.log1p(rho_lin)
    return q[()], r[()]


def backoff(rho, prob, blocklength: float):
    """Rate back-off ``sqrt(V(rho)/L) Q^-1(prob)`` in bits per channel use."""
    if math.isinf(blocklength):
        return np.zeros(np.broadcast(np.asarray(rho), np.asarray(prob)).shape)[()]
    return (np.sqrt(dispersion(rho) / blocklength) * gaussian_q_inv(prob))[()]


def secrecy_rate_from_sinr(rho_user, rho_eve, eps, delta, blocklength: float) -> np.ndarray:
    """Per-user finite-blocklength secrecy rate from SINRs.

    Parameters
    ----------
    rho_user : (K,) array
        Legitimate SINRs.
    rho_eve : (M, K) array
        SINR of eavesdropper ``m`` for the stream of user ``k``.
    eps : (K,) array
        Decoding error probabilities.
    delta : (M, K) array
        Information leakage levels.
    blocklength : float
        Coding length; ``inf`` drops the back-off terms.

    Returns
    -------
    (K,) array of raw secrecy rates, possibly negative.
    """
    rho_user = np.asarray(rho_user, dtype=float)
    rho_eve = np.asarray(rho_eve, dtype=float)
    legit = np.log2(1.0 + rho_user) - backoff(rho_user, eps, blocklength)
    wiretap = np.log2(1.0 + rho_eve) + backoff(rho_eve, delta, blocklength)
    return legit - wiretap.max(axis=0)


def stack_precoder(F) -> np.ndarray:
    """Stack an ``(N, K)`` precoding matrix column by column into ``(N*K,)``."""
    return np.asarray(F).T.ravel()


def unstack_precoder(f, n_antennas: int) -> np.ndarray:
    """Inverse of :func:`stack_precoder`: ``(N*K,)`` to ``(N, K)``."""
    f = np.asarray(f)
    return f.reshape(-1, n_antennas).T


def channel_sinrs(precoder, channels, params: FblParams):
    """Legitimate and wiretap SINRs evaluated straight from channel vectors.

    Returns ``(rho_user, rho_eve)`` with shapes ``(K,)`` and ``(M, K)``.
    """
    F = np.asarray(precoder)
    if F.ndim == 1:
        F = unstack_precoder(F, channels.n_antennas)
    # rx[k, j] = h_k^H f_j
    rx = np.abs(channels.h.conj() @ F) ** 2 * channels.gain_user[:, None]
    sig = np.diag(rx)
    rho_user = sig / (rx.sum(axis=1) - sig + params.user_load)
    ex = np.abs(channels.g.conj() @ F) ** 2 * channels.gain_eve[:, None]
    rho_eve = ex / (ex.sum(axis=1, keepdims=True) - ex + params.eve_load)
    return rho_user, rho_eve


def secrecy_rate_exact(precoder, channels, eps, delta, params: FblParams) -> np.ndarray:
    """Raw per-user secrecy rate of a stacked precoder under perfect CSI.

    ``precoder`` is either the stacked ``(N*K,)`` vector or the ``(N, K)``
    matrix whose columns are the per-user beams.
    """
    rho_user, rho_eve = channel_sinrs(precoder, channels, params)
    return secrecy_rate_from_sinr(rho_user, rho_eve, eps, delta, params.blocklength)


def clipped(rates):
    """Nonnegative part of secrecy rates, for reporting only."""
    return np.maximum(np.asarray(rates, dtype=float), 0.0)
