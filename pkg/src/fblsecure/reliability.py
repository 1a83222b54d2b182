"""Closed-form error probabilities and leakage levels for a fixed precoder.

With the precoder fixed, only the back-off terms of the secrecy rate depend
on ``(eps, Delta)``. Bounding the max over eavesdroppers by their sum splits
the weighted problem into two independent one-dimensional problems, one in
the common maximum error probability ``tau`` and one in the common maximum
leakage ``xi``::

    g(tau) = (w / R_inf) sum_k sqrt(V_k / L) Q^-1(min(eps_cap_k, tau))
             + (1 - w) tau / eps_cap_max

Each user takes ``eps_k = min(eps_cap_k, tau)``. ``Q^-1`` is convex and
decreasing on ``(0, 1/2)`` and the ``min`` is concave, so ``g`` is convex.
Its minimizer is either a stationary point inside one of the intervals cut
out by the sorted caps (the closed form below) or one of the caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FblParams, dispersion, gaussian_q, gaussian_q_inv
from .forms import QuadraticFormSet

#: Smallest probability handed out; keeps ``Q^-1`` finite when ``w -> 0``.
PROB_FLOOR = 1e-300
_SQRT2PI = math.sqrt(2.0 * math.pi)


class CapSaturated(ValueError):
    """The closed form has no solution: every cap is active."""


@dataclass(frozen=True)
class ReliabilityState:
    """Error probabilities, leakage levels and the caps they respect.

    ``ell`` is the 1-based position, in ascending cap order, of the first
    user whose error probability equals ``tau``, i.e. one plus the number of
    caps strictly below ``tau``. ``j`` holds the same index per column of
    ``delta``.
    """

    eps: np.ndarray  # (K,)
    delta: np.ndarray  # (M, K)
    eps_cap: np.ndarray
    delta_cap: np.ndarray
    ell: int
    j: np.ndarray

    @property
    def tau(self) -> float:
        return float(np.max(self.eps))

    @property
    def xi(self) -> float:
        return float(np.max(self.delta)) if self.delta.size else 0.0

    @classmethod
    def at_caps(cls, eps_cap, delta_cap) -> "ReliabilityState":
        eps_cap = np.asarray(eps_cap, dtype=float)
        delta_cap = np.asarray(delta_cap, dtype=float)
        ell = 1 + int(np.sum(eps_cap < eps_cap.max()))
        if delta_cap.size:
            j = 1 + np.sum(delta_cap < delta_cap.max(), axis=0)
        else:
            j = np.ones(eps_cap.size, dtype=int)
        return cls(eps_cap.copy(), delta_cap.copy(), eps_cap, delta_cap, ell, j)


def _log_arg(sqrt_disp_sum, r_inf, w, cap_max, blocklength):
    if not (0.0 < w):
        return math.inf
    if r_inf <= 0 or w >= 1.0:
        return 0.0
    if sqrt_disp_sum <= 0:
        return math.inf
    return math.sqrt(blocklength) * (1.0 - w) * r_inf / (cap_max * w * _SQRT2PI * sqrt_disp_sum)


def _closed_form(sqrt_disp_sum, r_inf, w, cap_max, blocklength) -> float:
    arg = _log_arg(sqrt_disp_sum, r_inf, w, cap_max, blocklength)
    if not arg > 1.0:
        raise CapSaturated(f"log argument {arg:.6g} <= 1")
    if math.isinf(arg):
        return PROB_FLOOR
    return max(float(gaussian_q(math.sqrt(2.0 * math.log(arg)))), PROB_FLOOR)


def tau_star(disp_active, r_inf: float, w: float, eps_cap_max: float, blocklength: float) -> float:
    """Common error probability that makes the active users stationary.

    Parameters
    ----------
    disp_active : array_like
        Dispersions ``V_k`` of the users whose error probability is not held
        at its cap.
    r_inf : float
        Rate normalization constant.
    w : float
        Weight of the rate term.
    eps_cap_max : float
        Largest error probability cap.
    blocklength : float
        Coding length ``L``.

    Raises
    ------
    CapSaturated
        If the logarithm's argument is at most one, i.e. the rate term wins
        at every ``tau`` and all caps should be active.
    """
    s = float(np.sum(np.sqrt(np.asarray(disp_active, dtype=float))))
    return _closed_form(s, r_inf, w, eps_cap_max, blocklength)


def xi_star(disp_eve_active, r_inf: float, w: float, delta_cap_max: float,
            blocklength: float) -> float:
    """Leakage counterpart of :func:`tau_star`; sums over every active pair."""
    s = float(np.sum(np.sqrt(np.asarray(disp_eve_active, dtype=float))))
    return _closed_form(s, r_inf, w, delta_cap_max, blocklength)


def stationarity_residual(level, disp_active, r_inf, w, cap_max, blocklength) -> float:
    """Relative mismatch of the first-order condition at a common level."""
    s = float(np.sum(np.sqrt(np.asarray(disp_active, dtype=float))))
    x = float(gaussian_q_inv(level))
    lhs = (w / r_inf) * s / math.sqrt(blocklength) * _SQRT2PI * math.exp(0.5 * x * x)
    rhs = (1.0 - w) / cap_max
    return abs(lhs - rhs) / rhs


def _segment_cost(level, caps, sqrt_disp, rate_scale, w, cap_max, blocklength):
    probs = np.minimum(caps, level)
    backoff = np.sum(sqrt_disp * gaussian_q_inv(probs)) / math.sqrt(blocklength)
    return rate_scale * w * backoff + (1.0 - w) * level / cap_max


def _common_level(caps, disp, r_inf, w, blocklength):
    """Minimize the convex 1-D cost over the common level; returns ``(level, first)``.

    ``caps`` and ``disp`` are flat and aligned. ``first`` counts how many
    entries, in ascending cap order, stay at their caps.
    """
    caps = np.asarray(caps, dtype=float).ravel()
    disp = np.asarray(disp, dtype=float).ravel()
    cap_max = float(caps.max())
    order = np.argsort(caps, kind="stable")
    sc = caps[order]
    sq = np.sqrt(disp[order])
    n = sc.size
    rate_scale = 1.0 / r_inf if r_inf > 0 else 0.0

    candidates = list(np.unique(sc))
    for first in range(n):
        if first > 0 and sc[first] == sc[first - 1]:
            continue
        try:
            lvl = _closed_form(float(sq[first:].sum()), r_inf, w, cap_max, blocklength)
        except CapSaturated:
            continue
        lower = sc[first - 1] if first > 0 else 0.0
        if lower < lvl <= sc[first]:
            candidates.append(lvl)
    if w == 0.0:
        candidates.append(PROB_FLOOR)
    costs = [_segment_cost(c, sc, sq, rate_scale, w, cap_max, blocklength) for c in candidates]
    best = float(candidates[int(np.argmin(costs))])
    return best, int(np.sum(sc < best))


def phase2_objective(eps, delta, disp_user, disp_eve, r_inf, w, eps_cap_max, delta_cap_max,
                     blocklength) -> float:
    """Weighted cost minimized in the reliability step (additive wiretap bound)."""
    rate_scale = w / r_inf if r_inf > 0 else 0.0
    sl = math.sqrt(blocklength)
    back = np.sum(np.sqrt(disp_user) * gaussian_q_inv(eps)) / sl
    if np.size(delta):
        back += np.sum(np.sqrt(disp_eve) * gaussian_q_inv(delta)) / sl
    tail = float(np.max(eps)) / eps_cap_max
    if np.size(delta):
        tail += float(np.max(delta)) / delta_cap_max
    return float(rate_scale * back + (1.0 - w) * tail)


def solve_levels(disp_user, disp_eve, eps_cap, delta_cap, r_inf: float, w: float,
                 blocklength: float) -> ReliabilityState:
    """Optimal ``(eps, Delta)`` for given dispersions.

    Infinite blocklength removes every back-off, so only the tail term is
    left and the returned levels sit at :data:`PROB_FLOOR` (or at the caps
    when ``w == 1``). A nonpositive ``r_inf`` leaves the rate term without a
    meaningful scale and the caps are returned unchanged.
    """
    eps_cap = np.asarray(eps_cap, dtype=float)
    delta_cap = np.asarray(delta_cap, dtype=float)
    disp_user = np.asarray(disp_user, dtype=float)
    disp_eve = np.asarray(disp_eve, dtype=float)
    if np.any(~((eps_cap > 0) & (eps_cap < 0.5))) or np.any(~((delta_cap > 0) & (delta_cap < 0.5))):
        raise ValueError("caps must lie in (0, 1/2)")
    if math.isinf(blocklength):
        disp_user = np.zeros_like(disp_user)
        disp_eve = np.zeros_like(disp_eve)
        blocklength = 1.0
    if not r_inf > 0:
        # no usable rate normalization: keep every cap
        return ReliabilityState.at_caps(eps_cap, delta_cap)

    tau, ell0 = _common_level(eps_cap, disp_user, r_inf, w, blocklength)
    eps = np.minimum(eps_cap, tau)
    if delta_cap.size:
        xi, _ = _common_level(delta_cap, disp_eve, r_inf, w, blocklength)
        delta = np.minimum(delta_cap, xi)
        j = 1 + np.sum(np.sort(delta_cap, axis=0) < xi, axis=0)
    else:
        delta = delta_cap.copy()
        j = np.ones(eps_cap.size, dtype=int)
    return ReliabilityState(eps, delta, eps_cap, delta_cap, ell0 + 1, np.asarray(j))


def solve_phase2(f, forms: QuadraticFormSet, eps_cap, delta_cap, r_inf: float,
                 params: FblParams) -> ReliabilityState:
    """Reliability step at precoder ``f``.

    Dispersions come from the SINRs the forms produce, so covariance forms
    give the statistical wiretap dispersions without further changes.
    """
    rho_user, rho_eve = forms.sinrs(f)
    return solve_levels(dispersion(rho_user), dispersion(rho_eve), eps_cap, delta_cap, r_inf,
                        params.weight, params.blocklength)


def solve_phase2_partial(f, forms: QuadraticFormSet, eps_cap, delta_cap, r_inf_bar: float,
                         params: FblParams) -> ReliabilityState:
    """Reliability step when only wiretap covariances are known."""
    if not forms.partial:
        raise ValueError("expected covariance-based forms")
    return solve_phase2(f, forms, eps_cap, delta_cap, r_inf_bar, params)


def make_caps(n_users: int, n_eves: int, low: float = 1e-6, high: float = 2e-6):
    """Evenly spaced caps; every user sees the same leakage cap per eavesdropper."""
    eps_cap = np.linspace(low, high, n_users)
    delta_cap = np.repeat(np.linspace(low, high, n_eves)[:, None], n_users, axis=1)
    return eps_cap, delta_cap
