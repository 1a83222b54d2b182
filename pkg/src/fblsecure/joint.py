"""Alternating optimization of the precoder and the reliability targets."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import FblParams, secrecy_rate_exact
from .forms import QuadraticFormSet, build_forms, build_forms_partial, mrt_init
from .gpi import GpiSettings, gpi_solve_infinite_L, solve_fbl
from .reliability import ReliabilityState, make_caps, solve_phase2


class CsitMode(str, enum.Enum):
    PERFECT = "perfect"
    COVARIANCE = "covariance"


@dataclass(frozen=True)
class JointSettings:
    """Outer-loop settings. ``eps_cap``/``delta_cap`` default to the evenly spaced caps."""

    tol_out: float = 0.01
    max_outer: int = 5
    gpi: GpiSettings = field(default_factory=GpiSettings)
    eps_cap: np.ndarray | None = None
    delta_cap: np.ndarray | None = None
    csit: CsitMode = CsitMode.PERFECT

    def __post_init__(self):
        if not self.tol_out > 0:
            raise ValueError("tol_out must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        object.__setattr__(self, "csit", CsitMode(self.csit))

    def caps(self, n_users: int, n_eves: int):
        if self.eps_cap is None or self.delta_cap is None:
            dflt = make_caps(n_users, n_eves)
        eps_cap = dflt[0] if self.eps_cap is None else np.asarray(self.eps_cap, dtype=float)
        delta_cap = dflt[1] if self.delta_cap is None else np.asarray(self.delta_cap, dtype=float)
        return eps_cap, delta_cap


@dataclass
class JointResult:
    f: np.ndarray
    eps: np.ndarray
    delta: np.ndarray
    objective: list
    r_inf: float
    sum_secrecy_rate: float
    outer_iterations: int
    inner_iterations: int
    state: ReliabilityState | None = None

    @property
    def max_error_prob(self) -> float:
        return float(np.max(self.eps))

    @property
    def max_leakage(self) -> float:
        return float(np.max(self.delta))


def rate_scale(r_inf: float) -> float:
    """Normalizer for the rate term; falls back to 1 when ``r_inf`` is not positive."""
    return r_inf if r_inf > 0 else 1.0


def weighted_objective(f, eps, delta, r_inf, eps_cap, delta_cap, params: FblParams,
                       source) -> float:
    """Weighted sum of the normalized sum secrecy rate and the reliability margins.

    ``source`` is either a channel realization (exact rates) or a
    :class:`QuadraticFormSet` (rates from its SINRs, e.g. statistical wiretap
    rates for covariance forms).
    """
    if isinstance(source, QuadraticFormSet):
        from .forms import sum_secrecy_from_forms

        total = sum_secrecy_from_forms(f, source, eps, delta, params)
    else:
        total = float(np.sum(secrecy_rate_exact(f, source, eps, delta, params)))
    w = params.weight
    e_max = float(np.max(eps_cap))
    d_max = float(np.max(delta_cap))
    margin = (e_max - float(np.max(eps))) / e_max + (d_max - float(np.max(delta))) / d_max
    return w / r_inf * total + (1.0 - w) * margin


def joint_solve(channels, params: FblParams, settings: JointSettings = JointSettings(),
                r_inf: float | None = None) -> JointResult:
    """Alternate precoder and reliability updates from MRT at the caps.

    The rate normalizer comes from one infinite-blocklength run per drop.
    Each precoder update is warm-started from the previous precoder. The
    loop stops when the weighted objective grows by at most ``tol_out`` (or
    shrinks), and the best iterate seen, including the starting point, is
    returned.

    A precomputed ``r_inf`` for the same CSIT mode may be passed to skip
    the infinite-blocklength run.
    """
    k, m = channels.n_users, channels.n_eves
    eps_cap, delta_cap = settings.caps(k, m)
    if settings.csit is CsitMode.COVARIANCE:
        forms = build_forms_partial(channels, params)
        source = forms
    else:
        forms = build_forms(channels, params)
        source = channels

    inner = 0
    if r_inf is None:
        inf_run = gpi_solve_infinite_L(forms, params, settings.gpi)
        r_inf = inf_run.r_inf
        inner = inf_run.iterations
    scale = rate_scale(r_inf)

    f = mrt_init(forms)
    state = ReliabilityState.at_caps(eps_cap, delta_cap)
    obj = [weighted_objective(f, state.eps, state.delta, scale, eps_cap, delta_cap, params, source)]
    best = (obj[0], f, state)
    outer = 0
    for outer in range(1, settings.max_outer + 1):
        res = solve_fbl(forms, state.eps, state.delta, params, settings.gpi, f0=f)
        inner += res.iterations
        f = res.f
        state = solve_phase2(f, forms, eps_cap, delta_cap, scale, params)
        obj.append(weighted_objective(f, state.eps, state.delta, scale, eps_cap, delta_cap,
                                      params, source))
        if obj[-1] > best[0]:
            best = (obj[-1], f, state)
        if obj[-1] - obj[-2] <= settings.tol_out:
            break

    _, f, state = best
    total = float(np.sum(secrecy_rate_exact(f, channels, state.eps, state.delta, params)))
    return JointResult(f=f, eps=state.eps, delta=state.delta, objective=obj, r_inf=r_inf,
                       sum_secrecy_rate=total, outer_iterations=outer, inner_iterations=inner,
                       state=state)


def solve_fixed(channels, params: FblParams, settings: JointSettings = JointSettings()):
    """Precoder alone at the caps (no reliability step); returns ``(GpiResult, forms)``."""
    eps_cap, delta_cap = settings.caps(channels.n_users, channels.n_eves)
    if settings.csit is CsitMode.COVARIANCE:
        forms = build_forms_partial(channels, params)
    else:
        forms = build_forms(channels, params)
    return solve_fbl(forms, eps_cap, delta_cap, params, settings.gpi), forms


__all__ = ["CsitMode", "JointSettings", "JointResult", "weighted_objective", "joint_solve",
           "solve_fixed", "rate_scale"]
