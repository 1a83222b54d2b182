"""Linear reference precoders: matched filter, zero forcing and their
wiretap-aware variants."""

from __future__ import annotations

import enum

import numpy as np
from scipy.linalg import solve_triangular

from .core import FblParams, stack_precoder


class BaselineKind(str, enum.Enum):
    MRT = "mrt"
    ZF = "zf"
    RZF = "rzf"
    ZF_EVE = "zf-eve"
    RZF_EVE = "rzf-eve"


class RankDeficientError(np.linalg.LinAlgError):
    pass


def scaled_channels(channels):
    """Columns ``sqrt(gamma_k) h_k`` and ``sqrt(gamma_e) g_m`` as ``(N, K)`` and ``(N, M)``."""
    hs = (np.sqrt(channels.gain_user)[:, None] * channels.h).T
    gs = (np.sqrt(channels.gain_eve)[:, None] * channels.g).T
    return hs, gs


def strongest_eves(channels, count: int) -> np.ndarray:
    """Indices of the ``count`` eavesdroppers with the largest received power.

    Power is ``gamma_e ||g_m||^2``; ties go to the lower index.
    """
    power = channels.gain_eve * np.sum(np.abs(channels.g) ** 2, axis=1)
    order = np.lexsort((np.arange(power.size), -power))
    return order[:max(count, 0)]


def _pseudo_inverse_columns(H, reg: float, kind: BaselineKind) -> np.ndarray:
    """Columns of ``H (H^H H + reg I)^-1``.

    Without regularization the thin QR factorization ``H = QR`` gives
    ``Q R^-H``, which avoids squaring the condition number of ``H``.
    """
    if np.linalg.matrix_rank(H) < H.shape[1]:
        raise RankDeficientError(f"{kind.value}: effective channel matrix is rank deficient")
    if not reg:
        q, r = np.linalg.qr(H)
        return q @ solve_triangular(r, np.eye(r.shape[0]), lower=False).conj().T
    gram = H.conj().T @ H + reg * np.eye(H.shape[1])
    return H @ np.linalg.solve(gram, np.eye(gram.shape[0]))


def baseline_matrix(kind, channels, params: FblParams, reg: float | None = None) -> np.ndarray:
    """Unnormalized ``(N, K)`` precoding matrix for a baseline ``kind``.

    ``reg`` overrides the regularized variants' loading, which defaults to
    ``K sigma^2 / P``.
    """
    kind = BaselineKind(kind)
    n, k = channels.n_antennas, channels.n_users
    hs, gs = scaled_channels(channels)
    if reg is None:
        reg = k * params.noise_user / params.power
    if kind is BaselineKind.MRT:
        return hs
    if kind in (BaselineKind.ZF, BaselineKind.RZF):
        if n < k:
            raise RankDeficientError(f"{kind.value}: needs at least as many antennas as users")
        return _pseudo_inverse_columns(hs, reg if kind is BaselineKind.RZF else 0.0, kind)
    if n <= k:
        raise RankDeficientError(f"{kind.value}: needs a spare antenna beyond the users")
    picked = strongest_eves(channels, min(channels.n_eves, n - k))
    H = np.concatenate([hs, gs[:, picked]], axis=1)
    cols = _pseudo_inverse_columns(H, reg if kind is BaselineKind.RZF_EVE else 0.0, kind)
    return cols[:, :k]


def baseline_precoder(kind, channels, params: FblParams, reg: float | None = None) -> np.ndarray:
    """Stacked unit-norm precoder of a baseline.

    Raises
    ------
    RankDeficientError
        When the (possibly augmented) channel matrix cannot be inverted.
    """
    f = stack_precoder(baseline_matrix(kind, channels, params, reg))
    return f / np.linalg.norm(f)
