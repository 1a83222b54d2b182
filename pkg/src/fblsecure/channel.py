"""Scenario generation: drop geometry, indoor pathloss and one-ring fading."""

from __future__ import annotations

import json
import math
from functools import lru_cache
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .core import FblParams

__all__ = [
    "ScenarioConfig",
    "ChannelRealization",
    "one_ring_covariance",
    "sample_channel",
    "pathloss_itu_indoor",
    "noise_power",
    "generate_drop",
    "drop_seed",
    "load_scenario",
]


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, radio and array parameters of one simulated deployment.

    Field names double as the keys of the JSON scenario document read by
    :func:`load_scenario`.
    """

    n_antennas: int = 8
    n_users: int = 4
    n_eves: int = 4
    aod_correlation: float = 0.1
    bandwidth_hz: float = 10e6
    carrier_hz: float = 5.2e9
    loss_coeff: float = 31.0
    noise_figure_db: float = 5.0
    noise_psd_dbm_hz: float = -174.0
    power_dbm: float = 20.0
    blocklength: float = 200
    alpha: float = 10.0
    weight: float = 0.01
    user_dist_min: float = 5.0
    user_dist_max: float = 50.0
    eve_dist_max: float = 5.0
    eve_dist_min: float = 0.5
    angular_spread_deg: float = 10.0
    antenna_spacing: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.n_antennas >= self.n_users >= 1:
            raise ValueError("need n_antennas >= n_users >= 1")
        if self.n_eves < 1:
            raise ValueError("need at least one eavesdropper")
        if not 0.0 < self.aod_correlation < 1.0:
            raise ValueError("aod_correlation must lie in (0, 1)")
        if not 0 < self.user_dist_min < self.user_dist_max:
            raise ValueError("bad user distance range")
        if not 0 < self.eve_dist_min < self.eve_dist_max:
            raise ValueError("bad eavesdropper distance range")
        if self.angular_spread_deg < 0:
            raise ValueError("angular spread must be nonnegative")

    @property
    def power_w(self) -> float:
        return 10.0 ** ((self.power_dbm - 30.0) / 10.0)

    def noise_w(self) -> float:
        return noise_power(self.noise_psd_dbm_hz, self.bandwidth_hz, self.noise_figure_db)

    def fbl_params(self, **overrides) -> FblParams:
        """Link parameters implied by this scenario (equal user and eve noise)."""
        noise = self.noise_w()
        kw = dict(blocklength=self.blocklength, power=self.power_w, noise_user=noise,
                  noise_eve=noise, alpha=self.alpha, weight=self.weight)
        kw.update(overrides)
        return FblParams(**kw)

    def replace(self, **changes) -> "ScenarioConfig":
        d = asdict(self)
        d.update(changes)
        return ScenarioConfig(**d)


@dataclass
class ChannelRealization:
    """Small- and large-scale channels of one drop.

    Attributes
    ----------
    h : (K, N) complex
        Legitimate small-scale channels, one row per user.
    g : (M, N) complex
        Wiretap small-scale channels, one row per eavesdropper.
    gain_user, gain_eve : (K,), (M,)
        Linear large-scale gains.
    cov_user, cov_eve : (K, N, N), (M, N, N)
        Spatial covariances, each with trace N.
    aod_user, aod_eve : (K,), (M,)
        Angles of departure in radians.
    anchor : (M,) int
        Index of the user each eavesdropper is placed around.
    dist_user, dist_eve : (K,), (M,)
        Distances to the AP in metres.
    eve_offset : (M,)
        Distance between each eavesdropper and its anchor user.
    """

    h: np.ndarray
    g: np.ndarray
    gain_user: np.ndarray
    gain_eve: np.ndarray
    cov_user: np.ndarray | None = None
    cov_eve: np.ndarray | None = None
    aod_user: np.ndarray | None = None
    aod_eve: np.ndarray | None = None
    anchor: np.ndarray | None = None
    dist_user: np.ndarray | None = None
    dist_eve: np.ndarray | None = None
    eve_offset: np.ndarray | None = None

    @property
    def n_antennas(self) -> int:
        return self.h.shape[1]

    @property
    def n_users(self) -> int:
        return self.h.shape[0]

    @property
    def n_eves(self) -> int:
        return self.g.shape[0]


@lru_cache(maxsize=8)
def _legendre(n_nodes: int):
    return np.polynomial.legendre.leggauss(n_nodes)


def _steering(angles, n: int, spacing: float) -> np.ndarray:
    idx = np.arange(n)
    return np.exp(2j * np.pi * spacing * np.outer(np.sin(np.atleast_1d(angles)), idx))


def one_ring_covariance(theta: float, spread: float, n: int, spacing: float = 0.5,
                        n_nodes: int = 256) -> np.ndarray:
    """Spatial covariance of a half-wavelength ULA under the one-ring model.

    Entry ``(p, q)`` is the average of ``exp(j 2 pi d (p - q) sin(phi))`` over
    ``phi`` uniform in ``[theta - spread, theta + spread]``. The matrix is
    Toeplitz, so only the ``n`` distinct lags are integrated (Gauss-Legendre).
    With ``spread == 0`` the rank-one steering outer product is returned.
    """
    if n < 1:
        raise ValueError("need at least one antenna")
    if spread < 0:
        raise ValueError("angular spread must be nonnegative")
    if spread == 0:
        a = _steering(theta, n, spacing)[0]
        return np.outer(a, a.conj())
    nodes, wts = _legendre(n_nodes)
    phi = theta + spread * nodes
    lags = np.arange(n)
    vals = np.exp(2j * np.pi * spacing * np.outer(lags, np.sin(phi))) @ wts / 2.0
    p, q = np.meshgrid(lags, lags, indexing="ij")
    d = p - q
    cov = np.where(d >= 0, vals[np.abs(d)], vals[np.abs(d)].conj())
    return cov


def sample_channel(cov: np.ndarray, rng: np.random.Generator, size: int | None = None,
                   tol: float = 1e-10) -> np.ndarray:
    """Draw ``h = R^{1/2} z`` with ``z`` i.i.d. CN(0, 1).

    The square root comes from an eigendecomposition so rank-deficient
    covariances are accepted. Eigenvalues below ``-tol * trace`` mean the input
    is not PSD and raise ``np.linalg.LinAlgError``.
    """
    cov = np.asarray(cov)
    n = cov.shape[0]
    w, v = np.linalg.eigh(cov)
    floor = tol * max(np.real(np.trace(cov)), 1.0)
    if w.min() < -floor:
        raise np.linalg.LinAlgError("covariance is not positive semidefinite")
    # round-off eigenvalues would leak sqrt(1e-16) ~ 1e-8 off the signal subspace
    root = v * np.sqrt(np.where(w > floor, w, 0.0))
    shape = (n,) if size is None else (size, n)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return z @ root.T


def noise_power(psd_dbm_hz: float, bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power in watts."""
    dbm = psd_dbm_hz + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


def pathloss_itu_indoor(distance_m, carrier_hz: float = 5.2e9, loss_coeff: float = 31.0,
                        noise_figure_db: float = 5.0, psd_dbm_hz: float = -174.0,
                        bandwidth_hz: float = 10e6):
    """ITU-R indoor site-general pathloss with no floor penetration.

    Returns ``(gain, noise)`` where ``gain = 10^(-PL/10)`` and ``noise`` is the
    receiver noise power in watts.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    pl_db = 20.0 * math.log10(carrier_hz / 1e6) + loss_coeff * np.log10(d) - 28.0
    return (10.0 ** (-pl_db / 10.0))[()], noise_power(psd_dbm_hz, bandwidth_hz, noise_figure_db)


def drop_seed(base_seed: int, *index: int) -> np.random.SeedSequence:
    """Seed sequence for one drop, mixed from the base seed and its indices.

    The drop stream depends only on ``(base_seed, index)``, never on the order
    in which drops are scheduled.
    """
    return np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, *map(int, index)])


def _uniform_annulus(rng, r_min, r_max, size):
    r = np.sqrt(rng.uniform(r_min**2, r_max**2, size))
    phi = rng.uniform(-np.pi, np.pi, size)
    return r, phi


def generate_drop(config: ScenarioConfig, seed=None) -> ChannelRealization:
    """Random user and eavesdropper placement plus one fading draw.

    Users are uniform in area over the annulus around the AP. Each
    eavesdropper picks a user uniformly, sits uniformly in the disc of radius
    ``eve_dist_max`` around it (rejecting points closer than ``eve_dist_min``)
    and has an AoD equal to the user's plus a uniform offset in
    ``(-aod_correlation*pi, aod_correlation*pi)``.

    ``seed`` may be an int or a ``SeedSequence``; it defaults to ``config.seed``.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n, k, m = config.n_antennas, config.n_users, config.n_eves
    spread = math.radians(config.angular_spread_deg)

    r_user, aod_user = _uniform_annulus(rng, config.user_dist_min, config.user_dist_max, k)
    pos_user = r_user * np.exp(1j * aod_user)

    anchor = rng.integers(0, k, m)
    r_off, phi_off = _uniform_annulus(rng, config.eve_dist_min, config.eve_dist_max, m)
    pos_eve = pos_user[anchor] + r_off * np.exp(1j * phi_off)
    # the AP sits at the origin; keep eavesdroppers outside the near field
    dist_eve = np.maximum(np.abs(pos_eve), config.eve_dist_min)
    shift = config.aod_correlation * np.pi
    aod_eve = aod_user[anchor] + rng.uniform(-shift, shift, m)

    kw = dict(carrier_hz=config.carrier_hz, loss_coeff=config.loss_coeff,
              noise_figure_db=config.noise_figure_db, psd_dbm_hz=config.noise_psd_dbm_hz,
              bandwidth_hz=config.bandwidth_hz)
    gain_user, _ = pathloss_itu_indoor(r_user, **kw)
    gain_eve, _ = pathloss_itu_indoor(dist_eve, **kw)

    cov_user = np.stack([one_ring_covariance(t, spread, n, config.antenna_spacing) for t in aod_user])
    cov_eve = np.stack([one_ring_covariance(t, spread, n, config.antenna_spacing) for t in aod_eve])
    h = np.stack([sample_channel(c, rng) for c in cov_user])
    g = np.stack([sample_channel(c, rng) for c in cov_eve])

    return ChannelRealization(
        h=h, g=g, gain_user=np.atleast_1d(gain_user), gain_eve=np.atleast_1d(gain_eve),
        cov_user=cov_user, cov_eve=cov_eve, aod_user=aod_user, aod_eve=aod_eve,
        anchor=anchor, dist_user=r_user, dist_eve=dist_eve, eve_offset=r_off,
    )


def load_scenario(source) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a JSON file path, string or mapping.

    Unknown keys are rejected so that typos do not silently fall back to
    defaults.
    """
    if isinstance(source, dict):
        data = dict(source)
    else:
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        data = json.loads(text)
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    return ScenarioConfig(**data)
