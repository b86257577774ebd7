"""Line-of-sight propagation, per-user SNR and the multicast rate.

All targets and users sit on the ground plane (z = 0) and every pinching
antenna sits at height ``cfg.height`` on a waveguide parallel to the x-axis.
Functions accept either a :class:`TransceiverLayout` (its Tx side is used)
or a plain array of Tx x-coordinates.  An explicit complex ``weights``
vector replaces the in-waveguide coefficients, which is how fixed arrays
with beamforming reuse the same code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry
from .scenario import SystemConfig, TransceiverLayout, UserSet

# distances below this are treated as a PA touching the point (m)
MIN_DISTANCE = 1e-9


def _coords(layout_or_coords) -> np.ndarray:
    if isinstance(layout_or_coords, TransceiverLayout):
        return layout_or_coords.tx_x
    return np.atleast_1d(np.asarray(layout_or_coords, dtype=float))


def distances(px, py, pa_x, waveguide_y: float, cfg: SystemConfig, pz=0.0) -> np.ndarray:
    """Broadcast distance between ground points and PAs on one waveguide."""
    px, py, pz = np.asarray(px, float), np.asarray(py, float), np.asarray(pz, float)
    dx = px - np.asarray(pa_x, float)
    dy = py - waveguide_y
    dz = pz - cfg.height
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    if np.any(r < MIN_DISTANCE):
        raise DegenerateGeometry("point coincides with a pinching antenna")
    return r


def freespace_gain(point, pa_x: float, waveguide_y: float, cfg: SystemConfig) -> complex:
    """sqrt(eta) exp(-j k0 r) / r for one point and one PA.

    ``point`` is (x, y) on the ground or a full (x, y, z) position.
    """
    pt = tuple(point) + (0.0,) * (3 - len(point))
    r = float(distances(pt[0], pt[1], pa_x, waveguide_y, cfg, pz=pt[2]))
    return complex(np.sqrt(cfg.eta) * np.exp(-1j * cfg.k0 * r) / r)


def freespace_gains(px, py, pa_x, waveguide_y: float, cfg: SystemConfig) -> np.ndarray:
    r = distances(px, py, pa_x, waveguide_y, cfg)
    return np.sqrt(cfg.eta) * np.exp(-1j * cfg.k0 * r) / r


def inwaveguide_coeff(pa_x, n_total: int, cfg: SystemConfig):
    """Equal-split, lossless guided-wave coefficient exp(-j kg x)/sqrt(N)."""
    return np.sqrt(1.0 / n_total) * np.exp(-1j * cfg.kg * np.asarray(pa_x, float))


def pa_weights(coords, cfg: SystemConfig, weights=None) -> np.ndarray:
    """Per-element coefficients of one waveguide (guided-wave or explicit)."""
    coords = np.atleast_1d(np.asarray(coords, float))
    if weights is None:
        return np.atleast_1d(inwaveguide_coeff(coords, coords.size, cfg))
    weights = np.atleast_1d(np.asarray(weights, complex))
    if weights.shape != coords.shape:
        raise ValueError("weights and PA coordinates must have the same length")
    return weights


@dataclass(frozen=True)
class EffectiveChannel:
    """Combined channel of one waveguide toward one point, with its summands."""

    value: complex
    per_element: np.ndarray

    @property
    def gain(self) -> float:
        return abs(self.value) ** 2


def effective_channel(point, coords, waveguide_y: float, cfg: SystemConfig,
                      weights=None) -> EffectiveChannel:
    coords = np.atleast_1d(np.asarray(coords, float))
    terms = freespace_gains(point[0], point[1], coords, waveguide_y, cfg)
    terms = terms * pa_weights(coords, cfg, weights)
    return EffectiveChannel(complex(terms.sum()), terms)


def _user_xy(users):
    if isinstance(users, UserSet):
        return users.x, users.y
    pos = np.asarray(users, float).reshape(-1, 2)
    return pos[:, 0], pos[:, 1]


def user_channels(users, layout_or_coords, cfg: SystemConfig, weights=None) -> np.ndarray:
    """Effective Tx channel of every user, shape (K,)."""
    coords = _coords(layout_or_coords)
    ux, uy = _user_xy(users)
    h = freespace_gains(ux[:, None], uy[:, None], coords[None, :], cfg.y_tx, cfg)
    # ndarray.sum is pairwise along the last axis, unlike a BLAS dot
    return (h * pa_weights(coords, cfg, weights)[None, :]).sum(axis=-1)


def user_snrs(users, layout_or_coords, cfg: SystemConfig, weights=None) -> np.ndarray:
    """Receive SNR of every user for the Tx layout, shape (K,)."""
    g = user_channels(users, layout_or_coords, cfg, weights)
    return cfg.tx_power_w * np.abs(g) ** 2 / cfg.noise_user_w


def user_snr(user, layout_or_coords, cfg: SystemConfig, weights=None) -> float:
    return float(user_snrs(np.asarray(user, float).reshape(1, 2), layout_or_coords, cfg, weights)[0])


def rate_from_snrs(snrs) -> float:
    return float(np.log2(1.0 + np.min(snrs)))


def multicast_rate(users, layout_or_coords, cfg: SystemConfig, weights=None) -> float:
    """Common rate log2(1 + min_k SNR_k) in bit/s/Hz."""
    return rate_from_snrs(user_snrs(users, layout_or_coords, cfg, weights))


class ElementwiseSnr:
    """User SNRs as explicit functions of one Tx element's position.

    For element ``q`` the squared channel of user k splits into a constant
    part (the other elements), a quadratic part (element q alone) and a
    cross term.  The complement channels are computed once here and reused
    for every candidate position.
    """

    def __init__(self, users, layout_or_coords, q: int, cfg: SystemConfig):
        coords = _coords(layout_or_coords)
        self.cfg = cfg
        self.q = int(q)
        self.n_total = coords.size
        self.ux, self.uy = _user_xy(users)
        others = np.delete(coords, self.q)
        self.fingerprint = np.array(coords).copy()
        self.fingerprint[self.q] = np.nan
        if others.size:
            h = freespace_gains(self.ux[:, None], self.uy[:, None], others[None, :], cfg.y_tx, cfg)
            self.complement = (h * inwaveguide_coeff(others, self.n_total, cfg)[None, :]).sum(axis=-1)
        else:
            self.complement = np.zeros(self.ux.size, complex)
        self.constant = np.abs(self.complement) ** 2
        self.scale = cfg.tx_power_w / cfg.noise_user_w
        self.evaluations = 0

    def terms(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Constant, quadratic and cross terms, each of shape (K, M)."""
        x = np.atleast_1d(np.asarray(x, float))
        own = freespace_gains(self.ux[:, None], self.uy[:, None], x[None, :], self.cfg.y_tx, self.cfg)
        own = own * inwaveguide_coeff(x, self.n_total, self.cfg)[None, :]
        quad = np.abs(own) ** 2
        cross = 2.0 * np.real(np.conj(self.complement)[:, None] * own)
        const = np.broadcast_to(self.constant[:, None], quad.shape)
        return const, quad, cross

    def snrs(self, x) -> np.ndarray:
        """SNR of every user at every candidate, shape (K, M)."""
        const, quad, cross = self.terms(x)
        self.evaluations += quad.size
        return self.scale * (const + quad + cross)

    def rates(self, x) -> np.ndarray:
        """Multicast rate at every candidate, shape (M,)."""
        return np.log2(1.0 + self.snrs(x).min(axis=0))


def snr_elementwise(user_index: int, q: int, x: float, frozen, users, cfg: SystemConfig) -> float:
    """SNR of one user when Tx element ``q`` of ``frozen`` is moved to ``x``."""
    split = ElementwiseSnr(users, frozen, q, cfg)
    return float(split.snrs([x])[user_index, 0])
