"""Designs for one PA per waveguide.

* communications-centric: min-max user distance over a finite candidate set
* sensing-centric: same-side layout at a closed-form displacement from the
  prior mean, using a one-dimensional model where only u^x is unknown
* rate-profile trade-off: 1D grid search over the Tx position
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import ElementwiseSnr, distances, user_snrs
from .errors import PlacementClamped
from .fisher import GhqRule, ghq_rule
from .scenario import SystemConfig, TargetPrior, TransceiverLayout, UserSet

log = logging.getLogger(__name__)

# perturbation that keeps the rate-profile ratios finite at alpha in {0, 1}
PROFILE_DELTA = 1e-6


def rate_profile_utility(rate, sensing_rate, alpha: float, delta: float = PROFILE_DELTA):
    """min{rate / alpha, sensing_rate / (1 - alpha)} with endpoint guards."""
    comm = rate / (alpha + (delta if alpha == 0 else 0.0))
    sense = sensing_rate / ((1.0 - alpha) + (delta if alpha == 1 else 0.0))
    return np.minimum(comm, sense)


# communications-centric design

def _user_offsets(users: UserSet, cfg: SystemConfig) -> np.ndarray:
    """Squared distance from each user to the Tx waveguide line."""
    return (users.y - cfg.y_tx) ** 2 + cfg.height**2


def cc_objective(x, users: UserSet, cfg: SystemConfig) -> np.ndarray:
    """Largest squared Tx-to-user distance for Tx position(s) ``x``."""
    x = np.asarray(x, float)
    d2 = (x[..., None] - users.x) ** 2 + _user_offsets(users, cfg)
    return d2.max(axis=-1)


def cc_candidate_set(users: UserSet, cfg: SystemConfig) -> np.ndarray:
    """Sorted candidates: waveguide ends, user abscissas, pairwise equal-distance points."""
    xs, off = users.x, _user_offsets(users, cfg)
    cands = [0.0, cfg.region_x, *xs.tolist()]
    for i in range(xs.size):
        for j in range(i + 1, xs.size):
            if xs[i] == xs[j]:
                continue
            xi = (xs[j] ** 2 - xs[i] ** 2 + off[j] - off[i]) / (2.0 * (xs[j] - xs[i]))
            if 0.0 <= xi <= cfg.region_x:
                cands.append(xi)
    return np.unique(np.clip(np.asarray(cands, float), 0.0, cfg.region_x))


def cc_optimal_tx(users: UserSet, cfg: SystemConfig) -> tuple[float, float]:
    """Tx position minimizing the worst user distance, and its multicast rate."""
    cands = cc_candidate_set(users, cfg)
    best = float(cands[np.argmin(cc_objective(cands, users, cfg))])
    rate = float(np.log2(1.0 + user_snrs(users, [best], cfg).min()))
    return best, rate


# sensing-centric design (one-dimensional model)

@dataclass(frozen=True)
class SymmetricSensingGeometry:
    """Effective height, symmetry center and displacement of a same-side layout."""

    delta_s: float
    center: float
    displacement: float

    def __post_init__(self):
        if self.displacement < 0:
            raise ValueError("displacement must be nonnegative")


def effective_height(cfg: SystemConfig) -> float:
    """Distance from the waveguides to a target midway between them."""
    return math.sqrt(cfg.height**2 + ((cfg.y_rx - cfg.y_tx) / 2.0) ** 2)


def conditional_fisher_1d(u_x, x_t, x_r, cfg: SystemConfig, phase_coupling: bool = True):
    """Fisher information on u^x for a target midway between the waveguides.

    With ``phase_coupling`` the cross term carries cos(k0 (R_t - R_r)); without
    it the cross term is the one obtained by differentiating the echo mean
    directly.  Both agree whenever R_t = R_r.  Broadcasts over its inputs.
    """
    u_x, x_t, x_r = np.broadcast_arrays(*(np.asarray(v, float) for v in (u_x, x_t, x_r)))
    y_mid = 0.5 * (cfg.y_tx + cfg.y_rx)
    r_t = distances(u_x, y_mid, x_t, cfg.y_tx, cfg)
    r_r = distances(u_x, y_mid, x_r, cfg.y_rx, cfg)
    cos_t = (u_x - x_t) / r_t
    cos_r = (u_x - x_r) / r_r
    k2 = cfg.k0**2
    coupling = np.cos(cfg.k0 * (r_t - r_r)) if phase_coupling else 1.0
    bracket = ((k2 + r_t**-2) * cos_t**2 + (k2 + r_r**-2) * cos_r**2
               + 2.0 * (k2 + 1.0 / (r_t * r_r)) * cos_t * cos_r * coupling)
    power = cfg.eta**2 * cfg.tx_power_w / (r_t * r_r) ** 2
    return 2.0 * power / cfg.noise_sense_w * bracket


def expected_fisher_1d(x_t, x_r, prior: TargetPrior, cfg: SystemConfig,
                       rule: GhqRule | None = None, phase_coupling: bool = True):
    """Prior average of the 1D Fisher information by Gauss-Hermite quadrature."""
    rule = rule or ghq_rule(cfg.ghq_nodes)
    x_t, x_r = np.broadcast_arrays(np.asarray(x_t, float), np.asarray(x_r, float))
    nodes = prior.mean_x + math.sqrt(2.0) * prior.std_x * rule.nodes
    vals = conditional_fisher_1d(nodes, x_t[..., None], x_r[..., None], cfg, phase_coupling)
    return vals @ rule.weights / math.sqrt(math.pi)


def bcrb_1d(x_t, x_r, prior: TargetPrior, cfg: SystemConfig, rule: GhqRule | None = None,
            phase_coupling: bool = True):
    """1D BCRB 1 / (E[F_xx] + 1/var_x)."""
    return 1.0 / (expected_fisher_1d(x_t, x_r, prior, cfg, rule, phase_coupling) + 1.0 / prior.var_x)


def sc_displacement(cfg: SystemConfig) -> tuple[float, float]:
    """Optimal same-side displacement and its high-frequency approximation."""
    k2 = cfg.k0**2
    d2 = effective_height(cfg) ** 2
    sq = (-(k2 * d2 + 3.0) + math.sqrt(9.0 * k2**2 * d2**2 + 14.0 * k2 * d2 + 9.0)) / (4.0 * k2)
    return math.sqrt(sq), math.sqrt(d2 / 2.0)


def displacement_residual(d: float, cfg: SystemConfig) -> float:
    """Relative residual of the stationarity quadratic in s = d^2.

    Normalized by the largest term so the value is scale free.
    """
    k2 = cfg.k0**2
    d2 = effective_height(cfg) ** 2
    s = d * d
    terms = (-2.0 * k2 * s * s, -(k2 * d2 + 3.0) * s, k2 * d2 * d2 + d2)
    return abs(sum(terms)) / max(abs(t) for t in terms)


def _clamp(x: float, cfg: SystemConfig, what: str) -> float:
    clamped = min(max(x, 0.0), cfg.region_x)
    if clamped != x:
        msg = f"{what} position {x:.4f} m clamped to {clamped:.4f} m"
        log.warning(msg)
        warnings.warn(msg, PlacementClamped, stacklevel=3)
    return clamped


def sc_geometry(prior: TargetPrior, cfg: SystemConfig) -> SymmetricSensingGeometry:
    d, _ = sc_displacement(cfg)
    return SymmetricSensingGeometry(effective_height(cfg), prior.mean_x, d)


def sc_optimal_layout(prior: TargetPrior, cfg: SystemConfig) -> TransceiverLayout:
    """Both PAs at the prior mean minus the optimal displacement."""
    d, _ = sc_displacement(cfg)
    x = _clamp(prior.mean_x - d, cfg, "sensing-centric")
    return TransceiverLayout([x], [x])


def rx_best_response(x_t: float, prior: TargetPrior, cfg: SystemConfig) -> float:
    """Mirror of the Tx position about the prior mean, clamped to the waveguide."""
    return _clamp(2.0 * prior.mean_x - x_t, cfg, "mirrored Rx")


def rx_search_response(x_t, prior: TargetPrior, cfg: SystemConfig, rule: GhqRule | None = None):
    """Grid Rx position maximizing the 1D Fisher information for each ``x_t``.

    Ties go to the smallest coordinate.
    """
    grid = cfg.grid()
    x_t = np.atleast_1d(np.asarray(x_t, float))
    info = expected_fisher_1d(x_t[:, None], grid[None, :], prior, cfg, rule)
    return grid[np.argmax(info, axis=1)]


class SingleParetoPoint(NamedTuple):
    x_t: float
    x_r: float
    utility: float
    rate: float
    sensing_rate: float


def pareto_single(alpha: float, users: UserSet, prior: TargetPrior, cfg: SystemConfig,
                  rx_rule: str = "search") -> SingleParetoPoint:
    """Rate-profile point for one PA per waveguide.

    The sensing rate is the inverse 1D BCRB.  ``rx_rule`` selects the Rx
    response to each Tx candidate: ``"search"`` maximizes the sensing rate
    over the grid, ``"mirror"`` reflects the Tx position about the prior mean.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    rule = ghq_rule(cfg.ghq_nodes)
    grid = cfg.grid()
    rates = ElementwiseSnr(users, [0.0], 0, cfg).rates(grid)
    if rx_rule == "search":
        x_r = rx_search_response(grid, prior, cfg, rule)
    elif rx_rule == "mirror":
        x_r = np.clip(2.0 * prior.mean_x - grid, 0.0, cfg.region_x)
    else:
        raise ValueError(f"unknown rx_rule {rx_rule!r}")
    sensing = 1.0 / bcrb_1d(grid, x_r, prior, cfg, rule)
    utility = rate_profile_utility(rates, sensing, alpha)
    i = int(np.argmax(utility))
    return SingleParetoPoint(float(grid[i]), float(x_r[i]), float(utility[i]),
                             float(rates[i]), float(sensing[i]))
