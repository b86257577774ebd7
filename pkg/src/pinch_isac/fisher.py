"""Bayesian Fisher information of the target position and its BCRB.

The echo mean is the product of the Tx and Rx effective channels evaluated
at the target.  Its gradient with respect to the target's planar position
drives the observation FIM, which is averaged over the Gaussian prior with
a tensor Gauss-Hermite rule.  :class:`ElementwiseOfim` re-expresses the
same average as a function of a single PA coordinate so that coordinate
searches cost O(T^2) per candidate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import distances, pa_weights
from .errors import DegeneratePrior, IllConditioned, StaleCache, UnsupportedOrder
from .scenario import SystemConfig, TargetPrior, TransceiverLayout

log = logging.getLogger(__name__)

MAX_GHQ_ORDER = 64
# nodes closer than this to a PA are nudged along x by the same amount (m)
COINCIDENCE_GUARD = 1e-6
ILL_CONDITIONED_DENOM = 1e-30


@dataclass(frozen=True, eq=False)
class GhqRule:
    """Abscissas and weights for integrals against exp(-x^2)."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.nodes.size


def _orthonormal_hermite(x: np.ndarray, order: int):
    """Values of the first ``order`` orthonormal Hermite polynomials at ``x``
    and the derivative of the last one plus one, shape (order, len(x))."""
    p = np.empty((order + 1, x.size))
    p[0] = np.pi**-0.25
    if order >= 1:
        p[1] = np.sqrt(2.0) * x * p[0]
    for k in range(2, order + 1):
        p[k] = np.sqrt(2.0 / k) * x * p[k - 1] - np.sqrt((k - 1) / k) * p[k - 2]
    # d/dx p_n = sqrt(2 n) p_{n-1}
    return p[:order], np.sqrt(2.0 * order) * p[order - 1], p[order]


def ghq_rule(order: int) -> GhqRule:
    """Gauss-Hermite rule of the given order from the Jacobi matrix.

    The symmetric tridiagonal matrix with off-diagonal sqrt(k/2) has the
    Hermite roots as eigenvalues.  The roots get one Newton polish on the
    orthonormal recurrence, and each weight is the reciprocal Christoffel
    sum 1 / sum_k p_k(x)^2, which keeps full relative accuracy even for
    the tiny tail weights where the squared-eigenvector formula does not.
    Nodes and weights are symmetrized so the rule is exactly even.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise UnsupportedOrder(f"order must be an integer, got {order!r}")
    if not 1 <= order <= MAX_GHQ_ORDER:
        raise UnsupportedOrder(f"order must lie in [1, {MAX_GHQ_ORDER}], got {order}")
    off = np.sqrt(np.arange(1, order) / 2.0)
    nodes = np.linalg.eigvalsh(np.diag(off, 1) + np.diag(off, -1))
    _, slope, value = _orthonormal_hermite(nodes, order)
    nodes = nodes - value / slope
    low, _, _ = _orthonormal_hermite(nodes, order)
    weights = 1.0 / np.sum(low**2, axis=0)
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return GhqRule(nodes, weights)


@dataclass(frozen=True)
class Bfim:
    """2x2 Bayesian FIM split into observation and prior parts, with its BCRB."""

    f_xx: float
    f_xy: float
    f_yy: float
    prior_xx: float
    prior_yy: float
    bcrb: float

    @property
    def observation(self) -> np.ndarray:
        return np.array([[self.f_xx, self.f_xy], [self.f_xy, self.f_yy]])

    @property
    def matrix(self) -> np.ndarray:
        return self.observation + np.diag([self.prior_xx, self.prior_yy])


def pfim(prior: TargetPrior) -> np.ndarray:
    """Prior FIM, the inverse prior covariance."""
    if not (prior.var_x > 0 and prior.var_y > 0):
        raise DegeneratePrior("prior variances must be positive")
    return np.diag([1.0 / prior.var_x, 1.0 / prior.var_y])


def fim_scale(cfg: SystemConfig) -> float:
    return 2.0 * cfg.tx_power_w / cfg.noise_sense_w


def quadrature_points(prior: TargetPrior, rule: GhqRule):
    """Flattened tensor nodes (ux, uy) and normalized weights summing to 1."""
    ux = prior.mean_x + np.sqrt(2.0) * prior.std_x * rule.nodes
    uy = prior.mean_y + np.sqrt(2.0) * prior.std_y * rule.nodes
    gx, gy = np.meshgrid(ux, uy, indexing="ij")
    w = np.outer(rule.weights, rule.weights) / np.pi
    return gx.ravel(), gy.ravel(), w.ravel()


def _guard_nodes(ux, uy, layout: TransceiverLayout, cfg: SystemConfig):
    ux = np.array(ux, dtype=float)
    uy = np.asarray(uy, dtype=float)
    for coords, y in ((layout.tx_x, cfg.y_tx), (layout.rx_x, cfg.y_rx)):
        r = np.sqrt((ux[..., None] - coords) ** 2 + (uy[..., None] - y) ** 2 + cfg.height**2)
        close = np.any(r < COINCIDENCE_GUARD, axis=-1)
        if np.any(close):
            log.warning("nudging %d quadrature node(s) that coincide with a PA", int(close.sum()))
            ux[close] += COINCIDENCE_GUARD
    return ux, uy


def _element_terms(ux, uy, coords, y, phi, cfg: SystemConfig):
    """Per-element gain and x/y derivative kernels, each shaped (..., N)."""
    ux = np.asarray(ux, float)[..., None]
    uy = np.asarray(uy, float)[..., None]
    r = distances(ux, uy, coords, y, cfg)
    base = np.sqrt(cfg.eta) * phi * np.exp(-1j * cfg.k0 * r)
    gain = base / r
    kern = base * (1.0 + 1j * cfg.k0 * r) / r**3
    return gain, kern * (ux - coords), kern * (uy - y)


def side_fields(ux, uy, coords, y, cfg: SystemConfig, weights=None):
    """Effective channel g and kernel sums (S_x, S_y) of one waveguide.

    The derivative of g with respect to the target coordinate is -S.
    """
    coords = np.atleast_1d(np.asarray(coords, float))
    phi = pa_weights(coords, cfg, weights)
    gain, kx, ky = _element_terms(ux, uy, coords, y, phi, cfg)
    return gain.sum(-1), kx.sum(-1), ky.sum(-1)


def _side(p: str, layout: TransceiverLayout, cfg: SystemConfig):
    if p == "tx":
        return layout.tx_x, cfg.y_tx
    if p == "rx":
        return layout.rx_x, cfg.y_rx
    raise ValueError(f"side must be 'tx' or 'rx', got {p!r}")


def derivative_kernel(alpha: str, p: str, n: int, target, layout: TransceiverLayout,
                      cfg: SystemConfig) -> complex:
    """Derivative kernel of element ``n`` on side ``p`` along axis ``alpha``.

    The y-offset is measured from the element's own waveguide.
    """
    coords, y = _side(p, layout, cfg)
    phi = pa_weights(coords, cfg)
    gain, kx, ky = _element_terms(target[0], target[1], coords[n:n + 1], y, phi[n:n + 1], cfg)
    return complex((kx if alpha == "x" else ky)[0])


def jacobian(ux, uy, layout: TransceiverLayout, cfg: SystemConfig, weights=None):
    """Gradient (f_x, f_y) of the echo mean at the given target points.

    ``weights`` optionally replaces the (tx, rx) in-waveguide vectors.
    """
    w_tx, w_rx = weights if weights is not None else (None, None)
    gt, stx, sty = side_fields(ux, uy, layout.tx_x, cfg.y_tx, cfg, w_tx)
    gr, srx, sry = side_fields(ux, uy, layout.rx_x, cfg.y_rx, cfg, w_rx)
    return -(gr * stx + gt * srx), -(gr * sty + gt * sry)


def jacobian_entry(alpha: str, target, layout: TransceiverLayout, cfg: SystemConfig,
                   weights=None) -> complex:
    """Derivative of the echo mean along ``alpha`` at one target position."""
    fx, fy = jacobian(target[0], target[1], layout, cfg, weights)
    return complex(fx if alpha == "x" else fy)


def _gram(fx, fy, w) -> np.ndarray:
    """Weighted sum of Re{f_a^* f_b}; the off-diagonal is stored twice."""
    xx = np.sum(w * (fx.real**2 + fx.imag**2), axis=0)
    xy = np.sum(w * np.real(np.conj(fx) * fy), axis=0)
    yy = np.sum(w * (fy.real**2 + fy.imag**2), axis=0)
    return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2)


def ofim(layout: TransceiverLayout, prior: TargetPrior, rule: GhqRule, cfg: SystemConfig,
         weights=None) -> np.ndarray:
    """Prior-averaged observation FIM (2x2)."""
    ux, uy, w = quadrature_points(prior, rule)
    ux, uy = _guard_nodes(ux, uy, layout, cfg)
    fx, fy = jacobian(ux, uy, layout, cfg, weights)
    return fim_scale(cfg) * _gram(fx, fy, w)


def bcrb_from_ofim(f, prior: TargetPrior):
    """Trace of the inverse BFIM; vectorized over leading axes of ``f``.

    Returns (bcrb, denominator).
    """
    f = np.asarray(f, float)
    a = f[..., 0, 0] + 1.0 / prior.var_x
    b = f[..., 1, 1] + 1.0 / prior.var_y
    den = a * b - f[..., 0, 1] ** 2
    return (a + b) / den, den


def bcrb(layout: TransceiverLayout, prior: TargetPrior, rule: GhqRule, cfg: SystemConfig,
         weights=None) -> Bfim:
    """Bayesian FIM and closed-form BCRB of a layout."""
    f = ofim(layout, prior, rule, cfg, weights)
    value, den = bcrb_from_ofim(f, prior)
    if not den > ILL_CONDITIONED_DENOM:
        raise IllConditioned(f"BFIM determinant {den:.3e} is numerically singular")
    return Bfim(float(f[0, 0]), float(f[0, 1]), float(f[1, 1]),
                1.0 / prior.var_x, 1.0 / prior.var_y, float(value))


class ElementwiseOfim:
    """Observation FIM as a function of one PA coordinate.

    With element ``q`` of side ``p`` removed, the gradient splits into a
    frozen part C (the other elements) and a candidate part A(x), so the
    FIM is Re E[C^*C] + Re E[C^*A + A^*C] + Re E[A^*A].  Everything that does
    not depend on x is evaluated once at construction.
    """

    def __init__(self, p: str, q: int, layout: TransceiverLayout, prior: TargetPrior,
                 rule: GhqRule, cfg: SystemConfig):
        self.p, self.q, self.cfg, self.prior = p, int(q), cfg, prior
        self.fingerprint = layout.fingerprint(skip=(p, self.q))
        coords, self.y = _side(p, layout, cfg)
        other = "rx" if p == "tx" else "tx"
        other_coords, other_y = _side(other, layout, cfg)
        self.n_total = coords.size
        ux, uy, self.w = quadrature_points(prior, rule)
        self.ux, self.uy = _guard_nodes(ux, uy, layout, cfg)
        self.g_other, sx_other, sy_other = side_fields(self.ux, self.uy, other_coords, other_y, cfg)
        self.s_other = np.stack([sx_other, sy_other])
        rest = np.delete(coords, self.q)
        if rest.size:
            phi = np.exp(-1j * cfg.kg * rest) / np.sqrt(self.n_total)
            gain, kx, ky = _element_terms(self.ux, self.uy, rest, self.y, phi, cfg)
            g_rest, s_rest = gain.sum(-1), np.stack([kx.sum(-1), ky.sum(-1)])
        else:
            g_rest = np.zeros_like(self.g_other)
            s_rest = np.zeros_like(self.s_other)
        # frozen part of the gradient, shape (2, T^2)
        self.frozen = -(self.g_other * s_rest + g_rest * self.s_other)
        self.scale = fim_scale(cfg)
        self.base = self.scale * _gram(self.frozen[0], self.frozen[1], self.w)
        self.evaluations = 0

    def check(self, layout: TransceiverLayout) -> None:
        if layout.fingerprint(skip=(self.p, self.q)) != self.fingerprint:
            raise StaleCache("layout changed outside the cached element")

    def candidate_gradient(self, x) -> np.ndarray:
        """Candidate part A of the gradient, shape (2, T^2, M)."""
        x = np.atleast_1d(np.asarray(x, float))
        phi = np.exp(-1j * self.cfg.kg * x) / np.sqrt(self.n_total)
        gain, kx, ky = _element_terms(self.ux, self.uy, x, self.y, phi, self.cfg)
        g_other = self.g_other[:, None]
        return np.stack([
            -(g_other * kx + gain * self.s_other[0][:, None]),
            -(g_other * ky + gain * self.s_other[1][:, None]),
        ])

    def parts(self, x):
        """The frozen, cross and candidate FIM terms, each of shape (M, 2, 2)."""
        a = self.candidate_gradient(x)
        c = self.frozen[:, :, None]
        w = self.w[:, None]
        m = a.shape[-1]
        cross = np.empty((m, 2, 2))
        for i in range(2):
            for j in range(2):
                cross[:, i, j] = np.sum(w * np.real(np.conj(c[i]) * a[j] + np.conj(a[i]) * c[j]), axis=0)
        own = _gram(a[0], a[1], w)
        self.evaluations += a.shape[1] * m
        base = np.broadcast_to(self.base, (m, 2, 2))
        return base, self.scale * cross, self.scale * own

    def ofim(self, x) -> np.ndarray:
        base, cross, own = self.parts(x)
        return base + cross + own

    def bcrb(self, x) -> np.ndarray:
        """BCRB at every candidate; ill-conditioned candidates map to +inf."""
        value, den = bcrb_from_ofim(self.ofim(x), self.prior)
        return np.where(den > ILL_CONDITIONED_DENOM, value, np.inf)


def ofim_elementwise(p: str, q: int, x: float, frozen: TransceiverLayout, prior: TargetPrior,
                     rule: GhqRule, cfg: SystemConfig, cache: ElementwiseOfim | None = None
                     ) -> np.ndarray:
    """OFIM with element ``q`` of side ``p`` moved to ``x``.

    Passing a ``cache`` built for a different complement raises StaleCache.
    """
    if cache is None:
        cache = ElementwiseOfim(p, q, frozen, prior, rule, cfg)
    else:
        cache.check(frozen)
    return cache.ofim([x])[0]
