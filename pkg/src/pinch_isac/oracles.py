"""Brute-force reference computations.

Nothing here imports the fast channel, Fisher or design modules: the echo
mean is rebuilt from first principles, derivatives come from central
differences, expectations from Monte Carlo or numpy's Gauss-Hermite table,
and optima from exhaustive grids.  Slow on purpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import SystemConfig, TargetPrior, TransceiverLayout, UserSet

_C = 299_792_458.0


@dataclass(frozen=True)
class OracleReport:
    reference_value: object
    fast_value: object
    relative_error: float
    samples_or_gridsize: int

    @classmethod
    def compare(cls, reference, fast, size: int) -> "OracleReport":
        ref = np.asarray(reference, dtype=complex)
        fst = np.asarray(fast, dtype=complex)
        err = float(np.max(np.abs(fst - ref)) / max(float(np.max(np.abs(ref))), 1e-30))
        return cls(reference, fast, err, int(size))


def _physics(cfg: SystemConfig):
    lam = _C / cfg.carrier_freq_hz
    k0 = 2 * math.pi / lam
    kg = k0 * cfg.guided_index
    amp = lam / (4 * math.pi)  # sqrt(eta)
    return k0, kg, amp


def _side_channel(ux, uy, coords, waveguide_y, cfg, weights=None):
    """Sum over one waveguide of (feed phase) x (free-space gain) toward (ux, uy, 0)."""
    k0, kg, amp = _physics(cfg)
    ux = np.asarray(ux, float)
    uy = np.asarray(uy, float)
    total = np.zeros(np.broadcast(ux, uy).shape, complex)
    n = len(coords)
    for i, x in enumerate(coords):
        coeff = weights[i] if weights is not None else np.exp(-1j * kg * x) / math.sqrt(n)
        r = np.sqrt((ux - x) ** 2 + (uy - waveguide_y) ** 2 + cfg.height**2)
        total = total + coeff * amp * np.exp(-1j * k0 * r) / r
    return total


def direct_user_snr(user, tx_coords, cfg: SystemConfig, weights=None) -> float:
    """User SNR by explicit summation over the Tx elements."""
    g = complex(_side_channel(user[0], user[1], list(np.atleast_1d(tx_coords)), cfg.y_tx, cfg, weights))
    p = 10 ** ((cfg.tx_power_dbm - 30) / 10)
    noise = 10 ** ((cfg.noise_user_dbm - 30) / 10)
    return p * abs(g) ** 2 / noise


def mean_echo(ux, uy, layout: TransceiverLayout, cfg: SystemConfig, weights=None):
    """Noise-free echo amplitude per unit pilot: product of the two waveguide channels."""
    w_tx, w_rx = weights if weights is not None else (None, None)
    gt = _side_channel(ux, uy, list(layout.tx_x), cfg.y_tx, cfg, w_tx)
    gr = _side_channel(ux, uy, list(layout.rx_x), cfg.y_rx, cfg, w_rx)
    return gt * gr


def finite_diff_mean_jacobian(target, layout: TransceiverLayout, cfg: SystemConfig,
                              step: float = 1e-7, weights=None):
    """Central differences of the echo mean in u^x and u^y."""
    if not 1e-9 <= step <= 1e-3:
        raise ValueError("step must lie in [1e-9, 1e-3] m")
    ux, uy = np.asarray(target[0], float), np.asarray(target[1], float)
    dx = (mean_echo(ux + step, uy, layout, cfg, weights) - mean_echo(ux - step, uy, layout, cfg, weights)) / (2 * step)
    dy = (mean_echo(ux, uy + step, layout, cfg, weights) - mean_echo(ux, uy - step, layout, cfg, weights)) / (2 * step)
    return dx, dy


def _fim_prefactor(cfg: SystemConfig) -> float:
    p = 10 ** ((cfg.tx_power_dbm - 30) / 10)
    noise = 10 ** ((cfg.noise_sense_dbm - 30) / 10)
    return 2 * p / noise


def mc_ofim(layout: TransceiverLayout, prior: TargetPrior, n_samples: int,
            rng: np.random.Generator, cfg: SystemConfig, chunk: int = 100_000,
            step: float = 1e-6, weights=None):
    """Monte-Carlo OFIM with antithetic prior draws.

    Returns ``(mean, standard_error)``, both 2x2.  Gradients are central
    differences of :func:`mean_echo`.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    pairs = n_samples // 2
    s1 = np.zeros(3)
    s2 = np.zeros(3)
    done = 0
    while done < pairs:
        m = min(chunk, pairs - done)
        z = rng.standard_normal((m, 2))
        acc = np.zeros((3, m))
        for sign in (1.0, -1.0):
            ux = prior.mean_x + sign * prior.std_x * z[:, 0]
            uy = prior.mean_y + sign * prior.std_y * z[:, 1]
            fx, fy = finite_diff_mean_jacobian((ux, uy), layout, cfg, step, weights)
            acc += 0.5 * np.stack([np.abs(fx) ** 2, np.real(np.conj(fx) * fy), np.abs(fy) ** 2])
        s1 += acc.sum(axis=1)
        s2 += (acc**2).sum(axis=1)
        done += m
    mean = s1 / pairs
    var = np.maximum(s2 / pairs - mean**2, 0.0) * pairs / max(pairs - 1, 1)
    se = np.sqrt(var / pairs)
    scale = _fim_prefactor(cfg)
    as_mat = lambda v: scale * np.array([[v[0], v[1]], [v[1], v[2]]])
    return as_mat(mean), as_mat(se)


def point_ofim(target, layout: TransceiverLayout, cfg: SystemConfig, step: float = 1e-7):
    """Single-point Gramian of the finite-difference gradient."""
    fx, fy = finite_diff_mean_jacobian(target, layout, cfg, step)
    g = np.array([[abs(fx) ** 2, np.real(np.conj(fx) * fy)], [np.real(np.conj(fx) * fy), abs(fy) ** 2]])
    return _fim_prefactor(cfg) * g


# exhaustive searches

def _grid(cfg: SystemConfig, n: int) -> np.ndarray:
    return np.linspace(0.0, cfg.region_x, n)


def minmax_sq_distance(x, users: UserSet, cfg: SystemConfig):
    """Largest squared distance from a Tx PA at ``x`` to any user."""
    x = np.asarray(x, float)
    best = np.full(x.shape, -np.inf)
    for ux, uy in users.positions:
        d2 = (x - ux) ** 2 + (uy - cfg.y_tx) ** 2 + cfg.height**2
        best = np.maximum(best, d2)
    return best


def exhaustive_single_pa_cc(users: UserSet, cfg: SystemConfig, grid_n: int = 10_000) -> float:
    """Grid minimizer of the min-max squared user distance (first on ties)."""
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    grid = _grid(cfg, grid_n)
    return float(grid[np.argmin(minmax_sq_distance(grid, users, cfg))])


def _ghq_table(order: int):
    return np.polynomial.hermite.hermgauss(order)


def _bcrb_from(fxx, fxy, fyy, prior):
    a = fxx + 1 / prior.var_x
    b = fyy + 1 / prior.var_y
    return (a + b) / (a * b - fxy**2)


def exhaustive_pair_search(users: UserSet, prior: TargetPrior, cfg: SystemConfig,
                           grid_n: int = 200, step: float = 1e-6, enforce_rate: bool = True):
    """Global grid minimizer of the 2D BCRB with one PA per waveguide.

    Tx positions whose worst-user SNR is below the floor are excluded when
    ``enforce_rate`` is set.  Returns ``(x_t, x_r, bcrb, table)`` where
    ``table[i, j]`` is the BCRB at grid point i (Tx) and j (Rx).
    """
    if grid_n > 300:
        raise ValueError("grid_n above 300 is not affordable")
    grid = _grid(cfg, grid_n)
    xi, w = _ghq_table(cfg.ghq_nodes)
    ux = prior.mean_x + math.sqrt(2) * prior.std_x * xi
    uy = prior.mean_y + math.sqrt(2) * prior.std_y * xi
    ux, uy = (a.ravel() for a in np.meshgrid(ux, uy, indexing="ij"))
    wt = (np.outer(w, w) / math.pi).ravel()
    shifts = [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)]
    # channel of a lone PA at every grid point, at every shifted node
    gt = np.stack([_lone(ux + sx, uy + sy, grid, cfg.y_tx, cfg) for sx, sy in shifts])
    gr = np.stack([_lone(ux + sx, uy + sy, grid, cfg.y_rx, cfg) for sx, sy in shifts])
    table = np.empty((grid_n, grid_n))
    for i in range(grid_n):
        mu = gt[:, i, None, :] * gr  # (4, grid_n, nodes)
        fx = (mu[0] - mu[1]) / (2 * step)
        fy = (mu[2] - mu[3]) / (2 * step)
        scale = _fim_prefactor(cfg)
        fxx = scale * (np.abs(fx) ** 2) @ wt
        fxy = scale * np.real(np.conj(fx) * fy) @ wt
        fyy = scale * (np.abs(fy) ** 2) @ wt
        table[i] = _bcrb_from(fxx, fxy, fyy, prior)
    if enforce_rate:
        floor = 10 ** (cfg.min_snr_db / 10)
        ok = np.array([min(direct_user_snr(u, [x], cfg) for u in users.positions) >= floor * (1 - 1e-9)
                       for x in grid])
        table[~ok, :] = np.inf
    i, j = np.unravel_index(np.argmin(table), table.shape)
    return float(grid[i]), float(grid[j]), float(table[i, j]), table


def _lone(ux, uy, grid, waveguide_y, cfg):
    """Channel of a single PA at each grid point toward each node, shape (grid, nodes)."""
    k0, kg, amp = _physics(cfg)
    r = np.sqrt((ux[None, :] - grid[:, None]) ** 2 + (uy[None, :] - waveguide_y) ** 2 + cfg.height**2)
    return np.exp(-1j * kg * grid)[:, None] * amp * np.exp(-1j * k0 * r) / r


# one-dimensional sensing geometry

def _fisher_1d_fd(u_x, x_t, x_r, cfg: SystemConfig, step: float = 1e-6):
    """|d mu / d u^x|^2 scaled, for a target midway between the waveguides."""
    y_mid = 0.5 * (cfg.y_tx + cfg.y_rx)
    u_x = np.asarray(u_x, float)

    def mu(u):
        return _lone_pair(u, y_mid, x_t, x_r, cfg)

    d = (mu(u_x + step) - mu(u_x - step)) / (2 * step)
    return _fim_prefactor(cfg) * np.abs(d) ** 2


def _lone_pair(u, y, x_t, x_r, cfg):
    k0, kg, amp = _physics(cfg)
    out = 1.0 + 0j
    for x, wy in ((x_t, cfg.y_tx), (x_r, cfg.y_rx)):
        r = np.sqrt((u - x) ** 2 + (y - wy) ** 2 + cfg.height**2)
        out = out * np.exp(-1j * kg * x) * amp * np.exp(-1j * k0 * r) / r
    return out


def averaged_same_side_fisher(center, displacement, sigma: float, mean_x: float,
                              cfg: SystemConfig, order: int = 40):
    """Prior average of the 1D information with both PAs at ``center - displacement``."""
    xi, w = _ghq_table(order)
    u = mean_x + math.sqrt(2) * sigma * xi
    x = np.asarray(center, float) - np.asarray(displacement, float)
    vals = _fisher_1d_fd(u, x[..., None], x[..., None], cfg)
    return vals @ w / math.sqrt(math.pi)


def displacement_grid_search(sigma: float, cfg: SystemConfig, n: int = 2000,
                             mean_x: float = 5.0, order: int | None = None):
    """Grid maximizer over d in [0, 3 Delta_s] of the averaged same-side information.

    Returns ``(d_best, grid_step)``.
    """
    delta = math.sqrt(cfg.height**2 + ((cfg.y_rx - cfg.y_tx) / 2) ** 2)
    ds = np.linspace(0.0, 3 * delta, n)
    vals = averaged_same_side_fisher(mean_x, ds, sigma, mean_x, cfg, order or cfg.ghq_nodes)
    return float(ds[np.argmax(vals)]), float(ds[1] - ds[0])


def pathloss_factor(m: float, eps, delta: float):
    """1 / (R_t^2 R_r^2) with lateral offsets m + eps and m - eps."""
    eps = np.asarray(eps, float)
    return 1.0 / (((m + eps) ** 2 + delta**2) * ((m - eps) ** 2 + delta**2))


def center_stationarity_ratio(sigma: float, cfg: SystemConfig, branch: str = "same",
                              mean_x: float = 5.0, h: float = 1e-4, order: int = 40) -> float:
    """|dF/dc| at the prior mean over the smaller |dF/dc| at mean +/- sigma.

    ``branch="same"`` puts both PAs at c - d; ``"opposite"`` puts them at
    c - d and c + d.  d is the displacement maximizing the pointwise
    information for this geometry.
    """
    delta2 = cfg.height**2 + ((cfg.y_rx - cfg.y_tx) / 2) ** 2
    k0, _, _ = _physics(cfg)
    d = math.sqrt((-(k0**2 * delta2 + 3) + math.sqrt(9 * k0**4 * delta2**2 + 14 * k0**2 * delta2 + 9))
                  / (4 * k0**2))
    xi, w = _ghq_table(order)
    u = mean_x + math.sqrt(2) * sigma * xi

    def info(c):
        x_t = c - d
        x_r = c - d if branch == "same" else c + d
        return _fisher_1d_fd(u, x_t, x_r, cfg) @ w / math.sqrt(math.pi)

    def deriv(c):
        return (info(c + h) - info(c - h)) / (2 * h)

    at_mean = abs(deriv(mean_x))
    off = min(abs(deriv(mean_x + sigma)), abs(deriv(mean_x - sigma)))
    return at_mean / max(off, 1e-300)
