"""Comparison schemes: random and centered PA layouts, fixed ULAs with beamforming.

Every scheme is scored by the same metric code as the optimized designs.
For the ULAs the beamforming vectors are passed as ``weights`` in place of
the in-waveguide coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import freespace_gains, multicast_rate
from .errors import DoesNotFit
from .fisher import bcrb, ghq_rule
from .scenario import SystemConfig, TargetPrior, TransceiverLayout, UserSet

# coordinate-ascent settings for the beamforming heuristics
BF_SWEEPS = 30
BF_PHASES = 64
BF_RTOL = 1e-9


def _check_fit(n: int, cfg: SystemConfig) -> float:
    span = (n - 1) * cfg.min_spacing
    if n < 1 or span > cfg.region_x:
        raise DoesNotFit(f"{n} PAs need {span:.4g} m on a {cfg.region_x:.4g} m waveguide")
    return span


def random_coords(n: int, cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Sorted uniform positions on the shrunk interval, re-expanded by i * spacing."""
    span = _check_fit(n, cfg)
    base = np.sort(rng.uniform(0.0, cfg.region_x - span, size=n))
    return np.minimum(base + np.arange(n) * cfg.min_spacing, cfg.region_x)


def random_layout(cfg: SystemConfig, rng: np.random.Generator) -> TransceiverLayout:
    tx = random_coords(cfg.n_tx, cfg, rng)
    return TransceiverLayout(tx, random_coords(cfg.n_rx, cfg, rng))


def centered_coords(n: int, cfg: SystemConfig, center: float | None = None) -> np.ndarray:
    """Contiguous block at minimum spacing around ``center``, shifted to fit."""
    span = _check_fit(n, cfg)
    center = cfg.region_x / 2.0 if center is None else center
    start = min(max(center - span / 2.0, 0.0), cfg.region_x - span)
    return start + np.arange(n) * cfg.min_spacing


def centered_layout(cfg: SystemConfig) -> TransceiverLayout:
    return TransceiverLayout(centered_coords(cfg.n_tx, cfg), centered_coords(cfg.n_rx, cfg))


@dataclass(frozen=True, eq=False)
class UlaConfig:
    """Fixed ULA at the feed end of each waveguide and its beamformers."""

    n_elements: int = 6
    origin_x: float = 0.0
    spacing: float | None = None
    weights_tx: np.ndarray | None = field(default=None)
    weights_rx: np.ndarray | None = field(default=None)

    def positions(self, cfg: SystemConfig) -> np.ndarray:
        spacing = cfg.min_spacing if self.spacing is None else self.spacing
        return self.origin_x + spacing * np.arange(self.n_elements)

    def layout(self, cfg: SystemConfig) -> TransceiverLayout:
        pos = self.positions(cfg)
        return TransceiverLayout(pos, pos)


def _ula_channels(users: UserSet, pos: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    return freespace_gains(users.x[:, None], users.y[:, None], pos[None, :], cfg.y_tx, cfg)


def _steering(x: float, y: float, pos: np.ndarray, waveguide_y: float, cfg: SystemConfig):
    return freespace_gains(x, y, pos, waveguide_y, cfg)


def _min_snr(h: np.ndarray, w: np.ndarray) -> float:
    return float(np.min(np.abs(h @ w) ** 2))


def _phase_ascent(h: np.ndarray, w: np.ndarray, amplitude: np.ndarray | None = None):
    """Coordinate ascent on the worst-user gain, one element phase at a time.

    The magnitudes of ``w`` are kept; each element's phase is chosen from a
    uniform grid that includes its current phase, so the trace never drops.
    """
    w = np.array(w, complex)
    mag = np.abs(w) if amplitude is None else amplitude
    trace = [_min_snr(h, w)]
    offsets = np.exp(2j * np.pi * np.arange(BF_PHASES) / BF_PHASES)
    for _ in range(BF_SWEEPS):
        start = trace[-1]
        for n in range(w.size):
            base = np.angle(w[n]) if mag[n] > 0 else 0.0
            cands = mag[n] * np.exp(1j * base) * offsets
            rest = h @ w - h[:, n] * w[n]
            vals = np.min(np.abs(rest[:, None] + h[:, n:n + 1] * cands[None, :]) ** 2, axis=0)
            best = int(np.argmax(vals))
            if vals[best] > vals[0] * (1 + BF_RTOL):
                w[n] = cands[best]
                trace.append(float(vals[best]))
        if trace[-1] <= start * (1 + BF_RTOL):
            break
    return w, trace


def _amplitude_ascent(h: np.ndarray, w: np.ndarray):
    """Min-SNR ascent over complex weights on the unit sphere.

    Alternates phase sweeps with a sweep that rescales pairs of magnitudes.
    """
    w, trace = _phase_ascent(h, w)
    grid = np.linspace(0.0, np.pi / 2, 33)
    for _ in range(BF_SWEEPS):
        start = _min_snr(h, w)
        for n in range(w.size - 1):
            pair = np.hypot(abs(w[n]), abs(w[n + 1]))
            if pair == 0:
                continue
            ph = np.exp(1j * np.angle(w[n:n + 2]))
            cands = pair * np.stack([np.cos(grid) * ph[0], np.sin(grid) * ph[1]])
            rest = h @ w - h[:, n:n + 2] @ w[n:n + 2]
            vals = np.min(np.abs(rest[:, None] + h[:, n:n + 2] @ cands) ** 2, axis=0)
            best = int(np.argmax(vals))
            if vals[best] > _min_snr(h, w) * (1 + BF_RTOL):
                w[n:n + 2] = cands[:, best]
        w, more = _phase_ascent(h, w)
        trace.extend(more[1:])
        if _min_snr(h, w) <= start * (1 + BF_RTOL):
            break
    return w, trace


def analog_weights(users: UserSet, cfg: SystemConfig, ula: UlaConfig = UlaConfig()):
    """Unit-modulus transmit phases (norm 1) and the min-gain ascent trace."""
    h = _ula_channels(users, ula.positions(cfg), cfg)
    n = ula.n_elements
    dominant = h.sum(axis=0) if users.count > 1 else h[0]
    w0 = np.exp(-1j * np.angle(dominant)) / np.sqrt(n)
    return _phase_ascent(h, w0, amplitude=np.full(n, 1.0 / np.sqrt(n)))


def digital_weights(users: UserSet, cfg: SystemConfig, ula: UlaConfig = UlaConfig()):
    """Unit-norm transmit weights from the better of the dominant eigenvector
    and the analog solution, refined by min-gain ascent."""
    h = _ula_channels(users, ula.positions(cfg), cfg)
    _, vecs = np.linalg.eigh(h.conj().T @ h)
    eig = vecs[:, -1] / np.linalg.norm(vecs[:, -1])
    analog, _ = analog_weights(users, cfg, ula)
    start = max((eig, analog), key=lambda w: _min_snr(h, w))
    w, trace = _amplitude_ascent(h, start)
    return w / np.linalg.norm(w), trace


def sensing_weights(prior: TargetPrior, cfg: SystemConfig, ula: UlaConfig = UlaConfig(),
                    analog: bool = False):
    """MRT/MRC weights matched to the prior-mean target on each ULA."""
    pos = ula.positions(cfg)
    out = []
    for y in (cfg.y_tx, cfg.y_rx):
        steer = _steering(prior.mean_x, prior.mean_y, pos, y, cfg)
        if analog:
            w = np.exp(1j * np.angle(np.conj(steer))) / np.sqrt(pos.size)
        else:
            w = np.conj(steer) / np.linalg.norm(steer)
        out.append(w)
    return tuple(out)


def _ula_metrics(users, prior, cfg, ula, w_comm, w_sense):
    layout = ula.layout(cfg)
    rate = multicast_rate(users, layout, cfg, weights=w_comm)
    rule = ghq_rule(cfg.ghq_nodes)
    value = bcrb(layout, prior, rule, cfg, weights=w_sense).bcrb
    return rate, value


def ula_digital_bf(users: UserSet, prior: TargetPrior, cfg: SystemConfig,
                   ula: UlaConfig = UlaConfig()) -> tuple[float, float]:
    """Rate and BCRB of the fully digital ULA baseline."""
    w, _ = digital_weights(users, cfg, ula)
    return _ula_metrics(users, prior, cfg, ula, w, sensing_weights(prior, cfg, ula))


def ula_analog_bf(users: UserSet, prior: TargetPrior, cfg: SystemConfig,
                  ula: UlaConfig = UlaConfig()) -> tuple[float, float]:
    """Rate and BCRB of the single-RF-chain, constant-modulus ULA baseline."""
    w, _ = analog_weights(users, cfg, ula)
    return _ula_metrics(users, prior, cfg, ula, w, sensing_weights(prior, cfg, ula, analog=True))


def layout_metrics(users: UserSet, prior: TargetPrior, layout: TransceiverLayout,
                   cfg: SystemConfig) -> tuple[float, float]:
    """Multicast rate and BCRB of a PA layout."""
    rule = ghq_rule(cfg.ghq_nodes)
    return multicast_rate(users, layout, cfg), bcrb(layout, prior, rule, cfg).bcrb
