"""Element-wise placement algorithms for several PAs per waveguide.

All three algorithms sweep the PAs one at a time.  Each update is a grid
search over the positions that keep the element between its neighbours at
the minimum spacing, scored with the element-wise SNR and FIM caches.  An
update is kept only if it beats the incumbent, so ties leave the element
where it is.

* :func:`alg1_sensing_centric` minimizes the BCRB under a per-user SNR floor.
* :func:`alg2_comm_centric` maximizes the multicast rate under a BCRB cap via
  an augmented Lagrangian.
* :func:`alg3_pareto_scan` traces the trade-off with a rate profile.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .baselines import centered_coords
from .channel import ElementwiseSnr, multicast_rate, user_snrs
from .errors import InfeasibleStart, NotConverged, ValidationError
from .fisher import Bfim, ElementwiseOfim, GhqRule, bcrb, ghq_rule
from .scenario import SPACING_RTOL, SystemConfig, TargetPrior, TransceiverLayout, UserSet, validate_layout
from .single_pa import cc_optimal_tx, rate_profile_utility

log = logging.getLogger(__name__)

CONVERGENCE_RTOL = 1e-3
# an update must beat the incumbent by this relative margin to be accepted
IMPROVE_RTOL = 1e-12
# slack on the SNR floor so the incumbent is never rejected by rounding
SNR_SLACK = 1e-9
DEFAULT_ALPHAS = tuple(np.linspace(0.001, 0.999, 21))


@dataclass
class AoState:
    """Layout and traces of an element-wise run."""

    layout: TransceiverLayout
    bcrb_trace: list[float] = field(default_factory=list)
    rate_trace: list[float] = field(default_factory=list)
    iteration: int = 0
    converged: bool = False
    feasible: bool = True
    updates: int = 0
    snr_evaluations: int = 0
    fim_evaluations: int = 0
    candidates: int = 0


@dataclass
class AlState:
    """Multiplier, penalty and violation of the augmented Lagrangian."""

    lambda_: float = 0.0
    rho: float = 1e-4
    violation: float = 0.0
    outer_iter: int = 0
    inner_iter: int = 0
    lambda_trace: list[float] = field(default_factory=list)
    rho_trace: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class AlParams:
    """Augmented-Lagrangian settings; ``eps_feas=None`` means 1e-3 of the cap."""

    lambda0: float = 0.0
    rho0: float = 1e-4
    beta: float = 2.0
    eps_in: float = 1e-3
    eps_out: float = 1e-3
    eps_feas: float | None = None
    max_inner: int = 50
    max_outer: int = 20

    def feas_tol(self, cfg: SystemConfig) -> float:
        return 1e-3 * cfg.max_bcrb if self.eps_feas is None else self.eps_feas


@dataclass(frozen=True)
class ParetoPoint:
    alpha: float
    layout: TransceiverLayout
    rate: float
    bcrb: float
    utility: float
    iterations: int = 0
    utility_trace: tuple[float, ...] = ()


# layouts and candidate sets

def uniform_layout(cfg: SystemConfig) -> TransceiverLayout:
    """Elements at the centers of N equal cells; a contiguous block if that is too tight."""
    def side(n):
        if cfg.region_x / n >= cfg.min_spacing:
            return (np.arange(n) + 0.5) * cfg.region_x / n
        return centered_coords(n, cfg)
    return TransceiverLayout(side(cfg.n_tx), side(cfg.n_rx))


def cc_warm_start(users: UserSet, cfg: SystemConfig) -> TransceiverLayout:
    """Tx block at minimum spacing around the single-PA min-max point."""
    x_star, _ = cc_optimal_tx(users, cfg)
    return TransceiverLayout(centered_coords(cfg.n_tx, cfg, x_star), uniform_layout(cfg).rx_x)


def local_feasible_set(p: str, q: int, layout: TransceiverLayout, cfg: SystemConfig) -> np.ndarray:
    """Grid points that keep element ``q`` ordered and spaced from its neighbours.

    The incumbent position is always included.
    """
    coords = layout.side(p)
    grid = cfg.grid()
    gap = cfg.min_spacing * (1 - SPACING_RTOL)
    keep = np.ones(grid.size, bool)
    if q > 0:
        keep &= grid - coords[q - 1] >= gap
    if q < coords.size - 1:
        keep &= coords[q + 1] - grid >= gap
    return np.union1d(grid[keep], coords[q:q + 1])


# shared sweep machinery

class _Evaluator:
    """Per-element candidate scores, reused while the other elements stay put."""

    def __init__(self, users, prior, rule, cfg, state: AoState, need_rate: bool):
        self.users, self.prior, self.rule, self.cfg = users, prior, rule, cfg
        self.state = state
        self.need_rate = need_rate
        self._cache = {}

    def scores(self, p: str, q: int, layout: TransceiverLayout):
        """(candidates, min SNR, BCRB) for element ``q`` of side ``p``."""
        key = (p, q)
        fp = layout.fingerprint(skip=(p, q))
        hit = self._cache.get(key)
        if hit is not None and hit[0] == fp:
            return hit[1]
        cands = local_feasible_set(p, q, layout, self.cfg)
        fim = ElementwiseOfim(p, q, layout, self.prior, self.rule, self.cfg)
        values = fim.bcrb(cands)
        self.state.fim_evaluations += fim.evaluations
        min_snr = None
        if p == "tx" and self.need_rate:
            snr = ElementwiseSnr(self.users, layout, q, self.cfg)
            min_snr = snr.snrs(cands).min(axis=0)
            self.state.snr_evaluations += snr.evaluations
        self.state.candidates += cands.size
        result = (cands, min_snr, values)
        self._cache[key] = (fp, result)
        return result


def _pick(cands, objective, current_x) -> tuple[float, bool]:
    """Best candidate (maximizing), unless it does not beat the incumbent."""
    i_cur = int(np.searchsorted(cands, current_x))
    incumbent = objective[i_cur]
    best = int(np.argmax(objective))
    gain = objective[best] - incumbent
    if np.isfinite(incumbent) and gain <= IMPROVE_RTOL * max(1.0, abs(incumbent)):
        return float(current_x), False
    if not np.isfinite(objective[best]):
        return float(current_x), False
    return float(cands[best]), True


def _record(state: AoState, layout, users, prior, rule, cfg):
    state.bcrb_trace.append(bcrb(layout, prior, rule, cfg).bcrb)
    state.rate_trace.append(multicast_rate(users, layout, cfg))


def _check_init(init: TransceiverLayout, cfg: SystemConfig):
    if not validate_layout(init, cfg):
        raise ValidationError("init", "initial layout violates ordering, range or spacing")


def _rel_change(old: float, new: float) -> float:
    return abs(new - old) / max(abs(old), 1e-300)


# sensing-centric design

def alg1_sensing_centric(init: TransceiverLayout, users: UserSet, prior: TargetPrior,
                         cfg: SystemConfig, rule: GhqRule | None = None,
                         max_iter: int | None = None) -> tuple[AoState, Bfim]:
    """Minimize the BCRB while every user keeps SNR >= the configured floor."""
    _check_init(init, cfg)
    rule = rule or ghq_rule(cfg.ghq_nodes)
    floor = cfg.min_snr * (1 - SNR_SLACK)
    if user_snrs(users, init, cfg).min() < floor:
        raise InfeasibleStart("initial Tx layout does not meet the SNR floor")
    state = AoState(init)
    _record(state, init, users, prior, rule, cfg)
    ev = _Evaluator(users, prior, rule, cfg, state, need_rate=True)
    layout = init
    for sweep in range(max_iter or cfg.ao_max_iter):
        start = state.bcrb_trace[-1]
        for p, n in (("tx", layout.tx_x.size), ("rx", layout.rx_x.size)):
            for q in range(n):
                cands, min_snr, values = ev.scores(p, q, layout)
                objective = -values
                if min_snr is not None:
                    objective = np.where(min_snr >= floor, objective, -np.inf)
                x, moved = _pick(cands, objective, layout.side(p)[q])
                state.updates += 1
                if moved:
                    layout = layout.with_element(p, q, x)
                    state.layout = layout
                    _record(state, layout, users, prior, rule, cfg)
        state.iteration = sweep + 1
        if _rel_change(start, state.bcrb_trace[-1]) < CONVERGENCE_RTOL:
            state.converged = True
            break
    return state, bcrb(layout, prior, rule, cfg)


# communications-centric design

def rate_only_ao(init: TransceiverLayout, users: UserSet, cfg: SystemConfig,
                 max_iter: int = 200) -> AoState:
    """Element-wise Tx sweeps maximizing the multicast rate alone.

    Runs until a full sweep moves nothing.
    """
    _check_init(init, cfg)
    state = AoState(init)
    layout = init
    state.rate_trace.append(multicast_rate(users, layout, cfg))
    for sweep in range(max_iter):
        moved_any = False
        for q in range(layout.tx_x.size):
            cands = local_feasible_set("tx", q, layout, cfg)
            snr = ElementwiseSnr(users, layout, q, cfg)
            rates = np.log2(1.0 + snr.snrs(cands).min(axis=0))
            state.snr_evaluations += snr.evaluations
            x, moved = _pick(cands, rates, layout.tx_x[q])
            state.updates += 1
            if moved:
                layout = layout.with_element("tx", q, x)
                state.rate_trace.append(multicast_rate(users, layout, cfg))
                moved_any = True
        state.layout = layout
        state.iteration = sweep + 1
        if not moved_any:
            state.converged = True
            break
    return state


def _al_value(rate, violation, lam, rho):
    return rate - lam * violation - 0.5 * rho * np.maximum(violation, 0.0) ** 2


def alg2_comm_centric(init: TransceiverLayout, users: UserSet, prior: TargetPrior,
                      cfg: SystemConfig, al_params: AlParams = AlParams(),
                      rule: GhqRule | None = None, strict: bool = False
                      ) -> tuple[AoState, AlState]:
    """Maximize the multicast rate subject to BCRB <= ``cfg.max_bcrb``.

    The multiplier is updated after every inner sweep and the penalty grows
    after every inner loop that ends infeasible.  If the iteration caps are hit
    while infeasible, the best feasible iterate is returned when one exists;
    otherwise the final state is returned with ``feasible=False``.  With
    ``strict`` a :class:`NotConverged` carrying ``(AoState, AlState)`` is raised
    instead.
    """
    _check_init(init, cfg)
    rule = rule or ghq_rule(cfg.ghq_nodes)
    cap = cfg.max_bcrb
    eps_feas = al_params.feas_tol(cfg)
    state = AoState(init)
    al = AlState(lambda_=al_params.lambda0, rho=al_params.rho0)
    _record(state, init, users, prior, rule, cfg)
    al.violation = max(state.bcrb_trace[-1] - cap, 0.0)
    al.lambda_trace.append(al.lambda_)
    al.rho_trace.append(al.rho)
    ev = _Evaluator(users, prior, rule, cfg, state, need_rate=True)
    layout = init
    best = (state.rate_trace[-1], layout) if al.violation <= eps_feas else None
    prev_rate = state.rate_trace[-1]
    done = False
    for outer in range(al_params.max_outer):
        for inner in range(al_params.max_inner):
            before = layout
            for p, n in (("tx", layout.tx_x.size), ("rx", layout.rx_x.size)):
                for q in range(n):
                    cands, min_snr, values = ev.scores(p, q, layout)
                    rate = np.log2(1.0 + min_snr) if p == "tx" else 0.0
                    objective = _al_value(rate, values - cap, al.lambda_, al.rho)
                    x, moved = _pick(cands, objective, layout.side(p)[q])
                    state.updates += 1
                    if moved:
                        layout = layout.with_element(p, q, x)
            state.layout = layout
            _record(state, layout, users, prior, rule, cfg)
            delta = state.bcrb_trace[-1] - cap
            al.violation = max(delta, 0.0)
            new_lambda = max(al.lambda_ + al.rho * delta, 0.0)
            lambda_step = abs(new_lambda - al.lambda_)
            al.lambda_ = new_lambda
            al.lambda_trace.append(al.lambda_)
            al.inner_iter += 1
            if al.violation <= eps_feas and (best is None or state.rate_trace[-1] > best[0]):
                best = (state.rate_trace[-1], layout)
            if layout == before and lambda_step <= al_params.eps_in * max(1.0, al.lambda_):
                break
        if al.violation > eps_feas:
            al.rho *= al_params.beta
        al.rho_trace.append(al.rho)
        al.outer_iter = outer + 1
        state.iteration = al.outer_iter
        rate = state.rate_trace[-1]
        if abs(rate - prev_rate) <= al_params.eps_out and al.violation <= eps_feas:
            done = True
            break
        prev_rate = rate
    state.converged = done
    state.feasible = al.violation <= eps_feas
    if not done and not state.feasible:
        if best is not None:
            log.info("caps reached while infeasible; returning best feasible iterate")
            state.layout = best[1]
            state.feasible = True
        if strict:
            raise NotConverged((state, al))
    return state, al


# rate-profile trade-off

def _pareto_run(alpha, init, users, prior, rule, cfg, max_iter):
    state = AoState(init)
    ev = _Evaluator(users, prior, rule, cfg, state, need_rate=True)
    layout = init
    rate = multicast_rate(users, layout, cfg)
    value = bcrb(layout, prior, rule, cfg).bcrb
    trace = [float(rate_profile_utility(rate, 1.0 / value, alpha))]
    for sweep in range(max_iter):
        start = trace[-1]
        for p, n in (("tx", layout.tx_x.size), ("rx", layout.rx_x.size)):
            for q in range(n):
                cands, min_snr, values = ev.scores(p, q, layout)
                if p == "tx":
                    objective = rate_profile_utility(np.log2(1.0 + min_snr), 1.0 / values, alpha)
                else:
                    objective = -values
                x, moved = _pick(cands, objective, layout.side(p)[q])
                state.updates += 1
                if moved:
                    trial = layout.with_element(p, q, x)
                    r = multicast_rate(users, trial, cfg)
                    b = bcrb(trial, prior, rule, cfg).bcrb
                    u = float(rate_profile_utility(r, 1.0 / b, alpha))
                    if u >= trace[-1]:
                        layout, rate, value = trial, r, b
                        trace.append(u)
        state.iteration = sweep + 1
        if _rel_change(start, trace[-1]) < CONVERGENCE_RTOL:
            state.converged = True
            break
    return ParetoPoint(float(alpha), layout, float(rate), float(value), trace[-1],
                       state.iteration, tuple(trace))


def _dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return a.bcrb <= b.bcrb and a.rate >= b.rate and (a.bcrb < b.bcrb or a.rate > b.rate)


def alg3_pareto_scan(alphas, init: TransceiverLayout, users: UserSet, prior: TargetPrior,
                     cfg: SystemConfig, rule: GhqRule | None = None,
                     max_iter: int | None = None, cross_seed: bool = True,
                     max_rounds: int = 10) -> list[ParetoPoint]:
    """One rate-profile design per ``alpha``, each started from ``init``.

    With ``cross_seed`` the per-alpha local optima are then polished against
    each other: whenever another alpha's layout scores a higher utility at
    this alpha (or the same utility while dominating in (BCRB, rate)), the
    run restarts from that layout.  Repeats until no point changes or
    ``max_rounds`` is reached.
    """
    _check_init(init, cfg)
    rule = rule or ghq_rule(cfg.ghq_nodes)
    iters = max_iter or cfg.ao_max_iter
    points = [_pareto_run(a, init, users, prior, rule, cfg, iters) for a in alphas]
    if not cross_seed:
        return points
    for _ in range(max_rounds):
        changed = False
        for i, pt in enumerate(points):
            best = pt
            for other in points:
                u = float(rate_profile_utility(other.rate, 1.0 / other.bcrb, pt.alpha))
                if u > best.utility * (1 + IMPROVE_RTOL) or (
                        u >= best.utility and _dominates(other, best)):
                    best = ParetoPoint(pt.alpha, other.layout, other.rate, other.bcrb, u,
                                       pt.iterations, pt.utility_trace)
            if best is pt:
                continue
            rerun = _pareto_run(pt.alpha, best.layout, users, prior, rule, cfg, iters)
            if rerun.utility >= best.utility:
                best = ParetoPoint(pt.alpha, rerun.layout, rerun.rate, rerun.bcrb, rerun.utility,
                                   pt.iterations + rerun.iterations,
                                   pt.utility_trace + rerun.utility_trace)
            points[i] = best
            changed = True
        if not changed:
            break
    return points


def non_dominated(points) -> list:
    """Points not dominated in (lower BCRB, higher rate), duplicates removed."""
    uniq = {}
    for pt in points:
        uniq.setdefault((round(pt.bcrb, 12), round(pt.rate, 12)), pt)
    pts = list(uniq.values())
    keep = []
    for a in pts:
        if not any(_dominates(b, a) for b in pts):
            keep.append(a)
    return keep
