import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pinch_isac import oracles
from pinch_isac.errors import PlacementClamped
from pinch_isac.fisher import ghq_rule, ofim
from pinch_isac.multi_pa import non_dominated
from pinch_isac.scenario import SystemConfig, TargetPrior, TransceiverLayout, UserSet, realization_rng, sample_realization, validate_layout
from pinch_isac.single_pa import (
    bcrb_1d, cc_candidate_set, cc_objective, cc_optimal_tx, conditional_fisher_1d, displacement_residual,
    effective_height, expected_fisher_1d, pareto_single, rate_profile_utility, rx_best_response,
    rx_search_response, sc_displacement, sc_geometry, sc_optimal_layout,
)

CFG = SystemConfig(n_tx=1, n_rx=1)
POINT = ghq_rule(1)  # single node at the prior mean


# communications-centric placement

def test_candidate_set_single_user():
    users = UserSet([[3.0, 1.0]])
    np.testing.assert_array_equal(cc_candidate_set(users, CFG), [0.0, 3.0, 10.0])


def test_candidate_set_equal_offsets_gives_midpoint():
    users = UserSet([[2.0, 1.0], [8.0, 1.0]])
    assert 5.0 in cc_candidate_set(users, CFG).tolist()
    x, _ = cc_optimal_tx(users, CFG)
    assert x == pytest.approx(5.0)


def test_candidate_set_skips_shared_abscissa():
    users = UserSet([[4.0, 1.0], [4.0, -2.0]])
    np.testing.assert_array_equal(cc_candidate_set(users, CFG), [0.0, 4.0, 10.0])


def test_candidate_set_size_bound(rng):
    for k in (1, 2, 5, 8):
        users = UserSet(rng.uniform([0, -3], [10, 3], size=(k, 2)))
        assert cc_candidate_set(users, CFG).size <= 2 + k + k * (k - 1) // 2


def test_cc_single_user_sits_over_user():
    x, rate = cc_optimal_tx(UserSet([[3.0, 0.0]]), CFG)
    assert x == 3.0
    r2 = (0.0 - CFG.y_tx) ** 2 + CFG.height**2
    assert rate == pytest.approx(math.log2(1 + CFG.tx_power_w * CFG.eta / (CFG.noise_user_w * r2)))


def test_cc_matches_grid_search():
    cfg = CFG
    n = 1000
    step = cfg.region_x / (n - 1)
    bound = 2 * cfg.region_x * step + step**2
    for seed in range(100):
        users, _ = sample_realization(cfg, realization_rng(seed, 0))
        x, _ = cc_optimal_tx(users, cfg)
        x_grid = oracles.exhaustive_single_pa_cc(users, cfg, grid_n=n)
        f_fast = cc_objective(x, users, cfg)
        f_grid = oracles.minmax_sq_distance(x_grid, users, cfg)
        assert f_fast <= f_grid + 1e-9
        assert f_grid - f_fast <= bound


# one-dimensional sensing model

def test_opposite_side_information_vanishes():
    c, d = 5.0, 2.0
    assert conditional_fisher_1d(c, c - d, c + d, CFG) == pytest.approx(0.0, abs=1e-10 * conditional_fisher_1d(c, c - d, c - d, CFG))


def test_pas_above_target_give_no_information():
    assert conditional_fisher_1d(4.0, 4.0, 4.0, CFG) == 0.0


@settings(max_examples=50, deadline=None)
@given(c=st.floats(0.5, 9.5), d=st.floats(0.01, 6.0))
def test_opposite_side_null_relative_to_same_side(c, d):
    same = conditional_fisher_1d(c, c - d, c - d, CFG)
    assert abs(conditional_fisher_1d(c, c - d, c + d, CFG)) <= 1e-10 * same


def _two_d_xx(u_x, x_t, x_r):
    prior = TargetPrior(u_x, 0.5 * (CFG.y_tx + CFG.y_rx), 1.0, 1.0)
    return ofim(TransceiverLayout([x_t], [x_r]), prior, POINT, CFG)[0, 0]


@pytest.mark.parametrize("u_x,x", [(5.0, 0.877), (2.0, 7.5), (6.3, 6.1)])
def test_same_side_matches_two_dimensional_fim(u_x, x):
    assert conditional_fisher_1d(u_x, x, x, CFG) == pytest.approx(_two_d_xx(u_x, x, x), rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(u=st.floats(0, 10), xt=st.floats(0, 10), xr=st.floats(0, 10))
def test_uncoupled_form_matches_two_dimensional_fim(u, xt, xr):
    ref = _two_d_xx(u, xt, xr)
    fast = conditional_fisher_1d(u, xt, xr, CFG, phase_coupling=False)
    assert fast == pytest.approx(ref, rel=1e-8, abs=1e-12 * conditional_fisher_1d(u, u - 4, u - 4, CFG))


def test_one_dimensional_information_matches_finite_differences():
    for u, xt, xr in [(5.0, 1.0, 1.0), (3.0, 6.0, 2.5), (7.2, 7.0, 9.9)]:
        ref = oracles._fisher_1d_fd(u, xt, xr, CFG)
        fast = conditional_fisher_1d(u, xt, xr, CFG, phase_coupling=False)
        assert fast == pytest.approx(ref, rel=1e-5)


# closed-form displacement

def test_displacement_solves_quadratic():
    d_exact, d_approx = sc_displacement(CFG)
    assert displacement_residual(d_exact, CFG) < 1e-6
    assert effective_height(CFG) == pytest.approx(math.sqrt(34))
    assert abs(d_exact - math.sqrt(34) / math.sqrt(2)) / d_exact < 1e-6
    assert d_approx == pytest.approx(math.sqrt(17))
    # leading correction from a binomial expansion of the closed-form root
    assert d_exact**2 - d_approx**2 == pytest.approx(-1 / (6 * CFG.k0**2), rel=1e-3)


def test_displacement_is_grid_maximizer_for_narrow_prior():
    d_exact, _ = sc_displacement(CFG)
    d_grid, step = oracles.displacement_grid_search(0.1, CFG)
    assert abs(d_grid - d_exact) <= step


def test_path_loss_factor_peaks_at_symmetry():
    delta = effective_height(CFG)
    eps = np.linspace(-3, 3, 60_001)
    for m in (0.5, 2.0, 4.0, 5.5):
        vals = oracles.pathloss_factor(m, eps, delta)
        at_zero = oracles.pathloss_factor(m, 0.0, delta)
        assert np.all(vals[eps != 0] < at_zero)


# sensing-centric layout

def test_sc_layout_example():
    prior = TargetPrior(5.0, 0.0, 0.5, 1.0)
    layout = sc_optimal_layout(prior, CFG)
    assert layout.tx_x[0] == pytest.approx(0.8769, abs=1e-4)
    assert layout.tx_x[0] == layout.rx_x[0]
    assert validate_layout(layout, CFG)
    geo = sc_geometry(prior, CFG)
    assert geo.center == 5.0 and geo.delta_s >= CFG.height


def test_sc_layout_clamps_with_warning():
    with pytest.warns(PlacementClamped):
        layout = sc_optimal_layout(TargetPrior(2.0, 0.0, 0.5, 1.0), CFG)
    assert layout.tx_x[0] == 0.0


def test_rx_mirror_rule():
    prior = TargetPrior(5.0, 0.0, 1.0, 1.0)
    assert rx_best_response(2.0, prior, CFG) == 8.0
    assert rx_best_response(5.0, prior, CFG) == 5.0
    with pytest.warns(PlacementClamped):
        assert rx_best_response(-1.0, prior, CFG) == 10.0


def test_rx_search_beats_mirror():
    prior = TargetPrior(4.0, 0.0, 0.3, 1.0)
    for x_t in (0.5, 2.0, 6.0):
        best = rx_search_response(x_t, prior, CFG)[0]
        mirror = rx_best_response(x_t, prior, CFG)
        assert expected_fisher_1d(x_t, best, prior, CFG) >= expected_fisher_1d(x_t, mirror, prior, CFG)


def test_bcrb_1d_bounded_by_prior():
    prior = TargetPrior(4.0, 0.0, 0.3, 1.0)
    assert 0 < bcrb_1d(1.0, 1.0, prior, CFG) < prior.var_x


# rate-profile trade-off

def test_rate_profile_utility_endpoints():
    assert rate_profile_utility(2.0, 1e9, 1.0) == pytest.approx(2.0)
    assert rate_profile_utility(1e9, 3.0, 0.0) == pytest.approx(3.0)
    assert rate_profile_utility(2.0, 3.0, 0.5) == pytest.approx(4.0)


def test_pareto_alpha_one_is_grid_cc_optimum():
    grid = CFG.grid()
    for seed in range(50):
        users, prior = sample_realization(CFG, realization_rng(seed, 0))
        pt = pareto_single(1.0, users, prior, CFG)
        x_cc, _ = cc_optimal_tx(users, CFG)
        assert pt.x_t == grid[np.argmin(cc_objective(grid, users, CFG))]
        assert abs(pt.x_t - x_cc) <= CFG.grid_step()


def test_pareto_alpha_zero_matches_sensing_design():
    step = CFG.grid_step()
    for seed in range(20):
        users, prior = sample_realization(CFG, realization_rng(seed, 0))
        pt = pareto_single(0.0, users, prior, CFG)
        sc = sc_optimal_layout(prior, CFG)
        x = sc.tx_x[0]
        ref = bcrb_1d(x, x, prior, CFG)
        slack = max(abs(bcrb_1d(min(x + step, 10), min(x + step, 10), prior, CFG) - ref),
                    abs(bcrb_1d(max(x - step, 0), max(x - step, 0), prior, CFG) - ref))
        assert 1.0 / pt.sensing_rate <= ref + slack


def test_pareto_sweep_is_non_dominated():
    alphas = np.linspace(0, 1, 21)
    for seed in range(5):
        users, prior = sample_realization(CFG, realization_rng(seed, 0))
        pts = [pareto_single(a, users, prior, CFG) for a in alphas]

        class P:
            def __init__(self, p):
                self.bcrb, self.rate = 1.0 / p.sensing_rate, p.rate

        wrapped = [P(p) for p in pts]
        unique = {(round(p.bcrb, 12), round(p.rate, 12)) for p in wrapped}
        assert len(non_dominated(wrapped)) == len(unique)


def test_pareto_rejects_bad_alpha(realization):
    users, prior = realization
    with pytest.raises(ValueError):
        pareto_single(1.5, users, prior, CFG)
