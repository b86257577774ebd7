import ast
import math
from pathlib import Path

import numpy as np
import pytest

from pinch_isac import oracles
from pinch_isac.scenario import SystemConfig, TargetPrior, TransceiverLayout, UserSet, realization_rng, sample_realization

CFG = SystemConfig()
LAYOUT = TransceiverLayout([1.0, 3.0, 6.5], [2.0, 4.0, 9.0])


def test_oracles_depend_only_on_scenario():
    tree = ast.parse(Path(oracles.__file__).read_text())
    local = {n.module for n in ast.walk(tree) if isinstance(n, ast.ImportFrom) and n.level > 0}
    assert local == {"scenario"}


def test_mc_standard_error_shrinks_like_root_n():
    prior = TargetPrior(5.0, 0.0, 0.5, 0.5)
    _, se_small = oracles.mc_ofim(LAYOUT, prior, 4_000, np.random.default_rng(0), CFG)
    _, se_big = oracles.mc_ofim(LAYOUT, prior, 64_000, np.random.default_rng(0), CFG)
    ratio = se_small[0, 0] / se_big[0, 0]
    assert 3.0 < ratio < 5.3


def test_mc_rejects_small_samples():
    with pytest.raises(ValueError):
        oracles.mc_ofim(LAYOUT, TargetPrior(5, 0, 1, 1), 10, np.random.default_rng(0), CFG)


def test_mc_with_point_mass_prior_is_point_ofim():
    prior = TargetPrior(4.0, 1.0, 1e-16, 1e-16)
    mean, se = oracles.mc_ofim(LAYOUT, prior, 2_000, np.random.default_rng(1), CFG)
    ref = oracles.point_ofim((4.0, 1.0), LAYOUT, CFG, step=1e-6)
    np.testing.assert_allclose(mean, ref, rtol=1e-6, atol=1e-9 * np.abs(ref).max())


def test_finite_differences_converge_quadratically():
    target = (4.3, 0.7)
    exact = oracles.finite_diff_mean_jacobian(target, LAYOUT, CFG, step=1e-6)[0]
    errs = [abs(oracles.finite_diff_mean_jacobian(target, LAYOUT, CFG, step=s)[0] - exact) for s in (4e-4, 2e-4)]
    # halving the step quarters the truncation error
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_finite_difference_step_bounds():
    with pytest.raises(ValueError):
        oracles.finite_diff_mean_jacobian((1, 1), LAYOUT, CFG, step=1e-2)


def test_grid_refinement_never_worsens():
    cfg = CFG.replace(n_tx=1, n_rx=1)
    for seed in range(20):
        users, _ = sample_realization(cfg, realization_rng(seed, 0))
        vals = [oracles.minmax_sq_distance(oracles.exhaustive_single_pa_cc(users, cfg, grid_n=n), users, cfg)
                for n in (101, 201, 401, 801)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_single_user_grid_optimum_is_nearest_point():
    users = UserSet([[3.337, 1.0]])
    x = oracles.exhaustive_single_pa_cc(users, CFG, grid_n=101)
    assert x == pytest.approx(3.3)


def test_pair_search_symmetric_case():
    cfg = CFG.replace(n_tx=1, n_rx=1)
    users = UserSet([[5.0, 0.0]])
    prior = TargetPrior(5.0, 0.0, 0.5, 1.0)
    x_t, x_r, best, table = oracles.exhaustive_pair_search(users, prior, cfg, grid_n=101, enforce_rate=False)
    # mirrored prior gives a mirrored table
    np.testing.assert_allclose(table, table[::-1, ::-1], rtol=1e-6)
    assert best == table.min()
    i, j = np.unravel_index(np.argmin(table), table.shape)
    assert table[100 - i, 100 - j] == pytest.approx(best, rel=1e-6)


def test_pair_search_grid_limit():
    users, prior = sample_realization(CFG, realization_rng(0, 0))
    with pytest.raises(ValueError):
        oracles.exhaustive_pair_search(users, prior, CFG, grid_n=301)


def test_direct_snr_single_pa():
    r2 = 4.0**2 + CFG.y_tx**2 + CFG.height**2
    expected = CFG.tx_power_w * CFG.eta / (CFG.noise_user_w * r2)
    assert oracles.direct_user_snr((3.0, 0.0), [7.0], CFG) == pytest.approx(expected, rel=1e-12)


def test_report_relative_error():
    rep = oracles.OracleReport.compare([1.0, 2.0], [1.0, 2.002], 10)
    assert rep.relative_error == pytest.approx(1e-3)
    assert rep.samples_or_gridsize == 10
