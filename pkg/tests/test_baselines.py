import math

import numpy as np
import pytest

from pinch_isac.baselines import (
    UlaConfig, analog_weights, centered_coords, centered_layout, digital_weights, layout_metrics,
    random_coords, random_layout, ula_analog_bf, ula_digital_bf,
)
from pinch_isac.channel import freespace_gains
from pinch_isac.errors import DoesNotFit
from pinch_isac.scenario import SystemConfig, UserSet, realization_rng, sample_realization, validate_layout

CFG = SystemConfig()


def case(seed, cfg=CFG):
    return sample_realization(cfg, realization_rng(cfg.rng_seed, seed))


# random and centered layouts

def test_random_layout_valid_and_seeded():
    for seed in range(200):
        a = random_layout(CFG, np.random.default_rng(seed))
        assert validate_layout(a, CFG)
        assert a == random_layout(CFG, np.random.default_rng(seed))


def test_random_single_pa_is_uniform():
    x = np.concatenate([random_coords(1, CFG, np.random.default_rng(s)) for s in range(4000)])
    assert abs(x.mean() - 5.0) < 0.15
    assert abs(x.var() - 100 / 12) < 0.4


def test_random_layout_fills_tight_waveguide():
    tight = CFG.replace(region_x=3 * CFG.min_spacing)
    assert validate_layout(random_layout(tight, np.random.default_rng(0)), tight)


def test_centered_examples():
    d = CFG.min_spacing
    np.testing.assert_allclose(centered_coords(2, CFG), [5 - d / 2, 5 + d / 2], rtol=1e-15)
    c = centered_coords(5, CFG)
    assert c[-1] - c[0] == pytest.approx(4 * d)
    assert np.mean(c) == pytest.approx(5.0)
    assert centered_coords(3, CFG, center=0.0)[0] == 0.0
    assert validate_layout(centered_layout(CFG), CFG)


def test_does_not_fit():
    with pytest.raises(DoesNotFit):
        centered_coords(2000, CFG.replace(n_tx=1))
    with pytest.raises(DoesNotFit):
        random_coords(10, CFG.replace(n_tx=1, n_rx=1, region_x=0.01), np.random.default_rng(0))


# fixed-array baselines

def test_single_user_digital_rate_is_matched_filter():
    users = UserSet([[3.0, 1.0]])
    _, prior = case(0)
    ula = UlaConfig()
    h = freespace_gains(3.0, 1.0, ula.positions(CFG), CFG.y_tx, CFG)
    expected = math.log2(1 + CFG.tx_power_w * np.sum(np.abs(h) ** 2) / CFG.noise_user_w)
    rate, _ = ula_digital_bf(users, prior, CFG)
    assert rate == pytest.approx(expected, rel=1e-9)


def test_digital_never_below_analog():
    for seed in range(10):
        users, prior = case(seed)
        assert ula_digital_bf(users, prior, CFG)[0] >= ula_analog_bf(users, prior, CFG)[0] - 1e-12


def test_analog_weights_are_constant_modulus():
    users, _ = case(1)
    w, trace = analog_weights(users, CFG)
    np.testing.assert_allclose(np.abs(w), 1 / math.sqrt(w.size), rtol=1e-12)
    assert np.linalg.norm(w) == pytest.approx(1.0)
    assert np.all(np.diff(trace) >= 0)


def test_digital_weights_unit_norm_and_ascending():
    users, _ = case(2)
    w, trace = digital_weights(users, CFG)
    assert np.linalg.norm(w) == pytest.approx(1.0)
    assert np.all(np.diff(trace) >= 0)


def test_ula_bcrb_decreases_with_power():
    users, prior = case(3)
    for scheme in (ula_digital_bf, ula_analog_bf):
        values = [scheme(users, prior, CFG.replace(tx_power_dbm=p))[1] for p in (10, 20, 30)]
        assert values[0] > values[1] > values[2]


def test_layout_metrics_for_baseline_layouts():
    users, prior = case(4)
    for layout in (centered_layout(CFG), random_layout(CFG, np.random.default_rng(4))):
        rate, value = layout_metrics(users, prior, layout, CFG)
        assert rate >= 0 and 0 < value <= prior.var_x + prior.var_y
