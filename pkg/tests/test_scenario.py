import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pinch_isac.errors import DegeneratePrior, ParseError, ValidationError
from pinch_isac.scenario import (
    SPEED_OF_LIGHT, SystemConfig, TargetPrior, TransceiverLayout, UserSet, config_from_mapping,
    dbm_to_watt, load_config, parse_override, realization_rng, sample_realization, validate_layout,
)

# 1%-level Kolmogorov-Smirnov critical constant for large samples
KS_CRIT_1PCT = 1.628


def ks_uniform(samples, low, high):
    """Largest gap between the empirical CDF and U(low, high)."""
    x = np.sort((np.asarray(samples) - low) / (high - low))
    n = x.size
    i = np.arange(1, n + 1)
    return max(np.max(i / n - x), np.max(x - (i - 1) / n))


def test_derived_constants(cfg):
    lam = SPEED_OF_LIGHT / 28e9
    assert cfg.wavelength == pytest.approx(0.010707, abs=5e-7)
    assert cfg.min_spacing == pytest.approx(0.005354, abs=1e-6)
    assert cfg.min_spacing == pytest.approx(lam / 2, rel=1e-15)
    assert cfg.guided_wavelength == pytest.approx(lam / 1.44, rel=1e-15)
    assert cfg.k0 == pytest.approx(2 * math.pi / lam, rel=1e-15)
    assert cfg.kg == pytest.approx(1.44 * cfg.k0, rel=1e-15)
    assert cfg.eta == pytest.approx(SPEED_OF_LIGHT**2 / (16 * math.pi**2 * 28e9**2), rel=1e-15)


def test_power_conversion(cfg):
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(-90.0) == pytest.approx(1e-12)
    assert cfg.tx_power_w == pytest.approx(0.1)
    assert cfg.min_snr == pytest.approx(10 ** 1.2)
    assert cfg.min_rate == pytest.approx(math.log2(1 + 10 ** 1.2))


def test_too_many_antennas_rejected():
    with pytest.raises(ValidationError) as info:
        SystemConfig(n_tx=2000)
    assert info.value.field == "n_tx"


@pytest.mark.parametrize("field,value", [
    ("carrier_freq_hz", 0.0), ("grid_points", 1), ("ghq_nodes", 0), ("ghq_nodes", 65),
    ("max_bcrb", -1.0), ("n_rx", 0), ("num_users", 1.5),
])
def test_invalid_fields_name_the_field(field, value):
    with pytest.raises(ValidationError) as info:
        SystemConfig(**{field: value})
    assert info.value.field == field


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("carrier_freq_hz = 28e9\nguided_index = 1.44\nregion_x_m = 12.0\nn_tx = 2\n")
    cfg = load_config(path)
    assert cfg.region_x == 12.0 and cfg.n_tx == 2
    assert cfg.guided_wavelength == pytest.approx(cfg.wavelength / 1.44)


def test_shipped_config_matches_defaults():
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "configs" / "default.toml"
    assert load_config(path) == SystemConfig()


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("region_x_m = = 3\n")
    with pytest.raises(ParseError):
        load_config(bad)
    unknown = tmp_path / "unknown.toml"
    unknown.write_text("warp_factor = 9\n")
    with pytest.raises(ValidationError):
        load_config(unknown)
    with pytest.raises(ParseError):
        load_config(tmp_path / "missing.toml")


def test_overrides():
    assert parse_override("tx_power_dbm=25") == ("tx_power_dbm", 25)
    cfg = config_from_mapping(dict([parse_override("region_x_m = 8.5")]))
    assert cfg.region_x == 8.5
    with pytest.raises(ParseError):
        parse_override("no-equals-sign")


def test_config_hash_tracks_values(cfg):
    assert cfg.config_hash() == SystemConfig().config_hash()
    assert cfg.config_hash() != cfg.replace(tx_power_dbm=21.0).config_hash()


def test_same_seed_same_realization(cfg):
    a_users, a_prior = sample_realization(cfg, realization_rng(7, 3))
    b_users, b_prior = sample_realization(cfg, realization_rng(7, 3))
    np.testing.assert_array_equal(a_users.positions, b_users.positions)
    assert a_prior == b_prior
    c_users, _ = sample_realization(cfg, realization_rng(7, 4))
    assert not np.array_equal(a_users.positions, c_users.positions)


def test_realization_statistics(cfg):
    rng = np.random.default_rng(2024)
    draws = [sample_realization(cfg, rng) for _ in range(10_000)]
    var_y = np.array([p.var_y for _, p in draws])
    var_x = np.array([p.var_x for _, p in draws])
    ux = np.concatenate([u.x for u, _ in draws])
    uy = np.concatenate([u.y for u, _ in draws])
    assert abs(var_y.mean() - 1.0) < 0.02
    assert ux.min() >= 0.0 and ux.max() <= 10.0
    assert np.all(np.abs(uy) <= 3.0)
    assert var_x.min() >= 1e-6 and var_y.min() >= 1e-6
    crit = lambda n: KS_CRIT_1PCT / math.sqrt(n)
    assert ks_uniform(var_x, 0, 1) < crit(var_x.size)
    assert ks_uniform(var_y, 0, 2) < crit(var_y.size)
    assert ks_uniform(ux, 0, 10) < crit(ux.size)
    assert ks_uniform(uy, -3, 3) < crit(uy.size)


def test_validate_layout_examples(cfg):
    lam = cfg.wavelength
    assert validate_layout(TransceiverLayout([1.0, 1.0 + lam / 2], [5.0]), cfg)
    assert not validate_layout(TransceiverLayout([1.0, 1.0 + lam / 4], [5.0]), cfg)
    assert not validate_layout(TransceiverLayout([-0.1], [5.0]), cfg)
    assert not validate_layout(TransceiverLayout([2.0, 1.0], [5.0]), cfg)
    assert not validate_layout(TransceiverLayout([1.0], [10.5]), cfg)


def test_types_are_immutable():
    layout = TransceiverLayout([1.0, 2.0], [3.0])
    with pytest.raises(ValueError):
        layout.tx_x[0] = 0.0
    users = UserSet([[1.0, 2.0]])
    with pytest.raises(ValueError):
        users.positions[0, 0] = 0.0
    with pytest.raises(DegeneratePrior):
        TargetPrior(0.0, 0.0, 0.0, 1.0)


def test_fingerprint_skip():
    a = TransceiverLayout([1.0, 2.0], [3.0])
    b = a.with_element("tx", 1, 2.5)
    assert a.fingerprint() != b.fingerprint()
    assert a.fingerprint(skip=("tx", 1)) == b.fingerprint(skip=("tx", 1))
    assert a == TransceiverLayout([1.0, 2.0], [3.0]) and hash(a) == hash(TransceiverLayout([1.0, 2.0], [3.0]))


@settings(max_examples=60, deadline=None)
@given(gaps=st.lists(st.floats(0.0, 0.5), min_size=1, max_size=6), start=st.floats(0.0, 5.0))
def test_validate_layout_matches_definition(gaps, start):
    cfg = SystemConfig()
    coords = start + np.concatenate([[0.0], np.cumsum(gaps)])
    expected = coords[-1] <= cfg.region_x and all(g >= cfg.min_spacing * (1 - 1e-9) for g in gaps)
    assert validate_layout(TransceiverLayout(coords, [0.0]), cfg) == expected


def test_integer_and_float_values_hash_alike(cfg):
    assert cfg.replace(tx_power_dbm=25).config_hash() == cfg.replace(tx_power_dbm=25.0).config_hash()
    assert isinstance(cfg.replace(height=5).height, float)
    with pytest.raises(ValidationError):
        SystemConfig(height="5")
