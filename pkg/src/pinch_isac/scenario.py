"""System parameters, random scenario generation and layout checks.

Every other module consumes the immutable types defined here.  Powers and
noise levels enter in dBm and are converted to watts exactly once, through
the ``*_w`` properties of :class:`SystemConfig`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import DegeneratePrior, ParseError, ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

SPEED_OF_LIGHT = 299_792_458.0
# floor applied when sampling prior variances (m^2)
VARIANCE_FLOOR = 1e-6
# relative slack when comparing spacings against lambda/2
SPACING_RTOL = 1e-9

# config-file key -> SystemConfig attribute
FILE_KEYS = {
    "carrier_freq_hz": "carrier_freq_hz",
    "guided_index": "guided_index",
    "region_x_m": "region_x",
    "region_y_m": "region_y",
    "height_m": "height",
    "y_tx_m": "y_tx",
    "y_rx_m": "y_rx",
    "tx_power_dbm": "tx_power_dbm",
    "noise_user_dbm": "noise_user_dbm",
    "noise_sense_dbm": "noise_sense_dbm",
    "n_tx": "n_tx",
    "n_rx": "n_rx",
    "grid_points": "grid_points",
    "ghq_nodes": "ghq_nodes",
    "min_snr_db": "min_snr_db",
    "max_bcrb": "max_bcrb",
    "rng_seed": "rng_seed",
    "num_realizations": "num_realizations",
    "num_users": "num_users",
    "ao_max_iter": "ao_max_iter",
    "ula_elements": "ula_elements",
}
_INT_FIELDS = {
    "n_tx", "n_rx", "grid_points", "ghq_nodes", "rng_seed",
    "num_realizations", "num_users", "ao_max_iter", "ula_elements",
}


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Physical constants, geometry, power budget and algorithm knobs.

    Defaults reproduce the reference scenario except for ``grid_points``
    and ``num_realizations``, which use desk-scale values.
    """

    carrier_freq_hz: float = 28e9
    guided_index: float = 1.44
    region_x: float = 10.0
    region_y: float = 6.0
    height: float = 5.0
    y_tx: float = 3.0
    y_rx: float = -3.0
    tx_power_dbm: float = 20.0
    noise_user_dbm: float = -90.0
    noise_sense_dbm: float = -90.0
    n_tx: int = 4
    n_rx: int = 4
    grid_points: int = 400
    ghq_nodes: int = 10
    min_snr_db: float = 12.0
    max_bcrb: float = 0.1
    rng_seed: int = 0
    num_realizations: int = 50
    num_users: int = 4
    ao_max_iter: int = 20
    ula_elements: int = 6

    def __post_init__(self):
        for name in _INT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                if isinstance(value, float) and value.is_integer():
                    object.__setattr__(self, name, int(value))
                else:
                    raise ValidationError(name, f"expected an integer, got {value!r}")
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name not in _INT_FIELDS:
                if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
                    raise ValidationError(f.name, f"expected a number, got {value!r}")
                # 25 and 25.0 must hash alike
                object.__setattr__(self, f.name, float(value))
        for name in ("carrier_freq_hz", "guided_index", "region_x", "region_y",
                     "height", "max_bcrb"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(name, f"must be a positive finite number, got {value!r}")
        for name in ("y_tx", "y_rx", "tx_power_dbm", "noise_user_dbm",
                     "noise_sense_dbm", "min_snr_db"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(name, "must be finite")
        for name in ("n_tx", "n_rx", "num_users", "num_realizations",
                     "ao_max_iter", "ula_elements"):
            if getattr(self, name) < 1:
                raise ValidationError(name, "must be >= 1")
        if self.grid_points < 2:
            raise ValidationError("grid_points", "must be >= 2")
        if not 1 <= self.ghq_nodes <= 64:
            raise ValidationError("ghq_nodes", "must lie in [1, 64]")
        for name in ("n_tx", "n_rx"):
            span = (getattr(self, name) - 1) * self.min_spacing
            if span > self.region_x * (1 + SPACING_RTOL):
                raise ValidationError(
                    name,
                    f"{getattr(self, name)} antennas need {span:.4g} m but the "
                    f"waveguide is {self.region_x:.4g} m long",
                )

    # derived constants
    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def guided_wavelength(self) -> float:
        return self.wavelength / self.guided_index

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def kg(self) -> float:
        return 2.0 * math.pi / self.guided_wavelength

    @property
    def eta(self) -> float:
        return SPEED_OF_LIGHT**2 / (16.0 * math.pi**2 * self.carrier_freq_hz**2)

    @property
    def min_spacing(self) -> float:
        return self.wavelength / 2.0

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watt(self.tx_power_dbm)

    @property
    def noise_user_w(self) -> float:
        return dbm_to_watt(self.noise_user_dbm)

    @property
    def noise_sense_w(self) -> float:
        return dbm_to_watt(self.noise_sense_dbm)

    @property
    def min_snr(self) -> float:
        """Linear SNR threshold gamma_c."""
        return 10.0 ** (self.min_snr_db / 10.0)

    @property
    def min_rate(self) -> float:
        """Rate threshold log2(1 + gamma_c) in bit/s/Hz."""
        return math.log2(1.0 + self.min_snr)

    def grid(self) -> np.ndarray:
        """The L-point placement grid {0, D_x/(L-1), ..., D_x}."""
        return np.linspace(0.0, self.region_x, self.grid_points)

    def grid_step(self) -> float:
        return self.region_x / (self.grid_points - 1)

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_file_dict(self) -> dict[str, Any]:
        return {key: getattr(self, attr) for key, attr in FILE_KEYS.items()}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_file_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def config_from_mapping(values: Mapping[str, Any], base: SystemConfig | None = None) -> SystemConfig:
    """Build a config from file-key names, falling back to ``base`` values."""
    unknown = sorted(set(values) - set(FILE_KEYS))
    if unknown:
        raise ValidationError(unknown[0], "unknown configuration key")
    changes = {}
    for key, value in values.items():
        if isinstance(value, (dict, list)):
            raise ParseError(f"{key}: expected a scalar value")
        changes[FILE_KEYS[key]] = value
    return dataclasses.replace(base or SystemConfig(), **changes)


def load_config(path: str | Path) -> SystemConfig:
    """Read a flat TOML ``key = value`` file into a validated config.

    Keys not present in the file keep their defaults.
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return config_from_mapping(data)


def parse_override(text: str) -> tuple[str, Any]:
    """Parse a ``key=value`` command-line override using TOML value syntax."""
    if "=" not in text:
        raise ParseError(f"override {text!r} is not of the form key=value")
    key, raw = (part.strip() for part in text.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"override {text!r}: {exc}") from exc
    return key, value


@dataclass(frozen=True, eq=False)
class UserSet:
    """Ground-level multicast user positions, one (x, y) row per user."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        if pos.shape[0] < 1:
            raise ValidationError("positions", "need at least one user")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.positions[:, 1]

    def __len__(self) -> int:
        return self.count


@dataclass(frozen=True)
class TargetPrior:
    """Independent Gaussian prior on the target's planar coordinates."""

    mean_x: float
    mean_y: float
    var_x: float
    var_y: float

    def __post_init__(self):
        if not (self.var_x > 0 and self.var_y > 0):
            raise DegeneratePrior(
                f"prior variances must be positive, got ({self.var_x}, {self.var_y})"
            )

    @property
    def std_x(self) -> float:
        return math.sqrt(self.var_x)

    @property
    def std_y(self) -> float:
        return math.sqrt(self.var_y)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TransceiverLayout:
    """Tx-PA and Rx-PA x-coordinates on the two waveguides."""

    tx_x: np.ndarray
    rx_x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tx_x", _frozen_array(self.tx_x))
        object.__setattr__(self, "rx_x", _frozen_array(self.rx_x))

    def side(self, side: str) -> np.ndarray:
        if side == "tx":
            return self.tx_x
        if side == "rx":
            return self.rx_x
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")

    def with_element(self, side: str, index: int, x: float) -> "TransceiverLayout":
        coords = np.array(self.side(side))
        coords[index] = x
        if side == "tx":
            return TransceiverLayout(coords, self.rx_x)
        return TransceiverLayout(self.tx_x, coords)

    def fingerprint(self, skip: tuple[str, int] | None = None) -> bytes:
        """Byte key of the layout, optionally with one element left out."""
        tx, rx = np.array(self.tx_x), np.array(self.rx_x)
        if skip is not None:
            side, index = skip
            if side == "tx":
                tx[index] = np.nan
            else:
                rx[index] = np.nan
        return tx.tobytes() + b"|" + rx.tobytes()

    def __eq__(self, other):
        if not isinstance(other, TransceiverLayout):
            return NotImplemented
        return (np.array_equal(self.tx_x, other.tx_x)
                and np.array_equal(self.rx_x, other.rx_x))

    def __hash__(self):
        return hash(self.fingerprint())

    def to_dict(self) -> dict[str, list[float]]:
        return {"tx_x": self.tx_x.tolist(), "rx_x": self.rx_x.tolist()}


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for realization ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _floored_uniform(rng: np.random.Generator, high: float) -> float:
    while True:
        value = rng.uniform(0.0, high)
        if value >= VARIANCE_FLOOR:
            return float(value)


def sample_realization(cfg: SystemConfig, rng: np.random.Generator) -> tuple[UserSet, TargetPrior]:
    """Draw users and a target prior uniformly over the service region.

    Prior variances follow U(0, 1) and U(0, 2) and are redrawn while below
    ``VARIANCE_FLOOR``.
    """
    k = cfg.num_users
    ux = rng.uniform(0.0, cfg.region_x, size=k)
    uy = rng.uniform(-cfg.region_y / 2, cfg.region_y / 2, size=k)
    mean_x = rng.uniform(0.0, cfg.region_x)
    mean_y = rng.uniform(-cfg.region_y / 2, cfg.region_y / 2)
    var_x = _floored_uniform(rng, 1.0)
    var_y = _floored_uniform(rng, 2.0)
    users = UserSet(np.column_stack([ux, uy]))
    return users, TargetPrior(float(mean_x), float(mean_y), var_x, var_y)


def side_is_valid(coords, cfg: SystemConfig) -> bool:
    coords = np.asarray(coords, dtype=float)
    if coords.size == 0 or not np.all(np.isfinite(coords)):
        return False
    if coords[0] < 0.0 or coords[-1] > cfg.region_x:
        return False
    gaps = np.diff(coords)
    return bool(np.all(gaps >= cfg.min_spacing * (1 - SPACING_RTOL)))


def validate_layout(layout: TransceiverLayout, cfg: SystemConfig) -> bool:
    """True iff both waveguides are ordered, in range and spaced by >= lambda/2."""
    return side_is_valid(layout.tx_x, cfg) and side_is_valid(layout.rx_x, cfg)
