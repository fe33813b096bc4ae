"""Deterministic synthetic stand-in for SAG mill operating records.

Generator version 1. Every feature is drawn inside its operating range
(Min/Max of the plant's descriptive statistics). Working in normalised
coordinates z = (x - lower) / (upper - lower), the throughput is

    T(x) = 450
         + sum of per-feature terms (15 signal features)
         + 60 * rise(power_draw, 3) * bowl(turning_speed)
         + 50 * fall(p80, 1.5) * rise(pl_13_2, 2)
         + 40 * rise(feeder1_ratio, 2) * rise(feeder3_ratio, 2)

with three term shapes

    peak(z; c, a)  = a * (1 - 4 (z - c)^2)                     best at z = c
    rise(z; b)     = (1 - exp(-b z)) / (1 - exp(-b))           best at z = 1
    fall(z; b)     = (exp(-b z) - exp(-b)) / (1 - exp(-b))     best at z = 0
    bowl(z)        = 1 - (z - 0.8)^2 / 0.64                    best at z = 0.8

Every interaction factor is non-negative on [0, 1] and peaks where the
matching main term peaks, so the global maximiser is the point where each
signal feature sits at its own optimum. The five nuisance features (fine and
coarse size fractions with little spread, and the second pebble crusher
status) are drawn with low variance around their nominal values and do not
enter T.
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, FeatureSpec

log = logging.getLogger(__name__)

SYNTHETIC_VERSION = 1
BASE_THROUGHPUT = 450.0

MILL_FEATURES = (
    FeatureSpec("mill_weight", "t", 440.14, 744.59),
    FeatureSpec("power_draw", "kW", 0.01, 14424.22),
    FeatureSpec("turning_speed", "rpm", 0.00, 10.31),
    FeatureSpec("inlet_water", "m3/h", 7.40, 482.86),
    FeatureSpec("feeder1_ratio", "-", 0.10, 1.00),
    FeatureSpec("feeder2_ratio", "-", 0.50, 1.70),
    FeatureSpec("feeder3_ratio", "-", 0.05, 1.00),
    FeatureSpec("pebble_crusher1", "-", 0.0, 2.0),
    FeatureSpec("pebble_crusher2", "-", 0.0, 2.0),
    FeatureSpec("pl_13_2", "%", 5.30, 99.30),
    FeatureSpec("pl_13_2_19", "%", 0.00, 82.70),
    FeatureSpec("pl_19_26_5", "%", 0.00, 25.00),
    FeatureSpec("pl_26_5_37_5", "%", 0.00, 34.00),
    FeatureSpec("pl_37_5_53", "%", 0.00, 16.00),
    FeatureSpec("pl_53_75", "%", 0.00, 24.00),
    FeatureSpec("pl_75_106", "%", 0.00, 71.00),
    FeatureSpec("pl_106_150", "%", 0.00, 35.00),
    FeatureSpec("pl_150_212", "%", 0.00, 5.00),
    FeatureSpec("pl_212_300", "%", 0.00, 1.00),
    FeatureSpec("p80", "mm", 4.00, 100.00),
)
MILL_TARGET = FeatureSpec("throughput", "t/h", 0.00, 1616.99)

# (shape, amplitude, shape parameter): peak -> centre, rise/fall -> rate
SIGNAL_TERMS = {
    "mill_weight": ("peak", 120.0, 0.6),
    "power_draw": ("rise", 110.0, 3.0),
    "turning_speed": ("peak", 90.0, 0.8),
    "inlet_water": ("peak", 60.0, 0.55),
    "feeder1_ratio": ("rise", 50.0, 2.0),
    "feeder2_ratio": ("peak", 70.0, 0.7),
    "feeder3_ratio": ("rise", 40.0, 2.0),
    "pebble_crusher1": ("rise", 45.0, 1.5),
    "pl_13_2": ("rise", 55.0, 2.0),
    "pl_19_26_5": ("fall", 45.0, 2.0),
    "pl_26_5_37_5": ("fall", 40.0, 2.0),
    "pl_37_5_53": ("peak", 35.0, 0.4),
    "pl_75_106": ("fall", 45.0, 2.0),
    "pl_106_150": ("fall", 40.0, 2.0),
    "p80": ("fall", 80.0, 1.5),
}

# nominal value and spread used to draw the nuisance features
NUISANCE_FEATURES = {
    "pebble_crusher2": (1.0, None),
    "pl_13_2_19": (5.19, 0.36),
    "pl_53_75": (12.91, 0.31),
    "pl_150_212": (1.60, 0.22),
    "pl_212_300": (0.67, 0.12),
}


def _rise(z, b):
    return (1.0 - np.exp(-b * z)) / (1.0 - np.exp(-b))


def _fall(z, b):
    return (np.exp(-b * z) - np.exp(-b)) / (1.0 - np.exp(-b))


def _peak(z, c):
    return 1.0 - 4.0 * (z - c) ** 2


def _bowl(z):
    return 1.0 - (z - 0.8) ** 2 / 0.64


_SHAPES = {"peak": _peak, "rise": _rise, "fall": _fall}
_OPTIMUM_Z = {"peak": lambda p: p, "rise": lambda p: 1.0, "fall": lambda p: 0.0}


@dataclass(frozen=True)
class SyntheticMill:
    schema: tuple = MILL_FEATURES
    target_spec: FeatureSpec = MILL_TARGET

    @property
    def signal_features(self) -> tuple:
        return tuple(s.name for s in self.schema if s.name in SIGNAL_TERMS)

    @property
    def nuisance_features(self) -> tuple:
        return tuple(s.name for s in self.schema if s.name in NUISANCE_FEATURES)

    def _z(self, rows: np.ndarray, name: str) -> np.ndarray:
        j = [s.name for s in self.schema].index(name)
        spec = self.schema[j]
        return (rows[:, j] - spec.lower) / (spec.upper - spec.lower)

    def evaluate(self, rows) -> np.ndarray:
        """Noise-free throughput for rows laid out in `schema` order."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        z = {name: self._z(rows, name) for name in SIGNAL_TERMS}
        total = np.full(rows.shape[0], BASE_THROUGHPUT)
        for name, (shape, amp, param) in SIGNAL_TERMS.items():
            total += amp * _SHAPES[shape](z[name], param)
        total += 60.0 * _rise(z["power_draw"], 3.0) * _bowl(z["turning_speed"])
        total += 50.0 * _fall(z["p80"], 1.5) * _rise(z["pl_13_2"], 2.0)
        total += 40.0 * _rise(z["feeder1_ratio"], 2.0) * _rise(z["feeder3_ratio"], 2.0)
        return total

    def nominal_row(self) -> np.ndarray:
        """Maximiser in schema order; nuisance features at their nominal values."""
        row = np.empty(len(self.schema))
        for j, spec in enumerate(self.schema):
            if spec.name in SIGNAL_TERMS:
                shape, _, param = SIGNAL_TERMS[spec.name]
                row[j] = spec.lower + _OPTIMUM_Z[shape](param) * (spec.upper - spec.lower)
            else:
                row[j] = NUISANCE_FEATURES[spec.name][0]
        return row

    @property
    def maximizer(self) -> np.ndarray:
        return self.nominal_row()

    @property
    def maximum(self) -> float:
        return float(self.evaluate(self.maximizer)[0])

    def evaluate_subset(self, rows, names: Sequence[str]) -> np.ndarray:
        """Throughput for rows over a feature subset; the rest sit at the maximiser."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        full = np.tile(self.nominal_row(), (rows.shape[0], 1))
        index = [s.name for s in self.schema]
        for k, name in enumerate(names):
            full[:, index.index(name)] = rows[:, k]
        return self.evaluate(full)


def generate_synthetic_mill(n: int, seed: int, noise_std: float = 20.0) -> Dataset:
    if n < 1:
        raise ValueError("n must be at least 1")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    mill = SyntheticMill()
    rng = np.random.default_rng(seed)

    rows = np.empty((n, len(mill.schema)))
    for j, spec in enumerate(mill.schema):
        if spec.name == "pebble_crusher1":
            rows[:, j] = rng.integers(0, 3, size=n).astype(float)
        elif spec.name == "pebble_crusher2":
            rows[:, j] = rng.choice([0.0, 1.0, 2.0], size=n, p=[0.03, 0.94, 0.03])
        elif spec.name in NUISANCE_FEATURES:
            centre, spread = NUISANCE_FEATURES[spec.name]
            rows[:, j] = np.clip(rng.normal(centre, spread, size=n), spec.lower, spec.upper)
        else:
            rows[:, j] = spec.lower + rng.random(n) * (spec.upper - spec.lower)

    target = mill.evaluate(rows)
    if noise_std > 0:
        target = target + rng.normal(0.0, noise_std, size=n)
    log.debug("Generated %d synthetic mill rows (seed=%s, noise=%s)", n, seed, noise_std)
    return Dataset(mill.schema, rows, target, mill.target_spec.name, mill.target_spec)
