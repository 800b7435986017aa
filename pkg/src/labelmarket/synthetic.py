"""Deterministic stand-ins for the two case-study datasets.

The real-estate table follows the schema and rough marginals of the public
Sindian District valuation data (414 rows; transaction date, house age,
distance to the nearest MRT station, number of convenience stores, price per
unit area). The energy frame has two hourly building-load columns over
2016-2017 in the layout of the BDG2 meter files. Both are generated from a
fixed seed so the bundled CSVs can be rebuilt byte for byte.
"""
from __future__ import annotations

from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .data import EnergySeries, RawTable, REAL_ESTATE_COLUMNS, write_csv

REAL_ESTATE_HEADER = (
    "No",
    "X1 transaction date",
    "X2 house age",
    "X3 distance to the nearest MRT station",
    "X4 number of convenience stores",
    "X5 latitude",
    "X6 longitude",
    "Y house price of unit area",
)


NOISE_SD = 6.0
OUTLIER_RATE = 0.0


def make_real_estate(n=414, seed=2018, noise_sd=NOISE_SD, outlier_rate=OUTLIER_RATE):
    """Return the raw columns of a synthetic real-estate table as a dict."""
    rng = np.random.default_rng(seed)
    date = 2012.667 + rng.integers(0, 12, n) / 12.0
    # ages: a block of new builds plus a broad spread up to ~44 years
    new = rng.random(n) < 0.18
    age = np.where(new, rng.uniform(0.0, 5.0, n), rng.uniform(5.0, 43.8, n))
    # MRT distance is strongly right-skewed (median ~500 m, max ~6.5 km)
    dist = np.clip(np.exp(rng.normal(np.log(500.0), 1.05, n)), 23.4, 6488.0)
    logd = np.log(dist)
    p_store = 1.0 / (1.0 + np.exp(1.1 * (logd - 6.2)))
    stores = rng.binomial(10, 0.85 * p_store + 0.02)
    angle = rng.uniform(0, 2 * np.pi, n)
    lat = 24.968 + 0.00001 * dist * np.sin(angle) + rng.normal(0, 0.003, n)
    lon = 121.540 + 0.00001 * dist * np.cos(angle) + rng.normal(0, 0.003, n)
    price = (
        84.0
        - 0.26 * age
        - 7.2 * logd
        + 0.9 * stores
        + 5.0 * (date - 2013.1)
        + rng.normal(0.0, noise_sd, n)
    )
    # a handful of luxury outliers, as in the public data
    outliers = rng.random(n) < outlier_rate
    price = np.where(outliers, price + rng.uniform(30, 60, n), price)
    price = np.clip(price, 7.6, 117.5)
    return {
        "No": np.arange(1, n + 1),
        "X1 transaction date": np.round(date, 3),
        "X2 house age": np.round(age, 1),
        "X3 distance to the nearest MRT station": np.round(dist, 5),
        "X4 number of convenience stores": stores,
        "X5 latitude": np.round(lat, 5),
        "X6 longitude": np.round(lon, 5),
        "Y house price of unit area": np.round(price, 1),
    }


def real_estate_table(seed=2018, **kw) -> RawTable:
    cols = make_real_estate(seed=seed, **kw)
    feats = np.column_stack([cols[h] for h in REAL_ESTATE_HEADER[1:5]]).astype(float)
    return RawTable(feats, np.asarray(cols[REAL_ESTATE_HEADER[-1]], dtype=float), tuple(REAL_ESTATE_COLUMNS))


def write_real_estate_csv(path, seed=2018):
    cols = make_real_estate(seed=seed)
    n = len(cols["No"])
    rows = ([cols[h][i] for h in REAL_ESTATE_HEADER] for i in range(n))
    write_csv(path, REAL_ESTATE_HEADER, rows)


ENERGY_START = datetime(2016, 1, 1)
ENERGY_HOURS = 2 * 8784 - 24  # 2016-01-01 00:00 .. 2017-12-31 23:00


def _building_load(rng, hours, base, peak, weekend_factor, shared_noise, own_noise_sd):
    t = np.arange(hours)
    hour = t % 24
    dow = (t // 24 + 4) % 7  # 2016-01-01 was a Friday
    day = t / 24.0
    daily = np.exp(-0.5 * ((hour - 13.0) / 3.5) ** 2)
    weekend = np.where(dow >= 5, weekend_factor, 1.0)
    seasonal = 1.0 + 0.18 * np.cos(2 * np.pi * (day - 200) / 365.25)
    # slow occupancy drift: term time vs breaks
    drift = 1.0 + 0.12 * np.sin(2 * np.pi * day / 120.0)
    load = base * seasonal + peak * daily * weekend * drift * seasonal
    return load + shared_noise + rng.normal(0.0, own_noise_sd, hours)


SHOCK_SD = 2.0
OWN_NOISE_SD = (8.0, 9.0)
LOAD_SCALE = 1.25


def make_energy(seed=2016, hours=ENERGY_HOURS, shock_sd=SHOCK_SD, own_noise_sd=OWN_NOISE_SD,
                load_scale=LOAD_SCALE):
    """Two similar educational buildings with daily/weekly load shapes."""
    rng = np.random.default_rng(seed)
    # AR(1) disturbance shared by both buildings (weather-like)
    shocks = rng.normal(0.0, shock_sd, hours)
    shared = np.empty(hours)
    acc = 0.0
    for i in range(hours):
        acc = 0.97 * acc + shocks[i]
        shared[i] = acc
    analyst = _building_load(rng, hours, 120.0, 180.0, 0.35, shared, own_noise_sd[0])
    seller = _building_load(rng, hours, 110.0, 200.0, 0.30, 0.9 * shared, own_noise_sd[1])
    stamps = [(ENERGY_START + timedelta(hours=h)).strftime("%Y-%m-%d %H:%M:%S") for h in range(hours)]
    return stamps, np.round(load_scale * analyst, 4), np.round(load_scale * seller, 4)


def energy_series(seed=2016, **kw) -> EnergySeries:
    stamps, a, s = make_energy(seed, **kw)
    return EnergySeries(tuple(stamps), a, s, "Rachael", "Madge")


def write_energy_csv(path, seed=2016):
    stamps, a, s = make_energy(seed)
    write_csv(path, ("timestamp", "Rachael", "Madge"), zip(stamps, a, s))


DATA_DIR = Path(__file__).parent / "datasets"


def bundled(name: str) -> Path:
    """Path of a bundled CSV: ``real_estate`` or ``energy``."""
    files = {"real_estate": "real_estate_synthetic.csv", "energy": "energy_synthetic.csv"}
    return DATA_DIR / files[name]
