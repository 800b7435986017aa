"""Dataset ingestion and experiment staging.

Seeds: every random stream is derived from one root seed and a tuple of
names through ``numpy.random.SeedSequence(root, spawn_key=...)``. Name parts
are mapped to integers with CRC32, so a stream such as
``("montecarlo-rep", 7, "split")`` is reproducible on its own, independent of
which other streams were drawn before it.
"""
from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateRange,
    ParseError,
    SchemaMismatch,
    SeriesTooShort,
    SizeConflict,
)

# ---------------------------------------------------------------- RNG streams


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream counters must be nonnegative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def seed_sequence(root: int, *names) -> np.random.SeedSequence:
    """SeedSequence for the named stream under ``root``."""
    return np.random.SeedSequence(int(root), spawn_key=tuple(_key_part(p) for p in names))


def derive_rng(root: int, *names) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(root, *names))


# ---------------------------------------------------------------- raw tables


@dataclass(frozen=True, eq=False)
class RawTable:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple

    @property
    def n_rows(self):
        return self.features.shape[0]


# column name -> required substrings (case-insensitive); first match wins
REAL_ESTATE_COLUMNS = {
    "transaction_date": ("transaction date",),
    "house_age": ("house age",),
    "mrt_distance": ("mrt",),
    "convenience_stores": ("convenience store",),
}
REAL_ESTATE_LABEL = ("price",)


def _find_column(header, needles):
    norm = [h.strip().lower().replace("_", " ") for h in header]
    for i, h in enumerate(norm):
        if all(n in h for n in needles):
            return i
    return None


def _parse_float(text, row, column):
    text = text.strip()
    if text == "":
        raise ParseError(f"missing value in column {column!r}", row=row)
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} in column {column!r}", row=row) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value in column {column!r}", row=row)
    return value


def _read_rows(path):
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path} is empty", row=1)
    return rows[0], rows[1:]


def load_real_estate(path) -> RawTable:
    """Read the real-estate valuation CSV.

    Recognizes the public dataset's headers (``X2 house age``, ``X3 distance
    to the nearest MRT station``, ...) as well as snake_case variants. Row
    numbers in errors count the header as row 1.
    """
    header, body = _read_rows(path)
    idx = {}
    missing = []
    for name, needles in REAL_ESTATE_COLUMNS.items():
        i = _find_column(header, needles)
        if i is None:
            missing.append(name)
        idx[name] = i
    label_idx = _find_column(header, REAL_ESTATE_LABEL)
    if label_idx is None:
        missing.append("price_per_unit_area")
    if missing:
        raise SchemaMismatch(missing)
    if not body:
        raise ParseError("no data rows", row=2)

    cols = list(idx.values())
    feats = np.empty((len(body), len(cols)))
    labels = np.empty(len(body))
    for r, row in enumerate(body):
        rownum = r + 2
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=rownum)
        for c, i in enumerate(cols):
            feats[r, c] = _parse_float(row[i], rownum, header[i])
        labels[r] = _parse_float(row[label_idx], rownum, header[label_idx])
    return RawTable(feats, labels, tuple(REAL_ESTATE_COLUMNS))


@dataclass(frozen=True, eq=False)
class EnergySeries:
    timestamps: tuple
    analyst: np.ndarray
    seller: np.ndarray
    analyst_name: str
    seller_name: str


def load_energy(path, analyst_column: str, seller_column: str) -> EnergySeries:
    """Read an hourly meter CSV: a timestamp column plus one column per building."""
    header, body = _read_rows(path)
    ts_idx = _find_column(header, ("timestamp",))
    missing = []
    if ts_idx is None:
        missing.append("timestamp")
    cols = {}
    for name in (analyst_column, seller_column):
        try:
            cols[name] = [h.strip() for h in header].index(name)
        except ValueError:
            missing.append(name)
    if missing:
        raise SchemaMismatch(missing)
    if not body:
        raise ParseError("no data rows", row=2)
    stamps = []
    a = np.empty(len(body))
    s = np.empty(len(body))
    for r, row in enumerate(body):
        rownum = r + 2
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=rownum)
        stamps.append(row[ts_idx].strip())
        a[r] = _parse_float(row[cols[analyst_column]], rownum, analyst_column)
        s[r] = _parse_float(row[cols[seller_column]], rownum, seller_column)
    return EnergySeries(tuple(stamps), a, s, analyst_column, seller_column)


# ---------------------------------------------------------------- lag features


@dataclass(frozen=True)
class LagSpec:
    lags: tuple = (168, 144, 120, 96, 72, 48, 24)
    target_offset: int = 0

    def __post_init__(self):
        lags = tuple(int(v) for v in self.lags)
        if not lags or any(v <= 0 for v in lags):
            raise ValueError("lags must be positive")
        if any(a <= b for a, b in zip(lags, lags[1:])):
            raise ValueError("lags must be strictly decreasing")
        if self.target_offset != 0:
            raise ValueError("only same-hour targets (target_offset=0) are supported")
        object.__setattr__(self, "lags", lags)

    @property
    def max_lag(self):
        return self.lags[0]


def build_lag_samples(series, spec: LagSpec = LagSpec()):
    """Sliding-window samples: row t holds series[t - lag] for each lag, label series[t]."""
    s = np.asarray(series, dtype=float).ravel()
    if not np.all(np.isfinite(s)):
        raise ValueError("series contains non-finite values")
    if s.shape[0] <= spec.max_lag:
        raise SeriesTooShort(f"series length {s.shape[0]} <= max lag {spec.max_lag}")
    t = np.arange(spec.max_lag, s.shape[0])
    lags = np.asarray(spec.lags)
    features = s[t[:, None] - lags[None, :]]
    return features, s[t]


# ---------------------------------------------------------------- splitting


@dataclass(frozen=True, eq=False)
class Normalization:
    offset: np.ndarray
    scale: np.ndarray
    target_offset: float = 0.0
    target_scale: float = 1.0

    def apply(self, features):
        return (np.asarray(features, dtype=float) - self.offset) / self.scale

    def invert(self, normalized):
        return np.asarray(normalized, dtype=float) * self.scale + self.offset

    def apply_target(self, y):
        return (np.asarray(y, dtype=float) - self.target_offset) / self.target_scale

    def invert_target(self, y):
        return np.asarray(y, dtype=float) * self.target_scale + self.target_offset


@dataclass(frozen=True, eq=False)
class LabelledPool:
    """Staged market data.

    Feature matrices already carry the leading intercept column. Row-index
    arrays refer to the source table (or sample array) the split came from.
    """

    X_labelled: np.ndarray
    y_labelled: np.ndarray
    X_pool: np.ndarray
    y_pool: np.ndarray  # hidden labels, only revealed to the market on purchase
    feature_names: tuple
    normalization: Normalization
    X_val: Optional[np.ndarray] = None
    y_val: Optional[np.ndarray] = None
    labelled_rows: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    pool_rows: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    val_rows: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    raw_pool_features: Optional[np.ndarray] = None

    @property
    def k(self):
        return self.X_labelled.shape[0]

    @property
    def pool_size(self):
        return self.X_pool.shape[0]

    @property
    def has_validation(self):
        return self.X_val is not None and self.X_val.shape[0] > 0

    def fingerprint(self) -> str:
        """Short stable digest of the row assignment, for logging paired runs."""
        h = zlib.crc32(np.ascontiguousarray(self.labelled_rows, dtype=np.int64).tobytes())
        h = zlib.crc32(np.ascontiguousarray(self.pool_rows, dtype=np.int64).tobytes(), h)
        h = zlib.crc32(np.ascontiguousarray(self.val_rows, dtype=np.int64).tobytes(), h)
        return f"{h:08x}"


def _fit_normalization(features, labels, normalize_target):
    offset = features.mean(axis=0)
    scale = features.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    if normalize_target:
        t_off = float(labels.mean())
        t_scale = float(labels.std()) or 1.0
    else:
        t_off, t_scale = 0.0, 1.0
    return Normalization(offset, scale, t_off, t_scale)


def _with_intercept(features):
    return np.hstack([np.ones((features.shape[0], 1)), features])


def _stage(
    features,
    labels,
    names,
    lab_rows,
    pool_rows,
    val_rows,
    normalize_target,
    val_features=None,
    val_labels=None,
    pool_features=None,
    pool_labels=None,
):
    Fl, yl = features[lab_rows], labels[lab_rows]
    if pool_features is None:
        Fp, yp = features[pool_rows], labels[pool_rows]
    else:
        Fp, yp = pool_features[pool_rows], pool_labels[pool_rows]
    if val_features is None:
        Fv, yv = features[val_rows], labels[val_rows]
    else:
        Fv, yv = val_features[val_rows], val_labels[val_rows]
    norm = _fit_normalization(np.vstack([Fl, Fp]), np.concatenate([yl, yp]), normalize_target)
    X_val = _with_intercept(norm.apply(Fv)) if len(val_rows) else None
    y_val = norm.apply_target(yv) if len(val_rows) else None
    return LabelledPool(
        X_labelled=_with_intercept(norm.apply(Fl)),
        y_labelled=norm.apply_target(yl),
        X_pool=_with_intercept(norm.apply(Fp)),
        y_pool=norm.apply_target(yp),
        feature_names=("intercept",) + tuple(names),
        normalization=norm,
        X_val=X_val,
        y_val=y_val,
        labelled_rows=np.asarray(lab_rows, dtype=int),
        pool_rows=np.asarray(pool_rows, dtype=int),
        val_rows=np.asarray(val_rows, dtype=int),
        raw_pool_features=Fp.copy(),
    )


def split_pool(
    table: RawTable,
    k_init: int,
    pool_size: int,
    val_fraction: float = 0.0,
    seed=0,
    normalize_target: bool = False,
) -> LabelledPool:
    """Seeded shuffle, then labelled / pool / validation partition.

    ``seed`` is an int or a ``SeedSequence``. Validation takes
    ``round(val_fraction * rows)`` rows after the labelled and pool blocks;
    rows beyond that are left out. Features are standardized with the mean
    and std of the labelled and pool rows together.
    """
    n = table.n_rows
    if k_init < 1:
        raise SizeConflict("k_init must be at least 1")
    if pool_size < 0 or not 0.0 <= val_fraction < 1.0:
        raise SizeConflict("pool_size must be >= 0 and val_fraction in [0, 1)")
    n_val = int(round(val_fraction * n))
    if k_init + pool_size + n_val > n:
        raise SizeConflict(f"k_init + pool_size + validation = {k_init + pool_size + n_val} > {n} rows")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    lab = order[:k_init]
    pool = order[k_init:k_init + pool_size]
    val = order[k_init + pool_size:k_init + pool_size + n_val]
    return _stage(table.features, table.labels, table.feature_names, lab, pool, val, normalize_target)


def stage_energy(
    energy: EnergySeries,
    k_init: int = 100,
    pool_size: int = 300,
    val_fraction: float = 0.2,
    seed=0,
    lag_spec: LagSpec = LagSpec(),
) -> LabelledPool:
    """Stage the analyst/seller forecasting market.

    The analyst's lag samples are split chronologically: the last
    ``val_fraction`` become the validation set, the initial labelled set is
    drawn from the earlier part. Pool points are the seller's lag samples
    from the same earlier period, so no pool label overlaps validation time.
    """
    Fa, ya = build_lag_samples(energy.analyst, lag_spec)
    Fs, ys = build_lag_samples(energy.seller, lag_spec)
    n = Fa.shape[0]
    n_val = int(round(val_fraction * n))
    n_train = n - n_val
    n_seller_train = min(n_train, Fs.shape[0])
    if k_init < 1 or k_init > n_train or pool_size > n_seller_train:
        raise SizeConflict(
            f"need k_init <= {n_train} and pool_size <= {n_seller_train}, got {k_init}, {pool_size}"
        )
    rng = np.random.default_rng(seed)
    lab = np.sort(rng.choice(n_train, size=k_init, replace=False))
    pool = np.sort(rng.choice(n_seller_train, size=pool_size, replace=False))
    val = np.arange(n_train, n)
    names = tuple(f"lag_{v}" for v in lag_spec.lags)
    return _stage(Fa, ya, names, lab, pool, val, False, pool_features=Fs, pool_labels=ys)


# ---------------------------------------------------------------- WTS


class WtsKind(str, Enum):
    SYNTHETIC = "synthetic"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class WtsModel:
    """Seller willingness-to-sell generator.

    Synthetic: eta = d0 + d1 * (1 - (x - min) / (max - min)) on a driver
    feature, min/max over the full dataset. Uniform: eta everywhere.
    ``scale`` multiplies the result.
    """

    kind: WtsKind = WtsKind.SYNTHETIC
    d0: float = 0.1
    d1: float = 0.5
    eta: float = 0.0
    driver_feature: str = "mrt_distance"
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", WtsKind(self.kind))
        if min(self.d0, self.d1, self.eta, self.scale) < 0:
            raise ValueError("WTS parameters must be nonnegative")

    @classmethod
    def uniform(cls, eta, scale=1.0):
        return cls(WtsKind.UNIFORM, d0=0.0, d1=0.0, eta=eta, scale=scale)


def synth_wts(driver_values, model: WtsModel, driver_range=None) -> np.ndarray:
    """WTS vector for the given pool.

    ``driver_values`` are the raw (unnormalized) driver feature values of the
    pool; ``driver_range`` is the (min, max) observed over the whole dataset
    and defaults to the pool's own range.
    """
    x = np.asarray(driver_values, dtype=float).ravel()
    if model.kind is WtsKind.UNIFORM:
        return np.full(x.shape[0], model.eta * model.scale)
    if driver_range is None:
        if x.size == 0:
            return np.empty(0)
        driver_range = (x.min(), x.max())
    lo, hi = map(float, driver_range)
    if not hi > lo:
        raise DegenerateRange(f"driver range [{lo}, {hi}] is degenerate")
    frac = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return (model.d0 + model.d1 * (1.0 - frac)) * model.scale


def pool_wts(table: RawTable, staged: LabelledPool, model: WtsModel) -> np.ndarray:
    """WTS for the staged pool, with the driver range taken over the full table."""
    if model.kind is WtsKind.UNIFORM:
        return synth_wts(np.zeros(staged.pool_size), model)
    j = list(table.feature_names).index(model.driver_feature)
    col = table.features[:, j]
    return synth_wts(staged.raw_pool_features[:, j], model, (col.min(), col.max()))


def write_csv(path, header: Sequence[str], rows):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def fmt(v) -> str:
    """Shortest round-trip text for numbers; lowercase booleans."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)
