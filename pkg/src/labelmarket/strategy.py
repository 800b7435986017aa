"""Candidate selection: greedy G-optimality, bootstrap committee, uniform random.

Selectors take the live pool as a matrix and return a position into it;
mapping positions back to seller identities is the market's job. Ties go
to the lowest position.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateCommittee, DimensionMismatch, EmptyPool, SingularDesign
from .regress import FitState, ols_fit


@dataclass(frozen=True)
class CandidateScore:
    pool_index: int
    score: Optional[float] = None


@dataclass(frozen=True)
class CommitteeSpec:
    size: int = 10
    bootstrap_fraction: float = 1.0
    # False reuses the first step's resample indices for the whole run
    refresh: bool = True

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("committee needs at least 2 members")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise ValueError("bootstrap_fraction must lie in (0, 1]")

    def resample_size(self, n_labelled: int) -> int:
        return max(1, math.ceil(self.bootstrap_fraction * n_labelled))


def _pool_matrix(pool):
    pool = np.asarray(pool, dtype=float)
    if pool.ndim == 1:
        pool = pool[None, :]
    if pool.shape[0] == 0:
        raise EmptyPool("no candidates left in the pool")
    return pool


def upv_score(info_inverse, x) -> float:
    """Unscaled prediction variance x' A x."""
    A = np.asarray(info_inverse, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if A.shape != (x.shape[0], x.shape[0]):
        raise DimensionMismatch(f"matrix {A.shape} vs vector of length {x.shape[0]}")
    return max(float(x @ A @ x), 0.0)


def upv_scores(info_inverse, pool) -> np.ndarray:
    A = np.asarray(info_inverse, dtype=float)
    pool = _pool_matrix(pool)
    if pool.shape[1] != A.shape[0]:
        raise DimensionMismatch(f"pool has {pool.shape[1]} columns, matrix is {A.shape}")
    return np.maximum(np.einsum("ij,jk,ik->i", pool, A, pool), 0.0)


def select_vbal(fit: FitState, pool) -> CandidateScore:
    scores = upv_scores(fit.info_inverse, pool)
    j = int(np.argmax(scores))
    return CandidateScore(j, float(scores[j]))


def committee_fits(X, y, spec: CommitteeSpec, rng, resamples=None):
    """Train the bootstrap committee.

    ``rng`` is a ``SeedSequence`` (or int seed); member ``m`` draws from the
    m-th spawned child, so the result does not depend on training order.
    Returns the list of fits and the resample index arrays used. Members that
    cannot be fitted even with ridge are dropped.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise DegenerateCommittee(f"need at least 2 labelled rows, have {n}")
    if resamples is None:
        ss = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
        size = spec.resample_size(n)
        resamples = [
            np.random.default_rng(child).integers(0, n, size=size)
            for child in ss.spawn(spec.size)
        ]
    fits = []
    for idx in resamples:
        try:
            fits.append(ols_fit(X[idx], y[idx]))
        except SingularDesign:
            continue
    if not fits:
        raise DegenerateCommittee("every bootstrap member is rank deficient")
    return fits, resamples


def committee_variance(predictions) -> np.ndarray:
    """Population variance (divisor M) of member predictions, shape (M, n).

    Predictions are sorted per candidate first so the floating-point result
    does not depend on the order of committee members.
    """
    P = np.sort(np.asarray(predictions, dtype=float), axis=0)
    mean = P.mean(axis=0)
    return ((P - mean) ** 2).sum(axis=0) / P.shape[0]


def select_qbc(X_labelled, y_labelled, pool, spec: CommitteeSpec, rng, resamples=None) -> CandidateScore:
    pool = _pool_matrix(pool)
    fits, _ = committee_fits(X_labelled, y_labelled, spec, rng, resamples)
    preds = np.stack([pool @ f.beta for f in fits])
    scores = committee_variance(preds)
    j = int(np.argmax(scores))
    return CandidateScore(j, float(scores[j]))


def select_rsc(pool, rng: np.random.Generator) -> CandidateScore:
    n = pool if isinstance(pool, (int, np.integer)) else _pool_matrix(pool).shape[0]
    if n == 0:
        raise EmptyPool("no candidates left in the pool")
    return CandidateScore(int(rng.integers(n)))
