"""
Univariate and paired datasets, empirical CDFs and bootstrap resampling.

Samples are immutable once built: the value arrays are copied and marked
read-only, so a sample can be shared between bootstrap worker threads.
Validation (non-empty, finite) happens here, at ingestion, and nowhere else.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.random import Generator

from cdftransform.errors import DataError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _as_finite_vector(values, what: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise DataError(f'{what} is not numeric: {exc}') from exc
    if arr.size == 0:
        raise DataError(f'{what} is empty')
    bad = ~np.isfinite(arr)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(f'{what} has a non-finite value {arr[i]!r} at position {i}')
    return arr


# ---------------------------------------------------------------------------
# UnivariateSample
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UnivariateSample:
    """
    A sample of finite reals together with its ascending sorted copy.

    values       : observations in input order (read-only)
    sorted_values: ascending copy used by the ECDF (read-only)
    """
    values:        np.ndarray
    sorted_values: np.ndarray = field(repr=False)

    @classmethod
    def from_values(cls, values: Iterable[float], name: str = 'sample') -> 'UnivariateSample':
        if not isinstance(values, np.ndarray):
            values = list(values)
        return cls._trusted(_as_finite_vector(values, name))

    @classmethod
    def _trusted(cls, arr: np.ndarray) -> 'UnivariateSample':
        # Caller guarantees a fresh, finite float64 vector (resamples).
        return cls(values=_frozen(arr), sorted_values=_frozen(np.sort(arr, kind='stable')))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def ecdf(self, x) -> np.ndarray:
        """Vectorised ECDF: #{values <= x} / n for every entry of *x*."""
        return np.searchsorted(self.sorted_values, x, side='right') / self.n

    def __len__(self) -> int:
        return self.n


def ecdf_eval(sample: UnivariateSample, x: float) -> float:
    """F̂(x) = #{values <= x} / n, by binary search on the sorted copy."""
    return float(sample.ecdf(float(x)))


def resample_iid(sample: UnivariateSample, rng: Generator) -> UnivariateSample:
    """n draws with replacement from the sample's values."""
    idx = rng.integers(0, sample.n, size=sample.n)
    return UnivariateSample._trusted(sample.values[idx])


# ---------------------------------------------------------------------------
# PairedSample
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PairedSample:
    """Matched pairs (x_i, y_i); both projections are valid samples of size n."""
    x: UnivariateSample
    y: UnivariateSample

    @classmethod
    def from_columns(cls, xs: Sequence[float], ys: Sequence[float]) -> 'PairedSample':
        x = UnivariateSample.from_values(xs, name='paired x column')
        y = UnivariateSample.from_values(ys, name='paired y column')
        if x.n != y.n:
            raise DataError(f'paired columns differ in length ({x.n} vs {y.n})')
        return cls(x=x, y=y)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> 'PairedSample':
        arr = np.asarray(list(pairs), dtype=np.float64)
        if arr.size == 0:
            raise DataError('paired sample is empty')
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DataError('paired sample must be a sequence of (x, y) pairs')
        return cls.from_columns(arr[:, 0], arr[:, 1])

    @property
    def n(self) -> int:
        return self.x.n

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.x.values, self.y.values])


def resample_pairs(paired: PairedSample, rng: Generator) -> PairedSample:
    """n whole pairs drawn with replacement; coordinates stay coupled."""
    idx = rng.integers(0, paired.n, size=paired.n)
    return PairedSample(
        x=UnivariateSample._trusted(paired.x.values[idx]),
        y=UnivariateSample._trusted(paired.y.values[idx]),
    )


# ---------------------------------------------------------------------------
# MultiSampleSet
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MultiSampleSet:
    """A base sample X and K >= 1 comparison samples Y_1..Y_K."""
    base:        UnivariateSample
    comparisons: tuple[UnivariateSample, ...]

    def __post_init__(self):
        comps = tuple(self.comparisons)
        if not comps:
            raise DataError('a multi-sample set needs at least one comparison sample')
        object.__setattr__(self, 'comparisons', comps)

    @property
    def k(self) -> int:
        return len(self.comparisons)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(c.n for c in self.comparisons)


def resample_set(data: MultiSampleSet, rng: Generator) -> MultiSampleSet:
    """Independent iid resamples of the base, then of each comparison in order."""
    base = resample_iid(data.base, rng)
    comps = tuple(resample_iid(c, rng) for c in data.comparisons)
    return MultiSampleSet(base=base, comparisons=comps)
