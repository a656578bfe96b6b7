"""
Monte Carlo designs and the warp-speed rejection-rate harness.

Designs
-------
    continuous   X ~ N(0,1), Z ~ N(0,1), U ~ Unif[−3,3]      Y = a·Z + b·U
    discrete     X, U, V ~ Unif{1..10}                       Y = a·U + b·V

    dgp    continuous (a, b)    discrete (a, b)
    (0)    (1, 0)               (1, 0)          null
    (1)    (0.5, 0.5)           (0.9, 0.1)
    (2)    (0.25, 0.75)         (0.75, 0.25)
    (3)    (0, 1)               (0.5, 0.5)

Independent designs draw X (n1 rows) and the two Y ingredients (n2 rows)
independently; matched designs draw all three through a Gaussian copula with
correlation SIGMA_3.  Every variable is always drawn, so DGPs of the same
size share one stream per replication.

Warp speed
----------
Replication r draws data from substream (seed, data, n1, n2, r), computes the
statistic S_r and ONE bootstrap statistic B_r(τ) per τ (the same resample for
every τ).  For each τ the critical value is the ⌈(1−α)·n_mc⌉-th smallest of
{B_r(τ)} and the rejection rate is #{S_r > ĉ(τ)} / n_mc.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Literal, Sequence

import numpy as np
import pandas as pd
from numpy.random import Generator
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.linalg import LinAlgError, cholesky
from scipy.special import ndtr, ndtri
from tqdm import tqdm

from cdftransform.criterion import (
    CdfDiffField,
    MinimizeSettings,
    NuMeasure,
    make_grid,
    minimize,
    perturbation_weight,
    second_derivative_from,
)
from cdftransform.errors import DomainError
from cdftransform.inference import critical_value, scaling_factor
from cdftransform.samples import (
    MultiSampleSet,
    PairedSample,
    UnivariateSample,
    resample_pairs,
    resample_set,
)
from cdftransform.streams import STUDY_BOOT_STREAM, STUDY_DATA_STREAM, open_uniforms, substream
from cdftransform.transforms import ParamBox, builtin_family
from cdftransform.utils import default_workers

logger = logging.getLogger(__name__)

SIGMA_3 = np.array([
    [1.0, 0.5, 0.5],
    [0.5, 1.0, 0.0],
    [0.5, 0.0, 1.0],
])

SIGMA_2 = np.array([
    [1.0, 0.5],
    [0.5, 1.0],
])

# Largest double below 1; keeps Φ(z) strictly inside (0, 1) for the quantile maps.
_U_MAX = 1.0 - 2.0 ** -53
_U_MIN = 2.0 ** -1074


# ---------------------------------------------------------------------------
# Marginal quantile functions
# ---------------------------------------------------------------------------

QuantileFn = Callable[[np.ndarray], np.ndarray]


def normal_marginal(u: np.ndarray) -> np.ndarray:
    return ndtri(u)


def uniform_marginal(lower: float = -3.0, upper: float = 3.0) -> QuantileFn:
    def quantile(u: np.ndarray) -> np.ndarray:
        return lower + (upper - lower) * u
    return quantile


def discrete_uniform_marginal(k: int = 10) -> QuantileFn:
    """Unif{1..k} by ⌈k·u⌉, clamped into 1..k."""
    def quantile(u: np.ndarray) -> np.ndarray:
        return np.clip(np.ceil(k * u), 1, k)
    return quantile


# ---------------------------------------------------------------------------
# Gaussian copula
# ---------------------------------------------------------------------------

def gaussian_copula_sample(sigma, quantile_fns: Sequence[QuantileFn], n: int, rng: Generator) -> np.ndarray:
    """
    n rows from the Gaussian copula with correlation *sigma* and the given marginals.

    Z = Φ⁻¹(U)·Lᵀ with L the Cholesky factor of sigma, then column j is
    quantile_fns[j](Φ(Z_j)).  Normal variates come from inverse-CDF on open
    uniforms, so the output depends only on the stream.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    d = len(quantile_fns)
    if sigma.shape != (d, d):
        raise DomainError(f'sigma must be {d}x{d} to match {d} marginal(s), got shape {sigma.shape}')
    if not np.allclose(sigma, sigma.T) or not np.allclose(np.diag(sigma), 1.0):
        raise DomainError('sigma must be a symmetric correlation matrix with unit diagonal')
    try:
        lower = cholesky(sigma, lower=True)
    except LinAlgError as exc:
        raise DomainError(f'sigma is not positive definite: {exc}') from exc

    z = ndtri(open_uniforms(rng, (int(n), d))) @ lower.T
    u = np.clip(ndtr(z), _U_MIN, _U_MAX)
    return np.column_stack([quantile_fns[j](u[:, j]) for j in range(d)])


# ---------------------------------------------------------------------------
# DGPs
# ---------------------------------------------------------------------------

MIX_WEIGHTS: dict[str, dict[int, tuple[float, float]]] = {
    'continuous': {0: (1.0, 0.0), 1: (0.5, 0.5),  2: (0.25, 0.75), 3: (0.0, 1.0)},
    'discrete':   {0: (1.0, 0.0), 1: (0.9, 0.1),  2: (0.75, 0.25), 3: (0.5, 0.5)},
}

MARGINALS: dict[str, tuple[QuantileFn, QuantileFn, QuantileFn]] = {
    'continuous': (normal_marginal, normal_marginal, uniform_marginal(-3.0, 3.0)),
    'discrete':   (discrete_uniform_marginal(10),) * 3,
}

# ν and Θ used by the simulation designs.
DEFAULT_NU: dict[str, NuMeasure] = {
    'continuous': NuMeasure.normal(mean=0.0, sd=5.0 / 3.0),
    'discrete':   NuMeasure.normal(mean=5.0, sd=5.0),
}
STUDY_BOX = ParamBox(lower=(-0.2, 2.0 ** -0.2), upper=(0.2, 2.0 ** 0.2))


class DgpSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    family:  Literal['continuous', 'discrete'] = 'continuous'
    dgp_id:  int = 0
    pairing: Literal['independent', 'matched'] = 'independent'
    n1:      int = 500
    n2:      int = 500

    @field_validator('dgp_id')
    @classmethod
    def _known_dgp(cls, v):
        if v not in (0, 1, 2, 3):
            raise ValueError(f'dgp_id must be one of 0, 1, 2, 3, got {v}')
        return v

    @field_validator('n1', 'n2')
    @classmethod
    def _positive_size(cls, v, info):
        if v < 1:
            raise ValueError(f'{info.field_name} must be >= 1, got {v}')
        return v

    @model_validator(mode='after')
    def _matched_sizes(self):
        if self.pairing == 'matched' and self.n1 != self.n2:
            raise ValueError(f'matched pairs need n1 == n2, got {self.n1} and {self.n2}')
        return self

    @property
    def label(self) -> str:
        return f'({self.dgp_id})'


def generate(dgp: DgpSpec, rng: Generator) -> tuple[UnivariateSample, UnivariateSample] | PairedSample:
    """
    One dataset from *dgp*: (X, Y) for independent designs, a PairedSample for matched.
    """
    qx, q1, q2 = MARGINALS[dgp.family]
    a, b = MIX_WEIGHTS[dgp.family][dgp.dgp_id]
    if dgp.pairing == 'matched':
        draws = gaussian_copula_sample(SIGMA_3, (qx, q1, q2), dgp.n1, rng)
        x, first, second = draws[:, 0], draws[:, 1], draws[:, 2]
    else:
        x = gaussian_copula_sample(np.eye(1), (qx,), dgp.n1, rng)[:, 0]
        ys = gaussian_copula_sample(np.eye(2), (q1, q2), dgp.n2, rng)
        first, second = ys[:, 0], ys[:, 1]
    y = a * first + b * second

    if dgp.pairing == 'matched':
        return PairedSample.from_columns(x, y)
    return UnivariateSample.from_values(x, name='x'), UnivariateSample.from_values(y, name='y')


# ---------------------------------------------------------------------------
# Study plan
# ---------------------------------------------------------------------------

class StudyPlan(BaseModel):
    """
    A warp-speed study over a list of designs.

    nu=None uses the family default (DEFAULT_NU); box bounds default to STUDY_BOX.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    dgps:       tuple[DgpSpec, ...]
    taus:       tuple[float, ...]
    n_mc:       int = 1000
    alpha:      float = 0.05
    seed:       int = 0
    m_nodes:    int = 256
    minimize:   MinimizeSettings = MinimizeSettings()
    nu:         NuMeasure | None = None
    box_lower:  tuple[float, ...] = STUDY_BOX.lower
    box_upper:  tuple[float, ...] = STUDY_BOX.upper
    workers:    int = Field(default_factory=default_workers)
    progress:   bool = False

    @field_validator('dgps')
    @classmethod
    def _some_dgps(cls, v):
        if not v:
            raise ValueError('a study needs at least one design')
        return v

    @field_validator('taus')
    @classmethod
    def _positive_taus(cls, v):
        if not v or any(not (math.isfinite(t) and t > 0) for t in v):
            raise ValueError(f'taus must be a non-empty list of positive numbers, got {v}')
        return v

    @field_validator('n_mc', 'm_nodes', 'workers')
    @classmethod
    def _at_least_one(cls, v, info):
        if v < 1:
            raise ValueError(f'{info.field_name} must be >= 1, got {v}')
        return v

    @field_validator('alpha')
    @classmethod
    def _alpha_in_unit_interval(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f'alpha must lie in (0, 1), got {v}')
        return v

    @classmethod
    def grid(cls, family: str, pairing: str, dgp_ids: Sequence[int],
             sizes: Sequence[tuple[int, int]], **options) -> 'StudyPlan':
        """Cartesian product dgp_ids × sizes, in table row order."""
        dgps = tuple(
            DgpSpec(family=family, dgp_id=d, pairing=pairing, n1=n1, n2=n2)
            for d in dgp_ids for n1, n2 in sizes
        )
        return cls(dgps=dgps, **options)

    @property
    def box(self) -> ParamBox:
        return ParamBox(self.box_lower, self.box_upper)


# ---------------------------------------------------------------------------
# Warp-speed study
# ---------------------------------------------------------------------------

def _replicate(dgp: DgpSpec, plan: StudyPlan, family, box, grid, t_n: float,
               weights: Sequence[float], r: int) -> tuple[float, list[float]]:
    data = generate(dgp, substream(plan.seed, STUDY_DATA_STREAM, dgp.n1, dgp.n2, r))
    if isinstance(data, PairedSample):
        x, y = data.x, data.y
    else:
        x, y = data
    field = CdfDiffField(x, (y,), (family,), (box,))
    fit = minimize(field, None, grid, plan.minimize)

    rng = substream(plan.seed, STUDY_BOOT_STREAM, dgp.n1, dgp.n2, r)
    if isinstance(data, PairedSample):
        boot = resample_pairs(data, rng)
        boot_base, boot_comps = boot.x, (boot.y,)
    else:
        boot = resample_set(MultiSampleSet(base=x, comparisons=(y,)), rng)
        boot_base, boot_comps = boot.base, boot.comparisons

    draws = [
        second_derivative_from(fit.value, field.with_bootstrap(c, boot_base, boot_comps),
                               tau, None, grid, plan.minimize)
        for tau, c in zip(plan.taus, weights)
    ]
    return t_n * fit.value, draws


def rejection_rates(statistics: np.ndarray, boot_draws: np.ndarray, alpha: float) -> np.ndarray:
    """Per-column warp-speed rate #{S_r > ĉ_j} / n_mc, with ĉ_j from column j of *boot_draws*."""
    statistics = np.asarray(statistics, dtype=np.float64)
    boot_draws = np.asarray(boot_draws, dtype=np.float64).reshape(statistics.shape[0], -1)
    rates = np.empty(boot_draws.shape[1])
    for j in range(boot_draws.shape[1]):
        cv = critical_value(boot_draws[:, j], alpha)
        rates[j] = np.count_nonzero(statistics > cv) / statistics.shape[0]
    return rates


def warp_speed_study(plan: StudyPlan) -> pd.DataFrame:
    """
    Rejection-rate table: one row per design (family, pairing, dgp, n1, n2),
    one column per τ.  The same replication data feed every τ column.
    """
    family = builtin_family('location_scale')
    box = plan.box
    family.check_box(box)
    rows, index = [], []

    for dgp in plan.dgps:
        nu = plan.nu or DEFAULT_NU[dgp.family]
        grid = make_grid(nu, plan.m_nodes)
        t_n = scaling_factor(dgp.n1, [dgp.n2])
        weights = [perturbation_weight(tau, t_n)[0] for tau in plan.taus]
        logger.info('[study] %s dgp=%s %s n1=%d n2=%d n_mc=%d',
                    dgp.family, dgp.label, dgp.pairing, dgp.n1, dgp.n2, plan.n_mc)

        def run(r: int, dgp=dgp, grid=grid, t_n=t_n, weights=weights):
            return _replicate(dgp, plan, family, box, grid, t_n, weights, r)

        bar = dict(total=plan.n_mc, desc=f'{dgp.family} {dgp.label} {dgp.n1}/{dgp.n2}',
                   disable=not plan.progress, leave=False)
        if plan.workers > 1:
            with ThreadPoolExecutor(max_workers=plan.workers) as pool:
                reps = list(tqdm(pool.map(run, range(plan.n_mc)), **bar))
        else:
            reps = [run(r) for r in tqdm(range(plan.n_mc), **bar)]

        stats = np.array([s for s, _ in reps], dtype=np.float64)
        draws = np.array([b for _, b in reps], dtype=np.float64).reshape(plan.n_mc, len(plan.taus))
        rates = rejection_rates(stats, draws, plan.alpha)
        logger.debug('[study] %s rates %s', dgp.label, rates.tolist())
        rows.append(rates)
        index.append((dgp.family, dgp.pairing, dgp.label, dgp.n1, dgp.n2))

    return pd.DataFrame(
        np.vstack(rows),
        index=pd.MultiIndex.from_tuples(index, names=['family', 'pairing', 'dgp', 'n1', 'n2']),
        columns=pd.Index(list(plan.taus), name='tau'),
    )


# ---------------------------------------------------------------------------
# Table output
# ---------------------------------------------------------------------------

def rate_table_frame(table: pd.DataFrame) -> pd.DataFrame:
    """Flat frame (design columns then one `tau=<τ>` column per τ) with 3-decimal rates."""
    flat = table.copy()
    flat.columns = [f'tau={t:g}' for t in table.columns]
    flat = flat.reset_index()
    for col in flat.columns[5:]:
        flat[col] = flat[col].map(lambda v: f'{v:.3f}')
    return flat


def rate_table_text(table: pd.DataFrame) -> str:
    """Aligned text table: rows DGP × n1 × n2, columns τ; the DGP label only on a block's first row."""
    flat = rate_table_frame(table)
    blocks = flat['family'] + '/' + flat['pairing'] + '/' + flat['dgp']
    flat.loc[blocks.duplicated(), 'dgp'] = ''
    flat = flat.drop(columns=['family', 'pairing'])
    headers = ['dgp', 'n1', 'n2'] + [f'{t:g}' for t in table.columns]
    cells = [[str(v) for v in row] for row in flat.itertuples(index=False)]
    widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(headers)]

    def line(values):
        return '  '.join(v.rjust(w) for v, w in zip(values, widths)).rstrip()

    titles = sorted(set(zip(table.index.get_level_values('family'), table.index.get_level_values('pairing'))))
    out = [f'# {fam} / {pair}' for fam, pair in titles]
    out.append(line(headers))
    out.append(line(['-' * w for w in widths]))
    out.extend(line(c) for c in cells)
    return '\n'.join(out) + '\n'
