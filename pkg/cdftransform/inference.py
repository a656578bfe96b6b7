"""
The hypothesis test: statistic, numerical bootstrap, critical value, p-value, decision.

Pipeline (two-sample and K-sample share it; two-sample is K = 1):

    1. ν (explicit or auto) → quadrature grid
    2. L(φ̂ₙ) by lattice search; statistic = Tₙ·L(φ̂ₙ)
    3. for b = 1..n_boot, on substream (seed, b):
           resample (iid per sample, or whole pairs)
           boot_b = [L(φ̂ₙ + τ·√Tₙ(φ̂* − φ̂ₙ)) − L(φ̂ₙ)] / τ²
    4. critical value = ⌈(1−α)·n_boot⌉-th order statistic; reject ⇔ statistic > it

Bootstrap iterations may run on a thread pool; each draws only from its own
substream and results are gathered in iteration order, so the outcome never
depends on the worker count.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from cdftransform.criterion import (
    DEFAULT_M_NODES,
    CdfDiffField,
    MinimizeSettings,
    NuMeasure,
    QuadratureGrid,
    make_grid,
    minimize,
    perturbation_weight,
    second_derivative_from,
)
from cdftransform.errors import DataError, DomainError, UnsupportedConfigurationError
from cdftransform.samples import (
    MultiSampleSet,
    PairedSample,
    UnivariateSample,
    resample_pairs,
    resample_set,
)
from cdftransform.streams import BOOTSTRAP_STREAM, substream
from cdftransform.transforms import ParamBox, TransformFamily, audit_monotonicity
from cdftransform.utils import convert_numpy_types, default_workers

logger = logging.getLogger(__name__)

# Fraction of the base-sample range added on each side by auto_nu.
AUTO_NU_PADDING = 0.005


# ---------------------------------------------------------------------------
# Configuration and result records
# ---------------------------------------------------------------------------

class TestConfig(BaseModel):
    """Settings of one test run; tau is required (there is no default step size)."""
    __test__: ClassVar[bool] = False
    model_config = ConfigDict(frozen=True, extra='forbid')

    tau:      float
    alpha:    float = 0.05
    n_boot:   int = 1000
    m_nodes:  int = DEFAULT_M_NODES
    seed:     int = 0
    pairing:  Literal['independent', 'matched'] = 'independent'
    minimize: MinimizeSettings = MinimizeSettings()
    nu:       NuMeasure | Literal['auto'] = 'auto'
    workers:  int = Field(default_factory=default_workers)
    progress: bool = False
    audit:    bool = True

    @field_validator('alpha')
    @classmethod
    def _alpha_in_unit_interval(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f'alpha must lie in (0, 1), got {v}')
        return v

    @field_validator('tau')
    @classmethod
    def _tau_positive(cls, v):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f'tau must be > 0, got {v}')
        return v

    @field_validator('n_boot', 'm_nodes', 'workers')
    @classmethod
    def _at_least_one(cls, v, info):
        if v < 1:
            raise ValueError(f'{info.field_name} must be >= 1, got {v}')
        return v


@dataclass
class TestResult:
    """
    Outcome of one test at one τ.

    statistic     : Tₙ·L(φ̂ₙ)
    theta_hat     : minimiser θ̂_k per comparison sample
    t_n           : Tₙ
    l_value       : L(φ̂ₙ)
    boot_stats    : n_boot numerical-bootstrap statistics, in iteration order
    critical_value: ⌈(1−α)·n_boot⌉-th smallest bootstrap statistic
    p_value       : #{boot ≥ statistic} / n_boot
    reject        : statistic > critical_value
    tau, alpha, mix: the step size, level and c = τ·√Tₙ used
    diagnostics   : warnings raised while running (audit, perturbation weight)
    """
    __test__: ClassVar[bool] = False

    statistic:      float
    theta_hat:      tuple[np.ndarray, ...]
    t_n:            float
    l_value:        float
    boot_stats:     np.ndarray
    critical_value: float
    p_value:        float
    reject:         bool
    tau:            float
    alpha:          float
    mix:            float
    diagnostics:    list[str] = field(default_factory=list)

    @property
    def decision(self) -> str:
        return 'reject' if self.reject else 'fail to reject'

    def to_record(self) -> dict:
        """JSON-safe dict (bootstrap draws omitted; see boot_stats)."""
        return convert_numpy_types({
            'tau':            self.tau,
            'alpha':          self.alpha,
            'statistic':      self.statistic,
            'critical_value': self.critical_value,
            'p_value':        self.p_value,
            'reject':         self.reject,
            'decision':       self.decision,
            'theta_hat':      [list(t) for t in self.theta_hat],
            't_n':            self.t_n,
            'l_value':        self.l_value,
            'mix':            self.mix,
            'n_boot':         int(self.boot_stats.shape[0]),
            'diagnostics':    list(self.diagnostics),
        })


# ---------------------------------------------------------------------------
# Small pieces
# ---------------------------------------------------------------------------

def scaling_factor(n_base: int, sizes: Sequence[int]) -> float:
    """Tₙ = n_x · ∏_k (n_k / n), n = n_x + Σ n_k; for K = 1 this is n₁n₂/n."""
    n = n_base + sum(sizes)
    t = float(n_base)
    for nk in sizes:
        t *= nk / n
    return t


def critical_value(boot_stats, alpha: float) -> float:
    """Left-continuous empirical (1−α)-quantile: the ⌈(1−α)·B⌉-th smallest draw."""
    arr = np.asarray(boot_stats, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DomainError('critical_value needs at least one bootstrap statistic')
    if not 0.0 < alpha < 1.0:
        raise DomainError(f'alpha must lie in (0, 1), got {alpha}')
    # the 1e-9 absorbs representation error in (1 - alpha) * B
    k = math.ceil((1.0 - alpha) * arr.size - 1e-9)
    k = min(max(k, 1), arr.size)
    return float(np.sort(arr, kind='stable')[k - 1])


def p_value(boot_stats, statistic: float) -> float:
    """Upper-tail bootstrap frequency #{b ≥ statistic} / B (ties count)."""
    arr = np.asarray(boot_stats, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DomainError('p_value needs at least one bootstrap statistic')
    return int(np.count_nonzero(arr >= statistic)) / arr.size


def auto_nu(base: UnivariateSample, padding: float = AUTO_NU_PADDING) -> NuMeasure:
    """
    ν = 𝒩((M̄+M̲)/2, ((M̄−M̲)/6)²), where M̲ / M̄ pad min / max by *padding* × range.

    With padding=0 and a base range of [18, 64] this is 𝒩(41, 7.67²).
    """
    lo, hi = float(base.sorted_values[0]), float(base.sorted_values[-1])
    width = hi - lo
    if not width > 0:
        raise DomainError('auto ν needs a base sample with distinct minimum and maximum')
    lo, hi = lo - padding * width, hi + padding * width
    return NuMeasure.normal(mean=(hi + lo) / 2.0, sd=(hi - lo) / 6.0)


# ---------------------------------------------------------------------------
# Shared pipeline
# ---------------------------------------------------------------------------

Resampler = Callable[[np.random.Generator], tuple[UnivariateSample, tuple[UnivariateSample, ...]]]


def _resolve_grid(base: UnivariateSample, config: TestConfig) -> QuadratureGrid:
    nu = auto_nu(base) if config.nu == 'auto' else config.nu
    logger.debug('[test] ν = %s', nu)
    return make_grid(nu, config.m_nodes)


def _audit(families, boxes, grid: QuadratureGrid, base: UnivariateSample) -> list[str]:
    lattice = np.concatenate([grid.nodes, base.sorted_values])
    messages: list[str] = []
    for fam, box in zip(families, boxes):
        messages.extend(audit_monotonicity(fam, box, x_lattice=lattice))
    return messages


def _run(
    base:        UnivariateSample,
    comparisons: tuple[UnivariateSample, ...],
    families:    tuple[TransformFamily, ...],
    boxes:       tuple[ParamBox, ...],
    resampler:   Resampler,
    config:      TestConfig,
    taus:        Sequence[float],
) -> list[TestResult]:
    taus = [float(t) for t in taus]
    if not taus or any(not (math.isfinite(t) and t > 0) for t in taus):
        raise DomainError(f'every tau must be > 0, got {taus}')

    grid = _resolve_grid(base, config)
    settings = config.minimize
    field_hat = CdfDiffField(base, comparisons, families, boxes)
    diagnostics = _audit(families, boxes, grid, base) if config.audit else []

    fit = minimize(field_hat, boxes, grid, settings)
    t_n = scaling_factor(base.n, [c.n for c in comparisons])
    statistic = t_n * fit.value
    logger.info('[test] K=%d T_n=%.6g L=%.6g statistic=%.6g', len(comparisons), t_n, fit.value, statistic)

    weights, weight_notes = [], []
    for tau in taus:
        c, note = perturbation_weight(tau, t_n)
        weights.append(c)
        weight_notes.append([note] if note else [])

    def draw(b: int) -> list[float]:
        rng = substream(config.seed, BOOTSTRAP_STREAM, b)
        boot_base, boot_comps = resampler(rng)
        return [
            second_derivative_from(fit.value, field_hat.with_bootstrap(c, boot_base, boot_comps),
                                   tau, boxes, grid, settings)
            for tau, c in zip(taus, weights)
        ]

    logger.info('[bootstrap] %d draws, tau=%s, workers=%d', config.n_boot, taus, config.workers)
    bar = dict(total=config.n_boot, desc='bootstrap', disable=not config.progress, leave=False)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(tqdm(pool.map(draw, range(config.n_boot)), **bar))
    else:
        rows = [draw(b) for b in tqdm(range(config.n_boot), **bar)]
    draws = np.array(rows, dtype=np.float64).reshape(config.n_boot, len(taus))

    results = []
    for i, tau in enumerate(taus):
        boot = draws[:, i].copy()
        cv = critical_value(boot, config.alpha)
        results.append(TestResult(
            statistic=statistic,
            theta_hat=tuple(t.copy() for t in fit.theta_hat),
            t_n=t_n,
            l_value=fit.value,
            boot_stats=boot,
            critical_value=cv,
            p_value=p_value(boot, statistic),
            reject=bool(statistic > cv),
            tau=tau,
            alpha=config.alpha,
            mix=weights[i],
            diagnostics=diagnostics + weight_notes[i],
        ))
    return results


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------

def _two_sample_inputs(x, y, config: TestConfig):
    if config.pairing == 'matched':
        if not isinstance(x, PairedSample) or y is not None:
            raise UnsupportedConfigurationError('matched pairing needs a single PairedSample argument')

        def resampler(rng):
            boot = resample_pairs(x, rng)
            return boot.x, (boot.y,)
        return x.x, (x.y,), resampler

    if isinstance(x, PairedSample):
        if y is not None:
            raise DataError('pass either a PairedSample or two samples, not both')
        x, y = x.x, x.y
    if not isinstance(x, UnivariateSample) or not isinstance(y, UnivariateSample):
        raise DataError('independent pairing needs two UnivariateSample arguments')
    data = MultiSampleSet(base=x, comparisons=(y,))

    def resampler(rng):
        boot = resample_set(data, rng)
        return boot.base, boot.comparisons
    return x, (y,), resampler


def two_sample_test_sweep(x, y, family: TransformFamily, box: ParamBox, config: TestConfig,
                          taus: Sequence[float]) -> list[TestResult]:
    """One TestResult per τ, all sharing L(φ̂ₙ) and the same bootstrap resamples."""
    base, comps, resampler = _two_sample_inputs(x, y, config)
    return _run(base, comps, (family,), (box,), resampler, config, taus)


def two_sample_test(x, y=None, *, family: TransformFamily, box: ParamBox,
                    config: TestConfig) -> TestResult:
    """
    Test H₀: F(x) = G(g(x, θ)) for some θ in *box*.

    Independent samples: ``two_sample_test(X, Y, ...)``.
    Matched pairs (config.pairing == 'matched'): ``two_sample_test(pairs, ...)``.
    """
    return two_sample_test_sweep(x, y, family, box, config, [config.tau])[0]


def _k_sample_inputs(data: MultiSampleSet, families, boxes, config: TestConfig):
    if config.pairing == 'matched':
        raise UnsupportedConfigurationError('the K-sample test supports independent samples only')
    families, boxes = tuple(families), tuple(boxes)
    if len(families) != data.k or len(boxes) != data.k:
        raise DomainError(f'need {data.k} families and boxes, got {len(families)} and {len(boxes)}')

    def resampler(rng):
        boot = resample_set(data, rng)
        return boot.base, boot.comparisons
    return families, boxes, resampler


def k_sample_test_sweep(data: MultiSampleSet, families: Sequence[TransformFamily],
                        boxes: Sequence[ParamBox], config: TestConfig,
                        taus: Sequence[float]) -> list[TestResult]:
    families, boxes, resampler = _k_sample_inputs(data, families, boxes, config)
    return _run(data.base, data.comparisons, families, boxes, resampler, config, taus)


def k_sample_test(data: MultiSampleSet, families: Sequence[TransformFamily],
                  boxes: Sequence[ParamBox], config: TestConfig) -> TestResult:
    """Test H₀: F(x) = G_k(g_k(x, θ_k)) for every k, with Tₙ = n_x·∏(n_k/n)."""
    return k_sample_test_sweep(data, families, boxes, config, [config.tau])[0]
