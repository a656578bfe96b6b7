"""
Minimum-distance criterion L(φ) = inf_θ ∫ Σ_k φ_k(x, θ_k)² dν(x).

The integral against ν is replaced by an equal-weight rule on the
equal-probability quantile nodes of ν (QuadratureGrid); the infimum is a
dense lattice search over each box with optional pattern-search refinement.
The K-sample criterion is separable in θ_k, so minimize() runs K independent
searches and sums their minima.

Reductions are done node by node in node order (never pairwise), which keeps
every value bitwise reproducible by a straight-line loop.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.special import ndtri

from cdftransform.errors import DomainError, PerturbationWarning
from cdftransform.samples import UnivariateSample
from cdftransform.transforms import ParamBox, TransformFamily, lattice_spacing, param_grid

logger = logging.getLogger(__name__)

DEFAULT_M_NODES = 512
DEFAULT_RESOLUTION = 41

# Lattice points evaluated per block; bounds the (P, m) temporaries.
_LATTICE_BLOCK = 4096


# ---------------------------------------------------------------------------
# ν and its quadrature grid
# ---------------------------------------------------------------------------

class NuMeasure(BaseModel):
    """The probability measure ν: normal(mean, sd) or an explicit node list."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    kind:  Literal['normal', 'explicit'] = 'normal'
    mean:  float = 0.0
    sd:    float = 1.0
    nodes: tuple[float, ...] | None = None

    @field_validator('nodes')
    @classmethod
    def _sorted_nodes(cls, v):
        if v is None:
            return v
        return tuple(sorted(float(x) for x in v))

    @model_validator(mode='after')
    def _check(self):
        if self.kind == 'normal':
            if not (math.isfinite(self.mean) and math.isfinite(self.sd)) or self.sd <= 0:
                raise ValueError(f'normal ν needs a finite mean and sd > 0, got mean={self.mean} sd={self.sd}')
        else:
            if not self.nodes:
                raise ValueError('explicit ν needs a non-empty node list')
            if not all(math.isfinite(x) for x in self.nodes):
                raise ValueError('explicit ν nodes must be finite')
            if any(a == b for a, b in zip(self.nodes, self.nodes[1:])):
                raise ValueError('explicit ν nodes must be distinct')
        return self

    @classmethod
    def normal(cls, mean: float, sd: float) -> 'NuMeasure':
        return cls(kind='normal', mean=mean, sd=sd)

    @classmethod
    def explicit(cls, nodes: Sequence[float]) -> 'NuMeasure':
        return cls(kind='explicit', nodes=tuple(nodes))


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes x_1 < … < x_m, each carrying weight 1/m."""
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=np.float64).reshape(-1)
        if nodes.size == 0:
            raise DomainError('quadrature grid needs at least one node')
        if np.any(np.diff(nodes) <= 0):
            raise DomainError('quadrature nodes must be strictly increasing')
        nodes.setflags(write=False)
        object.__setattr__(self, 'nodes', nodes)

    @property
    def m(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def weight(self) -> float:
        return 1.0 / self.m


def normal_quantile(p):
    """Φ⁻¹(p) for p in (0, 1); scalar in, float out."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError(f'normal_quantile needs 0 < p < 1, got {p!r}')
    out = ndtri(arr)
    return float(out) if out.ndim == 0 else out


def make_grid(nu: NuMeasure, m: int = DEFAULT_M_NODES) -> QuadratureGrid:
    """Equal-probability quantile nodes Q_ν((j − 0.5)/m); explicit nodes pass through."""
    if nu.kind == 'explicit':
        return QuadratureGrid(np.asarray(nu.nodes))
    m = int(m)
    if m < 1:
        raise DomainError(f'number of quadrature nodes must be >= 1, got {m}')
    probs = (np.arange(1, m + 1) - 0.5) / m
    return QuadratureGrid(nu.mean + nu.sd * normal_quantile(probs))


# ---------------------------------------------------------------------------
# Search settings
# ---------------------------------------------------------------------------

class MinimizeSettings(BaseModel):
    """
    How the infimum over Θ is searched.

    resolution   : lattice points per dimension (int for all, or one per dimension)
    refine       : run pattern-search refinement from the best lattice point
    refine_shrink: step multiplier after an unsuccessful refinement round
    refine_rounds: number of refinement rounds
    tie_break    : equal minima resolve to the lexicographically smallest θ
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    resolution:    int | tuple[int, ...] = DEFAULT_RESOLUTION
    refine:        bool = False
    refine_shrink: float = 0.5
    refine_rounds: int = 8
    tie_break:     Literal['lexicographic'] = 'lexicographic'

    @field_validator('resolution')
    @classmethod
    def _positive_resolution(cls, v):
        vals = (v,) if isinstance(v, int) else v
        if not vals or any(r < 1 for r in vals):
            raise ValueError(f'resolution entries must be >= 1, got {v}')
        return v

    @field_validator('refine_shrink')
    @classmethod
    def _shrink_in_unit_interval(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f'refine_shrink must lie in (0, 1), got {v}')
        return v

    @field_validator('refine_rounds')
    @classmethod
    def _nonnegative_rounds(cls, v):
        if v < 0:
            raise ValueError(f'refine_rounds must be >= 0, got {v}')
        return v


# ---------------------------------------------------------------------------
# CdfDiffField
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CdfDiffField:
    """
    φ̃_k(x, θ_k) = φ̂_k + c·(φ̂*_k − φ̂_k), with φ̂_k = F̂(x) − Ĝ_k(g_k(x, θ_k)).

    This is the same field as (1 − c)·φ̂_k + c·φ̂*_k written so that a bootstrap
    direction of zero (φ̂* = φ̂) reproduces φ̂ exactly.  With c = 0 or no
    bootstrap samples the field is φ̂ itself.
    """
    base:        UnivariateSample
    comparisons: tuple[UnivariateSample, ...]
    families:    tuple[TransformFamily, ...]
    boxes:       tuple[ParamBox, ...]
    mix:         float = 0.0
    boot_base:   UnivariateSample | None = field(default=None, repr=False)
    boot_comparisons: tuple[UnivariateSample, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ('comparisons', 'families', 'boxes'):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        k = len(self.comparisons)
        if k == 0 or len(self.families) != k or len(self.boxes) != k:
            raise DomainError(
                f'field needs one family and one box per comparison sample '
                f'(got {k} samples, {len(self.families)} families, {len(self.boxes)} boxes)'
            )
        for fam, box in zip(self.families, self.boxes):
            fam.check_box(box)
        if not (math.isfinite(self.mix) and self.mix >= 0):
            raise DomainError(f'mix weight c must be finite and >= 0, got {self.mix}')
        if (self.boot_base is None) != (self.boot_comparisons is None):
            raise DomainError('bootstrap base and comparison samples must be given together')
        if self.boot_comparisons is not None:
            object.__setattr__(self, 'boot_comparisons', tuple(self.boot_comparisons))
            if len(self.boot_comparisons) != k:
                raise DomainError('one bootstrap sample per comparison is required')

    @property
    def k(self) -> int:
        return len(self.comparisons)

    @property
    def perturbed(self) -> bool:
        return self.boot_base is not None and self.mix != 0.0

    def with_bootstrap(self, mix: float, boot_base: UnivariateSample,
                       boot_comparisons: Sequence[UnivariateSample]) -> 'CdfDiffField':
        return CdfDiffField(self.base, self.comparisons, self.families, self.boxes,
                            mix=float(mix), boot_base=boot_base,
                            boot_comparisons=tuple(boot_comparisons))

    def values(self, k: int, grid: QuadratureGrid, thetas: np.ndarray) -> np.ndarray:
        """φ̃_k at every (θ_p, x_j); shape (P, m)."""
        nodes = grid.nodes
        g = self.families[k].eval_lattice(nodes, thetas)
        phi = self.base.ecdf(nodes)[None, :] - self.comparisons[k].ecdf(g)
        if self.perturbed:
            phi_star = self.boot_base.ecdf(nodes)[None, :] - self.boot_comparisons[k].ecdf(g)
            phi = phi + self.mix * (phi_star - phi)
        return phi

    def component_objective(self, k: int, grid: QuadratureGrid, thetas: np.ndarray) -> np.ndarray:
        """S_k(θ) = (1/m) Σ_j φ̃_k(x_j, θ)² for every lattice row; shape (P,)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        out = np.empty(thetas.shape[0])
        for start in range(0, thetas.shape[0], _LATTICE_BLOCK):
            block = thetas[start:start + _LATTICE_BLOCK]
            phi = self.values(k, grid, block)
            acc = np.zeros(block.shape[0])
            for j in range(grid.m):
                col = phi[:, j]
                acc += col * col
            out[start:start + block.shape[0]] = acc / grid.m
        return out


def _theta_list(field: CdfDiffField, theta) -> list[np.ndarray]:
    # K = 1 accepts a bare vector; otherwise one vector per comparison.
    if field.k == 1 and all(np.ndim(t) == 0 for t in theta):
        return [np.asarray(theta, dtype=np.float64).reshape(-1)]
    return [np.asarray(t, dtype=np.float64).reshape(-1) for t in theta]


def objective(field: CdfDiffField, theta, grid: QuadratureGrid) -> float:
    """
    S(θ) = (1/m) Σ_j Σ_k φ̃_k(x_j, θ_k)².

    *theta* is one vector for K = 1, or a sequence of K vectors.  Each θ_k must
    lie in its box.
    """
    thetas = _theta_list(field, theta)
    if len(thetas) != field.k:
        raise DomainError(f'expected {field.k} θ vector(s), got {len(thetas)}')
    total = 0.0
    for k, th in enumerate(thetas):
        box = field.boxes[k]
        if th.shape[0] != box.dims or not box.contains(th):
            raise DomainError(f'θ_{k + 1}={tuple(th.tolist())} lies outside the box {box.lower}–{box.upper}')
        total += float(field.component_objective(k, grid, th[None, :])[0])
    return total


# ---------------------------------------------------------------------------
# Minimisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimizeResult:
    """θ̂_k per comparison, their component minima, and L = Σ_k minima."""
    theta_hat:  tuple[np.ndarray, ...]
    components: tuple[float, ...]
    value:      float


def _resolution_for(box: ParamBox, settings: MinimizeSettings) -> tuple[int, ...]:
    res = settings.resolution
    res = (res,) * box.dims if isinstance(res, int) else tuple(res)
    if len(res) != box.dims:
        raise DomainError(f'resolution {res} does not match box dimension {box.dims}')
    # a degenerate dimension is searched at its single value
    return tuple(1 if lo == hi else r for lo, hi, r in zip(box.lower, box.upper, res))


def _first_lexicographic_min(values: np.ndarray, thetas: np.ndarray) -> int:
    best = values.min()
    ties = np.flatnonzero(values == best)
    if ties.size == 1:
        return int(ties[0])
    # np.lexsort sorts by the last key first, so feed dimensions in reverse.
    order = np.lexsort(thetas[ties].T[::-1])
    return int(ties[order[0]])


TIE_BREAKERS = {
    'lexicographic': _first_lexicographic_min,
}


def _refine(field: CdfDiffField, k: int, grid: QuadratureGrid, box: ParamBox,
            settings: MinimizeSettings, theta: np.ndarray, value: float) -> tuple[np.ndarray, float]:
    """Coordinate pattern search inside *box*; only strict improvements are accepted."""
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    step = lattice_spacing(box, _resolution_for(box, settings)) * settings.refine_shrink
    for _ in range(settings.refine_rounds):
        moves = []
        for j in range(box.dims):
            if step[j] <= 0:
                continue
            for sign in (-1.0, 1.0):
                cand = theta.copy()
                cand[j] = min(max(cand[j] + sign * step[j], lo[j]), hi[j])
                moves.append(cand)
        if not moves:
            break
        cands = np.unique(np.array(moves), axis=0)
        vals = field.component_objective(k, grid, cands)
        i = TIE_BREAKERS[settings.tie_break](vals, cands)
        if vals[i] < value:
            theta, value = cands[i], float(vals[i])
        else:
            step = step * settings.refine_shrink
    return theta, value


def minimize_component(field: CdfDiffField, k: int, box: ParamBox, grid: QuadratureGrid,
                       settings: MinimizeSettings) -> tuple[np.ndarray, float]:
    lattice = param_grid(box, _resolution_for(box, settings))
    vals = field.component_objective(k, grid, lattice)
    i = TIE_BREAKERS[settings.tie_break](vals, lattice)
    theta, value = lattice[i].copy(), float(vals[i])
    if settings.refine and settings.refine_rounds > 0:
        theta, value = _refine(field, k, grid, box, settings, theta, value)
    return theta, value


def minimize(field: CdfDiffField, boxes: Sequence[ParamBox] | None, grid: QuadratureGrid,
             settings: MinimizeSettings | None = None) -> MinimizeResult:
    """
    L = Σ_k min_{θ_k ∈ box_k} S_k(θ_k), searched per comparison (the criterion is separable).

    *boxes* defaults to the boxes the field was built with.
    """
    settings = settings or MinimizeSettings()
    boxes = field.boxes if boxes is None else tuple(boxes)
    if len(boxes) != field.k:
        raise DomainError(f'expected {field.k} box(es), got {len(boxes)}')
    thetas, comps = [], []
    total = 0.0
    for k, box in enumerate(boxes):
        field.families[k].check_box(box)
        theta, value = minimize_component(field, k, box, grid, settings)
        thetas.append(theta)
        comps.append(value)
        total += value
    return MinimizeResult(theta_hat=tuple(thetas), components=tuple(comps), value=total)


# ---------------------------------------------------------------------------
# Numerical second-order directional derivative
# ---------------------------------------------------------------------------

def perturbation_weight(tau: float, t_n: float) -> tuple[float, str | None]:
    """c = τ·√T_n, plus a diagnostic message when c >= 1."""
    c = float(tau) * math.sqrt(t_n)
    if c >= 1.0:
        msg = (f'perturbation weight c = tau*sqrt(T_n) = {c:.4g} >= 1; '
               f'the bootstrap direction dominates the estimated field')
        logger.warning('[criterion] %s', msg)
        warnings.warn(msg, PerturbationWarning, stacklevel=2)
        return c, msg
    return c, None


def second_derivative_from(base_value: float, field_pert: CdfDiffField, tau: float,
                           boxes, grid: QuadratureGrid, settings: MinimizeSettings) -> float:
    """[L(φ̂ + τh) − L(φ̂)] / τ² with L(φ̂) already known."""
    pert = minimize(field_pert, boxes, grid, settings).value
    return (pert - base_value) / (tau * tau)


def numerical_second_derivative(field_base: CdfDiffField, field_pert: CdfDiffField, tau: float,
                                boxes, grid: QuadratureGrid,
                                settings: MinimizeSettings | None = None) -> float:
    """L̂''(h) = [L(φ̂ + τh) − L(φ̂)] / τ²; negative values are legitimate."""
    if not tau > 0:
        raise DomainError(f'tau must be > 0, got {tau}')
    settings = settings or MinimizeSettings()
    base = minimize(field_base, boxes, grid, settings).value
    return second_derivative_from(base, field_pert, tau, boxes, grid, settings)
