"""
Parametric transformation families g(x, θ) and the compact boxes Θ they range over.

A family's ``func(x, theta)`` must broadcast: *theta* has shape (..., d) and
the result has the broadcast shape of ``x`` against ``theta[..., :1]``.  That
lets the criterion evaluate a whole θ-lattice against all quadrature nodes in
one call:

    x       (m,)        quadrature nodes
    thetas  (P, d)      lattice
    g       (P, m)      family.eval_lattice(x, thetas)

Built-ins (registered in FAMILY_BUILDERS):

    location         g(x, θ) = x − θ₁                  d = 1
    scale            g(x, θ) = x / θ₂                  d = 1, θ₂ > 0
    location_scale   g(x, θ) = (x − θ₁) / θ₂           d = 2, θ₂ > 0
    affine           g(x, θ) = (x + s·θ₁) · θ₂^p       d = 2, θ₂ > 0, s, p ∈ {−1, +1}

The equality-of-distributions hypothesis is the location family on the
degenerate box [0, 0].
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from cdftransform.errors import ConfigError, DomainError, MonotonicityWarning

logger = logging.getLogger(__name__)

# Upper bound on the number of lattice points param_grid will build.
GRID_CAP = int(os.environ.get('CDFTRANSFORM_GRID_CAP', 1_000_000))


# ---------------------------------------------------------------------------
# ParamBox
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamBox:
    """Θ = [lower₁, upper₁] × … × [lower_d, upper_d]; lower == upper fixes a dimension."""
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if not lo or len(lo) != len(hi):
            raise ConfigError(f'box bounds must be non-empty and equally long, got {lo} and {hi}')
        if not all(math.isfinite(v) for v in lo + hi):
            raise ConfigError(f'box bounds must be finite, got {lo} and {hi}')
        bad = [j for j in range(len(lo)) if lo[j] > hi[j]]
        if bad:
            raise ConfigError(f'box has lower > upper in dimension(s) {bad}: {lo} vs {hi}')
        object.__setattr__(self, 'lower', lo)
        object.__setattr__(self, 'upper', hi)

    @property
    def dims(self) -> int:
        return len(self.lower)

    def contains(self, theta) -> bool:
        th = np.asarray(theta, dtype=np.float64)
        return bool(np.all(th >= np.asarray(self.lower)) and np.all(th <= np.asarray(self.upper)))


def _resolution_vector(box: ParamBox, resolution) -> tuple[int, ...]:
    if np.isscalar(resolution):
        res = (int(resolution),) * box.dims
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != box.dims:
        raise ConfigError(f'resolution {res} does not match box dimension {box.dims}')
    if any(r < 1 for r in res):
        raise ConfigError(f'resolution entries must be >= 1, got {res}')
    return res


def grid_axis(lower: float, upper: float, r: int) -> np.ndarray:
    """Equally spaced points on [lower, upper] with exact endpoints (midpoint if r == 1)."""
    if r == 1:
        return np.array([(lower + upper) / 2.0])
    axis = lower + (upper - lower) * (np.arange(r) / (r - 1))
    axis[0] = lower
    axis[-1] = upper
    return axis


def param_grid(box: ParamBox, resolution, cap: int | None = None) -> np.ndarray:
    """
    Cartesian lattice over *box*, lexicographically ordered (first dimension slowest).

    Returns an array of shape (∏ resolution, d).
    """
    res = _resolution_vector(box, resolution)
    cap = GRID_CAP if cap is None else int(cap)
    total = math.prod(res)
    if total > cap:
        raise DomainError(f'θ-lattice of {total} points exceeds the cap of {cap}')
    axes = [grid_axis(lo, hi, r) for lo, hi, r in zip(box.lower, box.upper, res)]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.stack(mesh, axis=-1).reshape(total, box.dims)


def lattice_spacing(box: ParamBox, resolution) -> np.ndarray:
    """Per-dimension step of param_grid(box, resolution); half-width when r == 1."""
    res = _resolution_vector(box, resolution)
    width = np.asarray(box.upper) - np.asarray(box.lower)
    return np.array([w / (r - 1) if r > 1 else w / 2.0 for w, r in zip(width, res)])


# ---------------------------------------------------------------------------
# TransformFamily
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransformFamily:
    """
    A named family x ↦ g(x, θ), θ ∈ ℝ^d.

    name               : identifier used in reports
    dims               : d_θ
    func               : broadcasting callable (x, theta[..., d]) -> g
    positive_dims      : θ coordinates that must be > 0 (divisors, bases)
    strictly_increasing: True for the built-ins; user families may only be nondecreasing
    """
    name:                str
    dims:                int
    func:                Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    positive_dims:       tuple[int, ...] = ()
    strictly_increasing: bool = False

    def check_theta(self, theta: np.ndarray) -> None:
        if theta.shape[-1] != self.dims:
            raise DomainError(f'{self.name}: θ has {theta.shape[-1]} coordinates, expected {self.dims}')
        for j in self.positive_dims:
            if np.any(theta[..., j] <= 0):
                raise DomainError(f'{self.name}: θ[{j}] must be > 0')

    def check_box(self, box: ParamBox) -> None:
        if box.dims != self.dims:
            raise ConfigError(f'{self.name}: box has {box.dims} dimension(s), family needs {self.dims}')
        for j in self.positive_dims:
            if box.lower[j] <= 0:
                raise ConfigError(f'{self.name}: box lower bound for θ[{j}] must be > 0, got {box.lower[j]}')

    def eval(self, x, theta):
        """g(x, θ) for a single θ; returns a float for scalar x."""
        th = np.asarray(theta, dtype=np.float64).reshape(-1)
        self.check_theta(th)
        out = np.asarray(self.func(np.asarray(x, dtype=np.float64), th))
        if np.ndim(x) == 0:
            return float(out.reshape(-1)[0])
        return out

    def eval_lattice(self, x: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        """g at every (θ_p, x_j): shape (P, m)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        self.check_theta(thetas)
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(self.func(x[None, :], thetas), (thetas.shape[0], x.shape[0]))


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------

def _location(x, th):
    return x - th[..., 0:1]


def _scale(x, th):
    return x / th[..., 0:1]


def _location_scale(x, th):
    return (x - th[..., 0:1]) / th[..., 1:2]


def affine_family(shift_sign: int = -1, scale_power: int = -1) -> TransformFamily:
    """g(x, θ) = (x + s·θ₁)·θ₂^p; (s, p) = (−1, −1) is the location-scale family."""
    if shift_sign not in (-1, 1) or scale_power not in (-1, 1):
        raise ConfigError(f'affine signs must be ±1, got shift_sign={shift_sign} scale_power={scale_power}')
    if scale_power == 1:
        def func(x, th):
            return (x + shift_sign * th[..., 0:1]) * th[..., 1:2]
    else:
        def func(x, th):
            return (x + shift_sign * th[..., 0:1]) / th[..., 1:2]
    return TransformFamily(
        name=f'affine(s={shift_sign:+d},p={scale_power:+d})',
        dims=2, func=func, positive_dims=(1,), strictly_increasing=True,
    )


FAMILY_BUILDERS: dict[str, Callable[..., TransformFamily]] = {
    'location':       lambda: TransformFamily('location', 1, _location, (), True),
    'scale':          lambda: TransformFamily('scale', 1, _scale, (0,), True),
    'location_scale': lambda: TransformFamily('location_scale', 2, _location_scale, (1,), True),
    'affine':         affine_family,
}


def builtin_family(kind: str, **options) -> TransformFamily:
    """Look up a built-in family; ``location-scale`` and ``location_scale`` are the same."""
    key = str(kind).strip().lower().replace('-', '_')
    if key not in FAMILY_BUILDERS:
        raise ConfigError(f'unknown family {kind!r}; choose from {sorted(FAMILY_BUILDERS)}')
    if options and key != 'affine':
        raise ConfigError(f'family {kind!r} takes no options, got {sorted(options)}')
    return FAMILY_BUILDERS[key](**options)


# ---------------------------------------------------------------------------
# Monotonicity audit
# ---------------------------------------------------------------------------

DEFAULT_AUDIT_LATTICE = np.linspace(-50.0, 50.0, 401)


def audit_monotonicity(
    family:     TransformFamily,
    box:        ParamBox,
    x_lattice:  Sequence[float] | None = None,
    resolution: int = 5,
) -> list[str]:
    """
    Check x ↦ g(x, θ) is nondecreasing on *x_lattice* for θ on a coarse lattice of *box*.

    A family declared ``strictly_increasing`` must also never be flat.
    Returns one message per violating θ and emits a MonotonicityWarning when
    the list is non-empty.  Violations never raise.
    """
    xs = np.unique(np.asarray(DEFAULT_AUDIT_LATTICE if x_lattice is None else x_lattice, dtype=np.float64))
    thetas = param_grid(box, resolution)
    g = family.eval_lattice(xs, thetas)
    steps = np.diff(g, axis=1)
    bad = steps <= 0 if family.strictly_increasing else steps < 0
    messages = []
    for p in np.flatnonzero(np.any(bad, axis=1)):
        j = int(np.flatnonzero(bad[p])[0])
        verb = 'decreases' if steps[p, j] < 0 else 'is flat'
        messages.append(
            f'{family.name} {verb} at θ={tuple(thetas[p].tolist())} '
            f'between x={xs[j]:.6g} and x={xs[j + 1]:.6g}'
        )
    if messages:
        logger.warning('[audit] %s: %d θ value(s) fail the monotonicity audit', family.name, len(messages))
        warnings.warn(messages[0], MonotonicityWarning, stacklevel=2)
    return messages
