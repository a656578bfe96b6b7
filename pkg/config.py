"""
Run configuration for the CLI commands.

Every command reads one flat document, merged as

    {**DEFAULT_<CMD>_CONFIG, **yaml_file, **flag_overrides}

and validated by a pydantic model (extra keys are rejected).  Any key may be
given in the YAML file passed with ``--config=path.yaml`` or as a flag
(``--n_boot=5000``); flags win.

CSV inputs: header row, decimal-point numerics, one observation per row.
"""
from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Any, ClassVar, Literal

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from cdftransform.criterion import DEFAULT_M_NODES, DEFAULT_RESOLUTION, MinimizeSettings, NuMeasure
from cdftransform.errors import ConfigError, DataError
from cdftransform.inference import TestConfig
from cdftransform.samples import PairedSample, UnivariateSample
from cdftransform.simulation import DgpSpec, STUDY_BOX, StudyPlan
from cdftransform.transforms import ParamBox, TransformFamily, builtin_family

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------

_COMMON_TEST_DEFAULTS = {
    'pairing':       'independent',
    'nu':            'auto',
    'alpha':         0.05,
    'taus':          [0.05, 0.06, 0.07, 0.08],
    'n_boot':        1000,
    'm_nodes':       DEFAULT_M_NODES,
    'resolution':    DEFAULT_RESOLUTION,
    'refine':        False,
    'refine_shrink': 0.5,
    'refine_rounds': 8,
    'seed':          0,
    'audit':         True,
    'progress':      False,
    'workers':       None,    # None → CDFTRANSFORM_WORKERS
    'out':           None,    # None → stdout
    'format':        'text',
    'columns':       ['test_result'],
}

DEFAULT_TEST_CONFIG = {
    **_COMMON_TEST_DEFAULTS,
    'x':           None,      # CSV with the base sample
    'y':           None,      # CSV with the comparison sample
    'paired':      None,      # one CSV holding both columns (matched pairing)
    'x_column':    None,      # None → first column (or 'x' in a paired file)
    'y_column':    None,      # None → first column (or 'y' in a paired file)
    'family':      'location_scale',
    'shift_sign':  -1,
    'scale_power': -1,
    'box_lower':   [-2.0, 0.5],
    'box_upper':   [0.0, 2.0],
}

DEFAULT_KTEST_CONFIG = {
    **_COMMON_TEST_DEFAULTS,
    'base':        None,
    'base_column': None,
    'comparisons': [],        # list of {path, column, family, shift_sign, scale_power, box_lower, box_upper}
}

DEFAULT_STUDY_CONFIG = {
    'family':        'continuous',
    'pairing':       'independent',
    'dgp_ids':       [0, 1, 2, 3],
    'sizes':         [[500, 500]],
    'taus':          [0.06, 0.07, 0.08, 0.09, 0.10],
    'n_mc':          1000,
    'alpha':         0.05,
    'seed':          0,
    'm_nodes':       256,
    'resolution':    DEFAULT_RESOLUTION,
    'refine':        False,
    'nu':            None,    # None → design default
    'box_lower':     list(STUDY_BOX.lower),
    'box_upper':     list(STUDY_BOX.upper),
    'workers':       None,
    'progress':      False,
    'out':           None,
    'format':        'text',
}

DEFAULT_GEN_CONFIG = {
    'family':  'continuous',
    'dgp_id':  0,
    'pairing': 'independent',
    'n1':      500,
    'n2':      500,
    'seed':    0,
    'out':     'generated',   # file prefix
    'format':  'csv',
}

# Keys that never change results and stay out of the echoed configuration.
NON_RESULT_KEYS = frozenset({'workers', 'progress', 'out'})


# ---------------------------------------------------------------------------
# Run-config models
# ---------------------------------------------------------------------------

NuSetting = Literal['auto'] | dict[str, Any]


def _nu_from_setting(nu) -> NuMeasure | Literal['auto']:
    if nu == 'auto':
        return 'auto'
    if isinstance(nu, dict):
        if 'nodes' in nu:
            return NuMeasure.explicit(nu['nodes'])
        return NuMeasure.normal(mean=nu.get('mean', 0.0), sd=nu.get('sd', 1.0))
    raise ValueError(f"nu must be 'auto', {{mean, sd}} or {{nodes}}, got {nu!r}")


def _listify_taus(v):
    # --taus=0.08 arrives as a bare number
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [v]
    return v


def _check_taus(v):
    if not v or any(not (math.isfinite(t) and t > 0) for t in v):
        raise ValueError(f'taus must be a non-empty list of positive numbers, got {v}')
    return v


class _RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    def echo(self) -> dict:
        """The result-relevant configuration, as written into report headers."""
        return {k: v for k, v in self.model_dump(mode='json').items() if k not in NON_RESULT_KEYS}


class _TestRunBase(_RunConfig):
    pairing:       Literal['independent', 'matched']
    nu:            NuSetting
    alpha:         float
    taus:          list[float]
    n_boot:        int
    m_nodes:       int
    resolution:    int | list[int]
    refine:        bool
    refine_shrink: float
    refine_rounds: int
    seed:          int
    audit:         bool
    progress:      bool
    workers:       int | None
    out:           str | None
    format:        Literal['text', 'csv', 'jsonl']
    columns:       list[str]

    @field_validator('taus', mode='before')
    @classmethod
    def _scalar_taus(cls, v):
        return _listify_taus(v)

    @field_validator('taus')
    @classmethod
    def _positive_taus(cls, v):
        return _check_taus(v)

    @field_validator('nu')
    @classmethod
    def _valid_nu(cls, v):
        try:
            _nu_from_setting(v)
        except ValidationError as exc:
            raise ValueError(_format_validation_error(exc)) from None
        return v

    def test_config(self) -> TestConfig:
        with validated():
            return self._test_config()

    def _test_config(self) -> TestConfig:
        res = self.resolution if isinstance(self.resolution, int) else tuple(self.resolution)
        options = dict(
            tau=self.taus[0],
            alpha=self.alpha,
            n_boot=self.n_boot,
            m_nodes=self.m_nodes,
            seed=self.seed,
            pairing=self.pairing,
            minimize=MinimizeSettings(resolution=res, refine=self.refine,
                                      refine_shrink=self.refine_shrink,
                                      refine_rounds=self.refine_rounds),
            nu=_nu_from_setting(self.nu),
            progress=self.progress,
            audit=self.audit,
        )
        if self.workers is not None:
            options['workers'] = self.workers
        return TestConfig(**options)


class FamilySetting(BaseModel):
    """Family and box for one comparison sample."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    family:      str = 'location_scale'
    shift_sign:  int = -1
    scale_power: int = -1
    box_lower:   list[float] = [-2.0, 0.5]
    box_upper:   list[float] = [0.0, 2.0]

    def build(self) -> tuple[TransformFamily, ParamBox]:
        key = self.family.strip().lower().replace('-', '_')
        options = {'shift_sign': self.shift_sign, 'scale_power': self.scale_power} if key == 'affine' else {}
        family = builtin_family(key, **options)
        box = ParamBox(tuple(self.box_lower), tuple(self.box_upper))
        family.check_box(box)
        return family, box


class TestRunConfig(_TestRunBase):
    __test__: ClassVar[bool] = False

    x:           str | None
    y:           str | None
    paired:      str | None
    x_column:    str | None
    y_column:    str | None
    family:      str
    shift_sign:  int
    scale_power: int
    box_lower:   list[float]
    box_upper:   list[float]

    @model_validator(mode='after')
    def _inputs(self):
        if self.pairing == 'matched':
            if not self.paired:
                raise ValueError("matched pairing needs 'paired' (one CSV with both columns)")
        elif not self.paired and not (self.x and self.y):
            raise ValueError("independent pairing needs 'x' and 'y' CSV paths (or 'paired')")
        return self

    def family_setting(self) -> FamilySetting:
        return FamilySetting(family=self.family, shift_sign=self.shift_sign, scale_power=self.scale_power,
                             box_lower=self.box_lower, box_upper=self.box_upper)


class ComparisonSetting(FamilySetting):
    path:   str
    column: str | None = None


class KTestRunConfig(_TestRunBase):
    base:        str
    base_column: str | None
    comparisons: list[ComparisonSetting]

    @model_validator(mode='after')
    def _inputs(self):
        if not self.comparisons:
            raise ValueError('ktest needs at least one entry under comparisons')
        return self


class SimulateRunConfig(_RunConfig):
    family:     Literal['continuous', 'discrete']
    pairing:    Literal['independent', 'matched']
    dgp_ids:    list[int]
    sizes:      list[tuple[int, int]]
    taus:       list[float]
    n_mc:       int
    alpha:      float
    seed:       int
    m_nodes:    int
    resolution: int | list[int]
    refine:     bool
    nu:         dict[str, Any] | None
    box_lower:  list[float]
    box_upper:  list[float]
    workers:    int | None
    progress:   bool
    out:        str | None
    format:     Literal['text', 'csv']

    @field_validator('taus', mode='before')
    @classmethod
    def _scalar_taus(cls, v):
        return _listify_taus(v)

    @field_validator('taus')
    @classmethod
    def _positive_taus(cls, v):
        return _check_taus(v)

    def plan(self) -> StudyPlan:
        with validated('study plan'):
            return self._plan()

    def _plan(self) -> StudyPlan:
        res = self.resolution if isinstance(self.resolution, int) else tuple(self.resolution)
        options = dict(
            taus=tuple(self.taus),
            n_mc=self.n_mc,
            alpha=self.alpha,
            seed=self.seed,
            m_nodes=self.m_nodes,
            minimize=MinimizeSettings(resolution=res, refine=self.refine),
            nu=None if self.nu is None else _nu_from_setting(self.nu),
            box_lower=tuple(self.box_lower),
            box_upper=tuple(self.box_upper),
            progress=self.progress,
        )
        if self.workers is not None:
            options['workers'] = self.workers
        return StudyPlan.grid(self.family, self.pairing, self.dgp_ids, self.sizes, **options)


class GenRunConfig(_RunConfig):
    family:  Literal['continuous', 'discrete']
    dgp_id:  int
    pairing: Literal['independent', 'matched']
    n1:      int
    n2:      int
    seed:    int
    out:     str
    format:  Literal['csv']

    def dgp(self) -> DgpSpec:
        with validated('design'):
            return DgpSpec(family=self.family, dgp_id=self.dgp_id, pairing=self.pairing, n1=self.n1, n2=self.n2)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_yaml(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'config file not found: {path}')
    try:
        doc = yaml.safe_load(path.read_text(encoding='utf-8'))
    except yaml.YAMLError as exc:
        raise ConfigError(f'{path}: invalid YAML: {exc}') from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f'{path}: top level must be a mapping, got {type(doc).__name__}')
    return doc


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = '.'.join(str(p) for p in err['loc']) or '<config>'
        parts.append(f'{loc}: {err["msg"]}')
    return '; '.join(parts)


def load_run_config(model: type[_RunConfig], defaults: dict, config_path: str | None = None,
                    overrides: dict | None = None) -> _RunConfig:
    """Merge defaults, the YAML file and flag overrides, then validate with *model*."""
    file_config = load_yaml(config_path) if config_path else {}
    merged = {**defaults, **file_config, **(overrides or {})}
    logger.debug('[config] merged keys: %s', sorted(merged))
    with validated():
        return model(**merged)


@contextmanager
def validated(what: str = 'configuration'):
    """Re-raise pydantic failures inside the block as ConfigError."""
    try:
        yield
    except ValidationError as exc:
        raise ConfigError(f'invalid {what}: {_format_validation_error(exc)}') from exc


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _read_csv(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f'data file not found: {path}')
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f'{path}: cannot parse CSV: {exc}') from exc
    if frame.shape[1] == 0:
        raise DataError(f'{path}: no columns')
    return frame


def _numeric_column(frame: pd.DataFrame, path, column: str | None) -> tuple[str, pd.Series]:
    if column is None:
        column = str(frame.columns[0])
    if column not in frame.columns:
        raise DataError(f'{path}: column {column!r} not found (have {list(frame.columns)})')
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors='coerce')
    bad = ~np.isfinite(values.to_numpy(dtype=np.float64))
    if bad.any():
        i = int(bad.nonzero()[0][0])
        kind = 'non-numeric' if pd.isna(values.iloc[i]) else 'non-finite'
        # header is line 1
        raise DataError(f'{path}: row {i + 2}, column {column!r}: {kind} value {raw.iloc[i]!r}')
    return column, values.astype('float64')


def read_sample(path: str | Path, column: str | None = None) -> UnivariateSample:
    """One numeric column of a CSV as a sample; *column* defaults to the first column."""
    frame = _read_csv(path)
    column, values = _numeric_column(frame, path, column)
    return UnivariateSample.from_values(values.to_numpy(), name=f'{path}:{column}')


def read_paired(path: str | Path, x_column: str | None = None, y_column: str | None = None) -> PairedSample:
    """Two columns of one CSV as matched pairs (defaults: 'x' and 'y')."""
    frame = _read_csv(path)
    _, xs = _numeric_column(frame, path, x_column or 'x')
    _, ys = _numeric_column(frame, path, y_column or 'y')
    return PairedSample.from_columns(xs.to_numpy(), ys.to_numpy())
