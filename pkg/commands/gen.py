"""
gen: write one simulated dataset to CSV.

    python cli.py gen --family=discrete --dgp_id=2 --n1=200 --n2=300 --out=data/sim

Independent designs write <out>_x.csv and <out>_y.csv (column 'value');
matched designs write <out>.csv with columns x, y.
"""
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from cdftransform.samples import PairedSample
from cdftransform.simulation import generate
from cdftransform.streams import GEN_STREAM, substream
from commands import emit
from commands.registry import FieldSpec, define
from config import DEFAULT_GEN_CONFIG, GenRunConfig, load_run_config

logger = logging.getLogger(__name__)


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator='\n')


def _column(values: np.ndarray, discrete: bool) -> np.ndarray:
    return values.astype(np.int64) if discrete else values


def run_gen(config_path, overrides) -> list[Path]:
    cfg = load_run_config(GenRunConfig, DEFAULT_GEN_CONFIG, config_path, overrides)
    dgp = cfg.dgp()
    data = generate(dgp, substream(cfg.seed, GEN_STREAM))
    discrete = dgp.family == 'discrete'

    if isinstance(data, PairedSample):
        files = {
            Path(f'{cfg.out}.csv'): pd.DataFrame({
                'x': _column(data.x.values, discrete),
                'y': _column(data.y.values, discrete),
            }),
        }
    else:
        x, y = data
        files = {
            Path(f'{cfg.out}_x.csv'): pd.DataFrame({'value': _column(x.values, discrete)}),
            Path(f'{cfg.out}_y.csv'): pd.DataFrame({'value': _column(y.values, discrete)}),
        }
    for path, frame in files.items():
        emit(_csv(frame), str(path))
        logger.info('[gen] wrote %s (%d rows)', path, len(frame))
    return list(files)


define(
    name        = 'gen',
    description = 'Generate one dataset from a simulation design and write it to CSV.',
    defaults    = DEFAULT_GEN_CONFIG,
    run         = run_gen,
    input       = {
        'family':  FieldSpec('string',  'Design family', enum=['continuous', 'discrete']),
        'dgp_id':  FieldSpec('integer', 'DGP (0 is the null)', enum=[0, 1, 2, 3]),
        'pairing': FieldSpec('string',  'Sampling scheme', enum=['independent', 'matched']),
        'n1':      FieldSpec('integer', 'Size of X', example=500),
        'n2':      FieldSpec('integer', 'Size of Y (equal to n1 when matched)', example=500),
        'seed':    FieldSpec('integer', 'Seed of the generation stream', example=0),
        'out':     FieldSpec('string',  'File prefix', example='data/sim'),
        'format':  FieldSpec('string',  'Output format', enum=['csv']),
    },
    output      = '<out>_x.csv and <out>_y.csv (independent) or <out>.csv with columns x, y (matched).',
)
