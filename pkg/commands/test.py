"""
test: two-sample test from CSV inputs.

    python cli.py test --x=before.csv --y=after.csv --taus='[0.05,0.08]'
    python cli.py test --paired=pairs.csv --pairing=matched
    python cli.py test --config=configs/age_ny.yaml --n_boot=5000

One report row per τ; the exit code is 0 whatever the decision.
"""
import logging

from cdftransform.inference import two_sample_test_sweep
from commands import emit
from commands.registry import FAMILY_FIELDS, TEST_FIELDS, FieldSpec, define
from config import DEFAULT_TEST_CONFIG, TestRunConfig, load_run_config, read_paired, read_sample
from report_registry import compile_columns, render

logger = logging.getLogger(__name__)


def run_test(config_path, overrides) -> None:
    cfg = load_run_config(TestRunConfig, DEFAULT_TEST_CONFIG, config_path, overrides)
    columns = compile_columns(cfg.columns)
    family, box = cfg.family_setting().build()
    test_config = cfg.test_config()

    if cfg.paired:
        pairs = read_paired(cfg.paired, cfg.x_column, cfg.y_column)
        x, y = (pairs, None) if cfg.pairing == 'matched' else (pairs.x, pairs.y)
    else:
        x, y = read_sample(cfg.x, cfg.x_column), read_sample(cfg.y, cfg.y_column)

    logger.info('[test] family=%s box=%s–%s taus=%s', family.name, box.lower, box.upper, cfg.taus)
    results = two_sample_test_sweep(x, y, family, box, test_config, cfg.taus)
    emit(render([r.to_record() for r in results], columns, cfg.format, cfg.echo()), cfg.out)


define(
    name        = 'test',
    description = (
        'Two-sample test of H0: F(x) = G(g(x, θ)) for some θ in the box. '
        'Independent samples come from two CSVs (x, y) or two columns of one CSV (paired); '
        'matched pairs need pairing=matched and paired.'
    ),
    defaults    = DEFAULT_TEST_CONFIG,
    run         = run_test,
    input       = {
        **TEST_FIELDS,
        **FAMILY_FIELDS,
        'x':        FieldSpec('string', 'CSV holding the base sample X', nullable=True),
        'y':        FieldSpec('string', 'CSV holding the comparison sample Y', nullable=True),
        'paired':   FieldSpec('string', 'One CSV holding both columns', nullable=True),
        'x_column': FieldSpec('string', "Column of X (first column; 'x' in a paired file)", nullable=True),
        'y_column': FieldSpec('string', "Column of Y (first column; 'y' in a paired file)", nullable=True),
    },
    output      = 'One row per τ: statistic, critical value, p-value, decision, θ̂.',
)
