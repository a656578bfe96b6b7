"""
ktest: K-sample test of one base sample against K comparison samples.

    python cli.py ktest --config=configs/ktest_ages.yaml

Each entry of ``comparisons`` names its CSV, column, family and box.
"""
import logging

from cdftransform.inference import k_sample_test_sweep
from cdftransform.samples import MultiSampleSet
from commands import emit
from commands.registry import TEST_FIELDS, FieldSpec, define
from config import DEFAULT_KTEST_CONFIG, KTestRunConfig, load_run_config, read_sample
from report_registry import compile_columns, render

logger = logging.getLogger(__name__)


def run_ktest(config_path, overrides) -> None:
    cfg = load_run_config(KTestRunConfig, DEFAULT_KTEST_CONFIG, config_path, overrides)
    columns = compile_columns(cfg.columns)
    built = [c.build() for c in cfg.comparisons]
    test_config = cfg.test_config()

    data = MultiSampleSet(
        base=read_sample(cfg.base, cfg.base_column),
        comparisons=tuple(read_sample(c.path, c.column) for c in cfg.comparisons),
    )
    logger.info('[ktest] K=%d families=%s taus=%s', data.k, [f.name for f, _ in built], cfg.taus)
    results = k_sample_test_sweep(data, [f for f, _ in built], [b for _, b in built], test_config, cfg.taus)
    emit(render([r.to_record() for r in results], columns, cfg.format, cfg.echo()), cfg.out)


define(
    name        = 'ktest',
    description = (
        'K-sample test of H0: F(x) = G_k(g_k(x, θ_k)) for every k, independent samples only. '
        'θ̂ is reported as one tuple per comparison.'
    ),
    defaults    = DEFAULT_KTEST_CONFIG,
    run         = run_ktest,
    input       = {
        **TEST_FIELDS,
        'base':        FieldSpec('string', 'CSV holding the base sample X'),
        'base_column': FieldSpec('string', 'Column of X (first column by default)', nullable=True),
        'comparisons': FieldSpec(
            'array',
            'One entry per comparison: {path, column, family, shift_sign, scale_power, box_lower, box_upper}',
            items=FieldSpec('object'),
        ),
    },
    output      = 'One row per τ: statistic, critical value, p-value, decision, θ̂_1; …; θ̂_K.',
)
