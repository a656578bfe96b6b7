"""
simulate: warp-speed rejection-rate tables.

    python cli.py simulate --family=continuous --dgp_ids='[0]' --sizes='[[500,500]]' --taus='[0.08]'

Rows are DGP × n1 × n2, columns τ.
"""
import io
import logging

from cdftransform.simulation import rate_table_frame, rate_table_text, warp_speed_study
from commands import emit
from commands.registry import COMMON_FIELDS, FieldSpec, define
from config import DEFAULT_STUDY_CONFIG, SimulateRunConfig, load_run_config
from report_registry import config_header

logger = logging.getLogger(__name__)


def run_simulate(config_path, overrides) -> None:
    cfg = load_run_config(SimulateRunConfig, DEFAULT_STUDY_CONFIG, config_path, overrides)
    plan = cfg.plan()
    logger.info('[simulate] %d design(s), n_mc=%d, taus=%s', len(plan.dgps), plan.n_mc, list(plan.taus))
    table = warp_speed_study(plan)

    header = config_header(cfg.echo())
    if cfg.format == 'csv':
        buf = io.StringIO()
        buf.write(header + '\n')
        rate_table_frame(table).to_csv(buf, index=False, lineterminator='\n')
        text = buf.getvalue()
    else:
        text = header + '\n' + rate_table_text(table)
    emit(text, cfg.out)


define(
    name        = 'simulate',
    description = 'Monte Carlo size/power study by the warp-speed method (one bootstrap draw per replication).',
    defaults    = DEFAULT_STUDY_CONFIG,
    run         = run_simulate,
    input       = {
        **COMMON_FIELDS,
        'format':     FieldSpec('string',  'Output format', enum=['text', 'csv']),
        'family':     FieldSpec('string',  'Design family', enum=['continuous', 'discrete']),
        'pairing':    FieldSpec('string',  'Sampling scheme', enum=['independent', 'matched']),
        'dgp_ids':    FieldSpec('array',   'DGPs to run (0 is the null)', items=FieldSpec('integer'), example=[0, 1, 2, 3]),
        'sizes':      FieldSpec('array',   '(n1, n2) pairs', items=FieldSpec('array'), example=[[500, 500]]),
        'taus':       FieldSpec('array',   'Step sizes τ; one column each', items=FieldSpec('number')),
        'n_mc':       FieldSpec('integer', 'Monte Carlo replications', example=1000),
        'alpha':      FieldSpec('number',  'Level of significance', example=0.05),
        'm_nodes':    FieldSpec('integer', 'Quadrature nodes', example=256),
        'resolution': FieldSpec('integer', 'θ-lattice points per dimension', example=41),
        'refine':     FieldSpec('boolean', 'Pattern-search refinement'),
        'nu':         FieldSpec('object',  'Measure ν as {mean, sd} or {nodes}; design default when empty', nullable=True),
        'box_lower':  FieldSpec('array',   'Lower corner of Θ', items=FieldSpec('number')),
        'box_upper':  FieldSpec('array',   'Upper corner of Θ', items=FieldSpec('number')),
    },
    output      = 'Rejection-rate table (rows DGP × n1 × n2, columns τ) as aligned text or CSV.',
)
