import json

import pytest

from cdftransform.errors import ConfigError
from report_registry import REPORT_REGISTRY, compile_columns, config_header, render

RECORDS = [
    {'tau': 0.05, 'statistic': 1.25, 'critical_value': 2.5, 'p_value': 0.2, 'decision': 'fail to reject',
     'theta_hat': [[-0.5, 1.25]], 't_n': 100.0, 'l_value': 0.0125, 'mix': 0.5, 'n_boot': 10,
     'diagnostics': []},
    {'tau': 0.1, 'statistic': 1.25, 'critical_value': 1.0, 'p_value': 0.0, 'decision': 'reject',
     'theta_hat': [[-0.5, 1.25]], 't_n': 100.0, 'l_value': 0.0125, 'mix': 1.0, 'n_boot': 10,
     'diagnostics': ['perturbation weight c = tau*sqrt(T_n) = 1 >= 1']},
]


def test_compile_columns_keeps_first_occurrence():
    cols = compile_columns(['decision', 'test_result'])
    names = [c.name for c in cols]
    assert names[:2] == ['tau', 'decision']
    assert names.count('tau') == 1
    assert len(names) == 6


def test_compile_columns_unknown_group():
    with pytest.raises(ConfigError, match='unknown report column group'):
        compile_columns(['test_result', 'fancy'])


def test_text_report():
    text = render(RECORDS, compile_columns(['test_result']), 'text', {'seed': 1})
    lines = text.splitlines()
    assert lines[0] == '# config: {"seed":1}'
    assert lines[1].split() == ['tau', 'statistic', 'critical_value', 'p_value', 'decision', 'theta_hat']
    assert lines[2].startswith('0.05 ')
    assert 'fail to reject' in lines[2]
    assert lines[2].endswith('(-0.5, 1.25)')
    assert lines[3].split()[3] == '0.0000'
    assert lines[4] == '# warning: perturbation weight c = tau*sqrt(T_n) = 1 >= 1'


def test_csv_report_quotes_theta():
    text = render(RECORDS, compile_columns(['test_result', 'test_detail']), 'csv', {})
    lines = text.splitlines()
    assert lines[0] == '# config: {}'
    assert lines[1] == 'tau,statistic,critical_value,p_value,decision,theta_hat,t_n,l_value,c,n_boot'
    assert lines[2] == '0.05,1.25,2.5,0.2000,fail to reject,"(-0.5, 1.25)",100,0.0125,0.5,10'


def test_jsonl_report():
    text = render(RECORDS, compile_columns(['decision']), 'jsonl', {'alpha': 0.05})
    rows = [json.loads(line) for line in text.splitlines()]
    assert rows[0] == {'config': {'alpha': 0.05}}
    assert rows[1] == {'tau': 0.05, 'decision': 'fail to reject', 'diagnostics': []}
    assert rows[2]['decision'] == 'reject'
    assert rows[2]['diagnostics'] == RECORDS[1]['diagnostics']


def test_jsonl_keeps_theta_as_numbers():
    text = render(RECORDS, compile_columns(['test_result', 'test_detail']), 'jsonl', {})
    row = json.loads(text.splitlines()[1])
    assert row['theta_hat'] == [[-0.5, 1.25]]
    assert row['c'] == 0.5
    assert 'boot_stats' not in row and 'l_value' in row


def test_unknown_format():
    with pytest.raises(ConfigError):
        render(RECORDS, compile_columns(['decision']), 'xml', {})


def test_missing_values_render_as_nan():
    col = REPORT_REGISTRY['test_result'].columns[1]
    assert col.render({'statistic': None}) == 'nan'


def test_config_header_is_sorted_and_compact():
    assert config_header({'b': [1, 2], 'a': 'x'}) == '# config: {"a":"x","b":[1,2]}'
