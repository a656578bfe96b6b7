import importlib
import io
import json
import logging
import re

import pandas as pd
import pytest
import yaml

import cli

from conftest import CONFIG_DIR, DATA_DIR, REPO_ROOT

FAST = ['--n_boot=20', '--m_nodes=32', '--resolution=11']


@pytest.fixture(autouse=True)
def _repo_cwd(monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    yield
    logging.captureWarnings(False)


def _csv_rows(text):
    return pd.read_csv(io.StringIO(text), skiprows=1, dtype=str, keep_default_na=False)


def _run(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_exact_paired_config_never_rejects(capsys):
    code, out, _ = _run(['test', f'--config={CONFIG_DIR / "exact_paired.yaml"}', '--format=csv'], capsys)
    assert code == 0
    assert out.startswith('# config: ')
    rows = _csv_rows(out)
    assert rows['tau'].tolist() == ['0.05', '0.08', '0.1']
    assert set(rows['statistic']) == {'0'}
    assert set(rows['decision']) == {'fail to reject'}


def test_text_report_layout(capsys):
    code, out, _ = _run(['test', f'--config={CONFIG_DIR / "exact_paired.yaml"}', '--n_boot=10',
                         '--columns=[test_result,test_detail]'], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith('# config: {')
    assert lines[1].split()[:4] == ['tau', 'statistic', 'critical_value', 'p_value']
    assert 'n_boot' in lines[1]
    # T_n = 100 here, so τ = 0.1 gives c = 1
    assert len(lines) == 6
    assert lines[-1].startswith('# warning: perturbation weight')


def test_jsonl_report(capsys):
    code, out, _ = _run(['test', f'--config={CONFIG_DIR / "exact_paired.yaml"}', '--n_boot=10',
                         '--format=jsonl'], capsys)
    assert code == 0
    lines = [json.loads(line) for line in out.splitlines()]
    assert lines[0]['config']['seed'] == 7
    assert 'workers' not in lines[0]['config']
    assert [r['tau'] for r in lines[1:]] == [0.05, 0.08, 0.1]
    assert all(r['decision'] == 'fail to reject' for r in lines[1:])


def test_jsonl_honours_columns(capsys):
    code, out, _ = _run(['test', f'--config={CONFIG_DIR / "exact_paired.yaml"}', '--n_boot=10',
                         '--format=jsonl', '--columns=[decision]'], capsys)
    assert code == 0
    rows = [json.loads(line) for line in out.splitlines()[1:]]
    assert all(set(r) == {'tau', 'decision', 'diagnostics'} for r in rows)


def test_scalar_taus_flag(capsys):
    code, out, _ = _run(['test', f'--config={CONFIG_DIR / "exact_paired.yaml"}', '--n_boot=10',
                         '--format=csv', '--taus=0.08'], capsys)
    assert code == 0
    assert _csv_rows(out)['tau'].tolist() == ['0.08']


def test_repeat_runs_are_byte_identical(tmp_path, capsys):
    outputs = []
    for name, workers in (('a.csv', 1), ('b.csv', 3)):
        path = tmp_path / name
        code, _, _ = _run(['test', f'--config={CONFIG_DIR / "age_ny.yaml"}', *FAST, '--format=csv',
                           f'--workers={workers}', f'--out={path}'], capsys)
        assert code == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0].count(b'\n') == 6


def test_malformed_csv_exits_with_data_error(tmp_path, capsys):
    bad = tmp_path / 'bad.csv'
    bad.write_text('value\n1.5\nabc\n3\n', encoding='utf-8')
    good = DATA_DIR / 'age_pa_after.csv'
    code, out, err = _run(['test', f'--x={bad}', f'--y={good}', *FAST], capsys)
    assert code == 3
    assert out == ''
    assert str(bad) in err
    assert 'row 3' in err
    assert "column 'value'" in err


def test_missing_file_exits_with_data_error(tmp_path, capsys):
    code, _, err = _run(['test', f'--x={tmp_path / "nope.csv"}', f'--y={DATA_DIR / "age_pa_after.csv"}'], capsys)
    assert code == 3
    assert 'not found' in err


def test_unknown_config_key_exits_with_config_error(capsys):
    code, _, err = _run(['test', f'--config={CONFIG_DIR / "exact_paired.yaml"}', '--colour=red'], capsys)
    assert code == 2
    assert err.startswith('[error] invalid configuration')
    assert 'colour' in err


def test_matched_without_paired_file_is_a_config_error(capsys):
    code, _, err = _run(['test', '--pairing=matched', f'--x={DATA_DIR / "age_pa_after.csv"}'], capsys)
    assert code == 2
    assert 'paired' in err


def test_bad_box_is_a_config_error(capsys):
    code, _, _ = _run(['test', f'--config={CONFIG_DIR / "age_ny.yaml"}', '--box_lower=[-2,0]'], capsys)
    assert code == 2


def test_unknown_log_level(capsys):
    code, _, err = _run(['describe', '--log_level=chatty'], capsys)
    assert code == 2
    assert 'log level' in err


def test_single_comparison_ktest_matches_test(tmp_path, capsys):
    doc = {
        'base': str(DATA_DIR / 'age_pa_before.csv'),
        'comparisons': [{
            'path': str(DATA_DIR / 'age_pa_after.csv'),
            'family': 'location_scale',
            'box_lower': [-2.0, 0.5],
            'box_upper': [0.0, 2.0],
        }],
        'taus': [0.05, 0.08],
        'seed': 3,
    }
    config = tmp_path / 'k1.yaml'
    config.write_text(yaml.safe_dump(doc), encoding='utf-8')

    code, k_out, _ = _run(['ktest', f'--config={config}', *FAST, '--format=csv'], capsys)
    assert code == 0
    code, t_out, _ = _run(['test', f'--x={DATA_DIR / "age_pa_before.csv"}', f'--y={DATA_DIR / "age_pa_after.csv"}',
                           '--taus=[0.05,0.08]', '--seed=3', *FAST, '--format=csv'], capsys)
    assert code == 0
    assert k_out.splitlines()[1:] == t_out.splitlines()[1:]


def test_ktest_example_config(capsys):
    code, out, _ = _run(['ktest', f'--config={CONFIG_DIR / "ktest_ages.yaml"}', *FAST, '--format=jsonl'], capsys)
    assert code == 0
    records = [json.loads(line) for line in out.splitlines()[1:]]
    assert len(records) == 2
    assert [len(t) for t in records[0]['theta_hat']] == [2, 1]


def test_gen_is_deterministic_and_discrete_values_are_integers(tmp_path, capsys):
    for prefix in ('a', 'b'):
        code, _, _ = _run(['gen', '--family=discrete', '--dgp_id=0', '--n1=40', '--n2=30', '--seed=9',
                           f'--out={tmp_path / prefix}'], capsys)
        assert code == 0
    for part in ('x', 'y'):
        a = (tmp_path / f'a_{part}.csv').read_text(encoding='utf-8')
        b = (tmp_path / f'b_{part}.csv').read_text(encoding='utf-8')
        assert a == b
        values = a.splitlines()
        assert values[0] == 'value'
        assert all(v.isdigit() and 1 <= int(v) <= 10 for v in values[1:])
    assert len((tmp_path / 'a_x.csv').read_text(encoding='utf-8').splitlines()) == 41


def test_gen_matched_writes_one_file(tmp_path, capsys):
    code, _, _ = _run(['gen', '--pairing=matched', '--n1=25', '--n2=25', f'--out={tmp_path / "m"}'], capsys)
    assert code == 0
    frame = pd.read_csv(tmp_path / 'm.csv')
    assert list(frame.columns) == ['x', 'y']
    assert len(frame) == 25


def test_gen_then_test_round_trip(tmp_path, capsys):
    prefix = tmp_path / 'sim'
    assert _run(['gen', '--dgp_id=3', '--n1=200', '--n2=200', f'--out={prefix}'], capsys)[0] == 0
    code, out, _ = _run(['test', f'--x={prefix}_x.csv', f'--y={prefix}_y.csv', *FAST, '--taus=[0.08]',
                         '--columns=[decision]'], capsys)
    assert code == 0
    assert out.splitlines()[1].split() == ['tau', 'decision']


def test_simulate_smoke(capsys):
    code, out, _ = _run(['simulate', '--n_mc=1', '--sizes=[[20,20]]', '--dgp_ids=[0,3]', '--taus=[0.08]',
                         '--m_nodes=16', '--resolution=5'], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith('# config: ')
    assert lines[1] == '# continuous / independent'
    assert lines[2].split() == ['dgp', 'n1', 'n2', '0.08']
    assert lines[4].split()[0] == '(0)'
    assert lines[5].split()[0] == '(3)'
    assert lines[4].split()[-1] in ('0.000', '1.000')


def test_simulate_csv(capsys):
    code, out, _ = _run(['simulate', '--n_mc=2', '--sizes=[[20,20]]', '--dgp_ids=[1]', '--taus=[0.06,0.08]',
                         '--m_nodes=16', '--resolution=5', '--format=csv', '--family=discrete'], capsys)
    assert code == 0
    rows = _csv_rows(out)
    assert list(rows.columns) == ['family', 'pairing', 'dgp', 'n1', 'n2', 'tau=0.06', 'tau=0.08']
    assert rows.loc[0, 'family'] == 'discrete'


def test_describe_lists_every_command(capsys):
    code, out, _ = _run(['describe'], capsys)
    assert code == 0
    doc = json.loads(out)
    assert {c['name'] for c in doc['commands']} == {'test', 'ktest', 'simulate', 'gen'}
    assert doc['total'] == 4
    test_cmd = next(c for c in doc['commands'] if c['name'] == 'test')
    assert test_cmd['input']['taus']['default'] == [0.05, 0.06, 0.07, 0.08]
    assert {r['name'] for r in doc['report_columns']} == {'test_result', 'test_detail', 'decision'}


@pytest.mark.parametrize('module', ['commands.test', 'commands.ktest', 'commands.simulate', 'commands.gen'])
def test_usage_lines_name_bundled_configs(module):
    doc = importlib.import_module(module).__doc__
    for name in re.findall(r'configs/[\w.-]+\.yaml', doc):
        assert (REPO_ROOT / name).is_file(), name
