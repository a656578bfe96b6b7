"""
Report column registry.

Each ReportSpec is a named group of columns that read one TestResult record
(``TestResult.to_record()``) and render it as text.  Specs are composable:
select as many as you like with the ``columns`` config key and their columns
are concatenated in order.

Registration
------------
    REPORT_REGISTRY['test_result']  → ReportSpec
    REPORT_REGISTRY['test_detail']  → ReportSpec
    ...

Rendering
---------
compile_columns(names) returns the ordered column list; the writers turn a
list of records into one of three formats, each headed by the effective
configuration line:

    text   aligned columns, diagnostics as trailing '# warning:' lines
    csv    header + one row per τ
    jsonl  {"config": ...} then one JSON object per τ

    columns = compile_columns(['test_result', 'test_detail'])
    text    = render(records, columns, 'text', echo)
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Any, Callable

import pandas as pd

from cdftransform.errors import ConfigError


# ---------------------------------------------------------------------------
# Column / ReportSpec
# ---------------------------------------------------------------------------

@dataclass
class Column:
    """
    One report column.

    name   : header text
    fmt    : format spec applied to numbers ('' for str())
    extract: callable(record) -> value
    raw    : callable(record) -> JSON value, when it differs from extract
    """
    name:    str
    fmt:     str
    extract: Callable[[dict], Any]
    raw:     Callable[[dict], Any] | None = None

    def value(self, record: dict) -> Any:
        return (self.raw or self.extract)(record)

    def render(self, record: dict) -> str:
        value = self.extract(record)
        if value is None:
            return 'nan'
        if self.fmt and isinstance(value, (int, float)) and not isinstance(value, bool):
            return format(value, self.fmt)
        return str(value)


@dataclass
class ReportSpec:
    """
    A named group of columns.

    name       : key used in the ``columns`` config list
    description: shown by ``describe``
    columns    : columns this spec contributes, in order
    """
    name:        str
    description: str
    columns:     list[Column] = field(default_factory=list)


def _theta(record: dict) -> str:
    parts = ['(' + ', '.join(format(v, '.6g') for v in theta) + ')' for theta in record['theta_hat']]
    return '; '.join(parts)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

REPORT_REGISTRY: dict[str, ReportSpec] = {}


def _reg(spec: ReportSpec) -> ReportSpec:
    REPORT_REGISTRY[spec.name] = spec
    return spec


_reg(ReportSpec(
    name        = 'test_result',
    description = 'τ, statistic, critical value, p-value, decision and the minimiser θ̂ (one tuple per comparison).',
    columns     = [
        Column('tau',            'g',    lambda r: r['tau']),
        Column('statistic',      '.6g',  lambda r: r['statistic']),
        Column('critical_value', '.6g',  lambda r: r['critical_value']),
        Column('p_value',        '.4f',  lambda r: r['p_value']),
        Column('decision',       '',     lambda r: r['decision']),
        Column('theta_hat',      '',     _theta, raw=lambda r: r['theta_hat']),
    ],
))

_reg(ReportSpec(
    name        = 'test_detail',
    description = 'Scaling factor T_n, criterion L(φ̂), perturbation weight c = τ·√T_n and bootstrap count.',
    columns     = [
        Column('t_n',     '.6g', lambda r: r['t_n']),
        Column('l_value', '.6g', lambda r: r['l_value']),
        Column('c',       '.6g', lambda r: r['mix']),
        Column('n_boot',  'd',   lambda r: r['n_boot']),
    ],
))

_reg(ReportSpec(
    name        = 'decision',
    description = 'τ and the decision only.',
    columns     = [
        Column('tau',      'g', lambda r: r['tau']),
        Column('decision', '',  lambda r: r['decision']),
    ],
))


# ---------------------------------------------------------------------------
# Compilation and writers
# ---------------------------------------------------------------------------

def compile_columns(names: list[str]) -> list[Column]:
    """Ordered union of the columns of the named specs; repeated column names are kept once."""
    unknown = [n for n in names if n not in REPORT_REGISTRY]
    if unknown:
        raise ConfigError(f'unknown report column group(s) {unknown}; choose from {sorted(REPORT_REGISTRY)}')
    columns, seen = [], set()
    for name in names:
        for col in REPORT_REGISTRY[name].columns:
            if col.name not in seen:
                seen.add(col.name)
                columns.append(col)
    return columns


def _diagnostics(records: list[dict]) -> list[str]:
    out: list[str] = []
    for r in records:
        for msg in r.get('diagnostics', []):
            if msg not in out:
                out.append(msg)
    return out


def render_text(records: list[dict], columns: list[Column], header: str = '') -> str:
    cells = [[c.render(r) for c in columns] for r in records]
    names = [c.name for c in columns]
    widths = [max([len(n)] + [len(row[i]) for row in cells]) for i, n in enumerate(names)]

    def line(values):
        return '  '.join(v.ljust(w) for v, w in zip(values, widths)).rstrip()

    lines = [header] if header else []
    lines.append(line(names))
    lines.extend(line(row) for row in cells)
    lines.extend(f'# warning: {msg}' for msg in _diagnostics(records))
    return '\n'.join(lines) + '\n'


def render_csv(records: list[dict], columns: list[Column], header: str = '') -> str:
    frame = pd.DataFrame([[c.render(r) for c in columns] for r in records], columns=[c.name for c in columns])
    buf = io.StringIO()
    if header:
        buf.write(header + '\n')
    frame.to_csv(buf, index=False, lineterminator='\n')
    return buf.getvalue()


def render_jsonl(records: list[dict], columns: list[Column], header: dict | None = None) -> str:
    """One JSON object per record holding the selected columns plus its diagnostics."""
    lines = [json.dumps({'config': header}, sort_keys=True)] if header is not None else []
    for r in records:
        row = {c.name: c.value(r) for c in columns}
        row['diagnostics'] = list(r.get('diagnostics', []))
        lines.append(json.dumps(row, sort_keys=True))
    return '\n'.join(lines) + '\n'


def report_description(spec: ReportSpec) -> dict:
    return {
        'name':        spec.name,
        'description': spec.description,
        'columns':     [c.name for c in spec.columns],
    }


def config_header(echo: dict) -> str:
    return '# config: ' + json.dumps(echo, sort_keys=True, separators=(',', ':'))


def render(records: list[dict], columns: list[Column], fmt: str, echo: dict) -> str:
    """Render *records* in *fmt* ('text' | 'csv' | 'jsonl') under the configuration *echo*."""
    if fmt == 'text':
        return render_text(records, columns, config_header(echo))
    if fmt == 'csv':
        return render_csv(records, columns, config_header(echo))
    if fmt == 'jsonl':
        return render_jsonl(records, columns, echo)
    raise ConfigError(f'unknown report format {fmt!r}')
