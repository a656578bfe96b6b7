"""
Command registry: single source of truth for the CLI surface.

Usage
-----
Each command module calls ``define(...)`` once at import time.  cli.py
dispatches through COMMANDS and ``describe`` prints the whole document.

FieldSpec
---------
Describes one config key a command accepts:

    FieldSpec('number',  'Level of significance', example=0.05)
    FieldSpec('string',  enum=['text', 'csv', 'jsonl'])
    FieldSpec('array',   items=FieldSpec('number'), example=[0.05, 0.06])
    FieldSpec('string',  nullable=True)

Type names follow JSON Schema: string, boolean, integer, number, array, object.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable


# ---------------------------------------------------------------------------
# Field schema descriptor
# ---------------------------------------------------------------------------

@dataclass
class FieldSpec:
    """Describes a single config key."""
    type:        str
    description: str   = ''
    nullable:    bool  = False
    enum:        list  = field(default_factory=list)
    example:     object = None
    items:       object = None   # FieldSpec describing each array element


def _field_to_dict(f: FieldSpec) -> dict:
    """Serialise a FieldSpec to a plain dict, omitting default/empty values."""
    d: dict = {'type': f.type}
    if f.description:
        d['description'] = f.description
    if f.nullable:
        d['nullable'] = True
    if f.enum:
        d['enum'] = list(f.enum)
    if f.example is not None:
        d['example'] = f.example
    if f.items is not None:
        d['items'] = _field_to_dict(f.items)
    return d


# ---------------------------------------------------------------------------
# Command spec
# ---------------------------------------------------------------------------

@dataclass
class CommandSpec:
    """
    name       : subcommand name (``python cli.py <name>``)
    description: shown by ``describe``
    defaults   : default config dict merged under the YAML file and flags
    run        : callable(config_path, overrides); writes its outputs
    input      : {key: FieldSpec} for every accepted config key
    output     : human description of what the command writes
    """
    name:        str
    description: str
    defaults:    dict
    run:         Callable[[str | None, dict], object]
    input:       dict = field(default_factory=dict)
    output:      str = ''


def _command_to_dict(spec: CommandSpec) -> dict:
    return {
        'name':        spec.name,
        'description': spec.description,
        'input':       {
            k: {**_field_to_dict(v), 'default': spec.defaults.get(k)}
            for k, v in spec.input.items()
        },
        'output':      spec.output,
    }


COMMANDS: dict[str, CommandSpec] = {}


def define(
    name:        str,
    description: str,
    defaults:    dict,
    run:         Callable[[str | None, dict], object],
    input:       dict = None,
    output:      str = '',
) -> CommandSpec:
    """Register a command spec and return it.  Call once per command at import time."""
    missing = sorted(set(defaults) - set(input or {}))
    if missing:
        raise ValueError(f'command {name!r}: config keys without a FieldSpec: {missing}')
    spec = CommandSpec(
        name=name,
        description=description,
        defaults=defaults,
        run=run,
        input=input or {},
        output=output,
    )
    COMMANDS[name] = spec
    return spec


def describe() -> dict:
    """The full command document."""
    return {
        'commands': [_command_to_dict(c) for c in COMMANDS.values()],
        'total':    len(COMMANDS),
    }


# ---------------------------------------------------------------------------
# Shared field specs
# ---------------------------------------------------------------------------

COMMON_FIELDS = {
    'seed':     FieldSpec('integer', 'Seed of every random stream in the run', example=0),
    'out':      FieldSpec('string',  'Output path (stdout when empty); a file prefix for gen', nullable=True),
    'format':   FieldSpec('string',  'Output format', enum=['text', 'csv', 'jsonl']),
    'workers':  FieldSpec('integer', 'Worker threads (default CDFTRANSFORM_WORKERS or 1); never changes results', nullable=True),
    'progress': FieldSpec('boolean', 'Show a progress bar on stderr'),
}

TEST_FIELDS = {
    **COMMON_FIELDS,
    'pairing':       FieldSpec('string',  'Sampling scheme', enum=['independent', 'matched']),
    'nu':            FieldSpec('object',  "Measure ν: 'auto', {mean, sd} or {nodes: [...]}", example='auto'),
    'alpha':         FieldSpec('number',  'Level of significance in (0, 1)', example=0.05),
    'taus':          FieldSpec('array',   'Step sizes τ; one result row each', items=FieldSpec('number'), example=[0.05, 0.06]),
    'n_boot':        FieldSpec('integer', 'Bootstrap draws', example=1000),
    'm_nodes':       FieldSpec('integer', 'Quadrature nodes for normal ν', example=512),
    'resolution':    FieldSpec('integer', 'θ-lattice points per dimension (or one per dimension)', example=41),
    'refine':        FieldSpec('boolean', 'Pattern-search refinement after the lattice search'),
    'refine_shrink': FieldSpec('number',  'Refinement step multiplier in (0, 1)', example=0.5),
    'refine_rounds': FieldSpec('integer', 'Refinement rounds', example=8),
    'audit':         FieldSpec('boolean', 'Run the sampled monotonicity audit'),
    'columns':       FieldSpec('array',   'Report column groups (see report_registry)', items=FieldSpec('string'),
                               example=['test_result', 'test_detail']),
}

FAMILY_FIELDS = {
    'family':      FieldSpec('string',  'Transformation family', enum=['location', 'scale', 'location_scale', 'affine']),
    'shift_sign':  FieldSpec('integer', 'affine only: s in (x + s·θ₁)·θ₂^p', enum=[-1, 1]),
    'scale_power': FieldSpec('integer', 'affine only: p in (x + s·θ₁)·θ₂^p', enum=[-1, 1]),
    'box_lower':   FieldSpec('array',   'Lower corner of Θ', items=FieldSpec('number'), example=[-2.0, 0.5]),
    'box_upper':   FieldSpec('array',   'Upper corner of Θ', items=FieldSpec('number'), example=[0.0, 2.0]),
}
