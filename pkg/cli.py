"""
cdftransform command line.

    python cli.py test      [--config=FILE.yaml] [--key=value ...]
    python cli.py ktest     [--config=FILE.yaml] [--key=value ...]
    python cli.py simulate  [--config=FILE.yaml] [--key=value ...]
    python cli.py gen       [--config=FILE.yaml] [--key=value ...]
    python cli.py describe

Every command accepts --seed, --out, --format and --log_level.  Reports go to
stdout (or --out); logs and progress bars go to stderr.

Exit codes: 0 success, 1 unexpected error, 2 configuration error, 3 data error.
"""
import json
import logging
import os
import sys

import fire

# Importing the command modules executes their define() calls,
# which populates commands.registry.COMMANDS.
import commands.gen       # noqa: F401
import commands.ktest     # noqa: F401
import commands.simulate  # noqa: F401
import commands.test      # noqa: F401
from cdftransform.errors import ConfigError, DataError, DomainError
from commands.registry import COMMANDS, describe
from report_registry import REPORT_REGISTRY, report_description

logger = logging.getLogger('cdftransform.cli')

EXIT_OK     = 0
EXIT_ERROR  = 1
EXIT_CONFIG = 2
EXIT_DATA   = 3


def _setup_logging(level: str | None) -> None:
    name = str(level or os.environ.get('CDFTRANSFORM_LOG_LEVEL', 'WARNING')).upper()
    value = logging.getLevelName(name)
    if not isinstance(value, int):
        raise ConfigError(f'unknown log level {name!r}')
    logging.basicConfig(
        level=value,
        stream=sys.stderr,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        force=True,
    )
    logging.captureWarnings(True)


def _run(command: str, config, log_level, flags: dict) -> None:
    _setup_logging(log_level)
    spec = COMMANDS[command]
    logger.debug('[cli] %s config=%s flags=%s', command, config, sorted(flags))
    spec.run(config, flags)


class Cli:
    """Tests of parametric transformations between CDFs."""

    def test(self, config=None, log_level=None, **flags):
        """Two-sample test (independent samples or matched pairs)."""
        _run('test', config, log_level, flags)

    def ktest(self, config=None, log_level=None, **flags):
        """K-sample test against one base sample."""
        _run('ktest', config, log_level, flags)

    def simulate(self, config=None, log_level=None, **flags):
        """Warp-speed rejection-rate tables."""
        _run('simulate', config, log_level, flags)

    def gen(self, config=None, log_level=None, **flags):
        """Write one simulated dataset to CSV."""
        _run('gen', config, log_level, flags)

    def describe(self, log_level=None):
        """Print every command, its config keys and defaults, and the report column groups."""
        _setup_logging(log_level)
        doc = {
            **describe(),
            'report_columns': [report_description(s) for s in REPORT_REGISTRY.values()],
        }
        sys.stdout.write(json.dumps(doc, indent=2, ensure_ascii=False) + '\n')


def main(argv: list[str] | None = None) -> int:
    try:
        fire.Fire(Cli, command=argv, name='cdftransform')
    except fire.core.FireExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    except (ConfigError, DomainError) as exc:
        sys.stderr.write(f'[error] {exc}\n')
        return EXIT_CONFIG
    except DataError as exc:
        sys.stderr.write(f'[error] {exc}\n')
        return EXIT_DATA
    except Exception as exc:
        logger.exception('[cli] unexpected failure')
        sys.stderr.write(f'[error] {type(exc).__name__}: {exc}\n')
        return EXIT_ERROR
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
