"""
androscan command line.

    androscan -f app.apk                 scan one APK, print its report
    androscan --dir apks/                scan every *.apk in a directory
    androscan a.apk b.apk                scan the listed APKs
    androscan --matrix --dir apks/       fleet matrix over a directory
    androscan -h                         usage

Exit codes: 0 clean, 1 a finding met --fail-on, 2 usage error, 3 an APK could
not be read or parsed. In batch and matrix mode every readable APK is still
scanned and written before 3 is returned.
"""

import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from django.conf import settings
from django.core.management.base import CommandError, CommandParser
from django.db import models

from apk.exceptions import ParseError
from reports.exceptions import ReportError
from reports.rendering import build_fleet_matrix, render_report
from reports.serializers import Format, serialize
from rules.models import Severity

from .pipeline import scan_apk, scan_many

logger = logging.getLogger(__name__)

EXIT_CLEAN = 0
EXIT_THRESHOLD = 1
EXIT_USAGE = 2
EXIT_PARSE = 3

PROG = 'androscan'


class Mode(models.TextChoices):
    SCAN = 'scan', 'Single APK'
    BATCH = 'batch', 'Several APKs'
    MATRIX = 'matrix', 'Fleet matrix'
    HELP = 'help', 'Usage'


class UsageError(CommandError):
    def __init__(self, message, usage=''):
        super().__init__(message, returncode=EXIT_USAGE)
        self.usage = usage


class UnknownFlag(UsageError):
    pass


class MissingArgument(UsageError):
    pass


class ConflictingModes(UsageError):
    pass


@dataclass(frozen=True)
class CliConfig:
    mode: Mode
    inputs: tuple = ()
    output_path: Optional[Path] = None
    format: Optional[Format] = None
    fail_threshold: Optional[Severity] = None
    workers: Optional[int] = None
    directory: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode == Mode.SCAN and len(self.inputs) != 1:
            raise ConflictingModes('-f scans exactly one APK')
        if self.mode in (Mode.BATCH, Mode.MATRIX) and not self.inputs and self.directory is None:
            raise MissingArgument(f'{self.mode.label} mode needs --dir or APK paths')

    @property
    def output_format(self):
        if self.format:
            return Format(self.format)
        if settings.SCAN_DEFAULT_FORMAT:
            return Format(settings.SCAN_DEFAULT_FORMAT)
        return Format.CSV if self.mode == Mode.MATRIX else Format.TEXT


def add_scan_arguments(parser, with_help=True):
    """Flags shared by the standalone parser and the management command."""
    parser.add_argument('-f', '--file', dest='file', metavar='APK', help='scan a single APK')
    parser.add_argument('--dir', dest='directory', metavar='PATH', help='scan every *.apk in a directory')
    parser.add_argument('--matrix', action='store_true', help='emit the fleet vulnerability matrix')
    parser.add_argument('-o', '--output', dest='output', metavar='PATH', help='write output to a file')
    parser.add_argument('--format', choices=Format.values, help='text, json or csv')
    parser.add_argument('--fail-on', dest='fail_on', choices=Severity.labels,
                        help='exit 1 when a finding has at least this severity')
    parser.add_argument('--workers', type=int, metavar='N', help='parallel scans in batch mode')
    parser.add_argument('inputs', nargs='*', metavar='APK', help='APKs for batch or matrix mode')
    if with_help:
        parser.add_argument('-h', '--help', action='store_true', help='show this help and exit')


class ScanArgumentParser(CommandParser):
    def __init__(self):
        super().__init__(
            prog=PROG,
            add_help=False,
            description='Static vulnerability scanner for Android APKs.',
        )
        add_scan_arguments(self)

    def error(self, message):
        usage = self.format_usage()
        if 'unrecognized arguments' in message:
            raise UnknownFlag(message, usage)
        if 'expected one argument' in message or 'required' in message:
            raise MissingArgument(message, usage)
        raise UsageError(message, usage)


def config_from_options(options):
    """Validate parsed flags into a CliConfig."""
    if options.get('help'):
        return CliConfig(mode=Mode.HELP)

    file = options.get('file')
    directory = options.get('directory')
    inputs = tuple(options.get('inputs') or ())
    if file and (directory or inputs or options.get('matrix')):
        raise ConflictingModes('-f cannot be combined with --dir, --matrix or extra APK paths')
    if directory and inputs:
        raise ConflictingModes('--dir cannot be combined with APK paths')

    workers = options.get('workers')
    if workers is not None and workers < 1:
        raise UsageError('--workers must be at least 1')

    if file:
        mode, inputs = Mode.SCAN, (Path(file),)
    elif options.get('matrix'):
        mode = Mode.MATRIX
    elif directory or inputs:
        mode = Mode.BATCH
    else:
        raise MissingArgument('nothing to scan: give -f APK, --dir PATH or APK paths')

    fail_on = options.get('fail_on')
    output = options.get('output')
    return CliConfig(
        mode=mode,
        inputs=tuple(Path(path) for path in inputs),
        output_path=Path(output) if output else None,
        format=Format(options['format']) if options.get('format') else None,
        fail_threshold=Severity.from_label(fail_on) if fail_on else None,
        workers=workers,
        directory=Path(directory) if directory else None,
    )


def parse_args(argv):
    namespace = ScanArgumentParser().parse_args(list(argv))
    return config_from_options(vars(namespace))


def _collect_inputs(config):
    if config.directory is None:
        return list(config.inputs)
    if not config.directory.is_dir():
        raise NotADirectoryError(f'{config.directory} is not a directory')
    return sorted(config.directory.glob('*.apk'))


def _emit(config, data, stdout):
    if config.output_path is None:
        stdout.write(data.decode('utf-8'))
        return
    config.output_path.parent.mkdir(parents=True, exist_ok=True)
    config.output_path.write_bytes(data)
    logger.info('wrote %d bytes to %s', len(data), config.output_path)


def _threshold_code(config, results):
    if any(result.meets(config.fail_threshold) for result in results):
        return EXIT_THRESHOLD
    return EXIT_CLEAN


def _run_scan(config, stdout, stderr):
    path = config.inputs[0]
    try:
        result = scan_apk(path)
    except (ParseError, OSError) as exc:
        stderr.write(f'{PROG}: {path}: {exc}\n')
        return EXIT_PARSE
    _emit(config, serialize(render_report(result), config.output_format), stdout)
    return _threshold_code(config, [result])


def _run_batch(config, stdout, stderr):
    paths = _collect_inputs(config)
    if not paths:
        stderr.write(f'{PROG}: no APK files found in {config.directory}\n')
        return EXIT_PARSE

    outcomes = scan_many(paths, workers=config.workers)
    results = [outcome.result for outcome in outcomes if outcome.ok]
    failures = [outcome for outcome in outcomes if not outcome.ok]

    if results:
        if config.mode == Mode.MATRIX:
            document = build_fleet_matrix(results)
        else:
            document = [render_report(result) for result in results]
        _emit(config, serialize(document, config.output_format), stdout)

    for outcome in failures:
        stderr.write(f'{PROG}: {outcome.path}: {outcome.error}\n')
    if failures:
        stderr.write(f'{PROG}: {len(failures)} of {len(outcomes)} APKs could not be scanned\n')
        return EXIT_PARSE
    return _threshold_code(config, results)


def execute(config, stdout=None, stderr=None):
    """Run a validated CliConfig and return the process exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if config.mode == Mode.HELP:
        stdout.write(ScanArgumentParser().format_help())
        return EXIT_CLEAN
    try:
        if config.mode == Mode.SCAN:
            return _run_scan(config, stdout, stderr)
        return _run_batch(config, stdout, stderr)
    except (OSError, ReportError) as exc:
        stderr.write(f'{PROG}: {exc}\n')
        return EXIT_PARSE


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        config = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        stderr.write(exc.usage or ScanArgumentParser().format_usage())
        stderr.write(f'{PROG}: error: {exc}\n')
        return exc.returncode
    return execute(config, stdout, stderr)
