import csv
import io
import json
import tempfile
import zipfile
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from apk.tests.test_dex import repeated_method_index_dex
from fixture_builder.builder import write_fixture
from fixture_builder.profiles import bank_fleet, rule_corpus
from reports.serializers import Format
from rules.catalog import CATALOG
from rules.models import Severity
from scanner.cli import (
    EXIT_CLEAN,
    EXIT_PARSE,
    EXIT_THRESHOLD,
    EXIT_USAGE,
    ConflictingModes,
    MissingArgument,
    Mode,
    UnknownFlag,
    UsageError,
    main,
    parse_args,
)

FLEET_PERCENTAGES = {
    'starling-like': '21.43',
    'monese-like': '50.00',
    'atom-like': '35.71',
    'transferwise-like': '35.71',
    'monzo-like': '35.71',
    'revolut-like': '71.43',
}


def run(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = main([str(arg) for arg in argv], stdout, stderr)
    return code, stdout.getvalue(), stderr.getvalue()


class ParseArgsTests(SimpleTestCase):
    def test_single_file(self):
        config = parse_args(['-f', 'app.apk', '--format', 'json', '--fail-on', 'warning'])
        self.assertEqual(config.mode, Mode.SCAN)
        self.assertEqual(config.inputs, (Path('app.apk'),))
        self.assertEqual(config.output_format, Format.JSON)
        self.assertEqual(config.fail_threshold, Severity.WARNING)

    def test_batch_and_matrix(self):
        self.assertEqual(parse_args(['a.apk', 'b.apk']).mode, Mode.BATCH)
        self.assertEqual(parse_args(['--dir', 'apks']).directory, Path('apks'))
        matrix = parse_args(['--matrix', '--dir', 'apks', '--workers', '2'])
        self.assertEqual(matrix.mode, Mode.MATRIX)
        self.assertEqual(matrix.workers, 2)

    @override_settings(SCAN_DEFAULT_FORMAT='')
    def test_default_formats(self):
        self.assertEqual(parse_args(['-f', 'a.apk']).output_format, Format.TEXT)
        self.assertEqual(parse_args(['--matrix', 'a.apk']).output_format, Format.CSV)
        with self.settings(SCAN_DEFAULT_FORMAT='json'):
            self.assertEqual(parse_args(['--matrix', 'a.apk']).output_format, Format.JSON)

    def test_help(self):
        self.assertEqual(parse_args(['-h']).mode, Mode.HELP)

    def test_usage_errors(self):
        cases = [
            (['--bogus', '-f', 'a.apk'], UnknownFlag),
            (['-f'], MissingArgument),
            ([], MissingArgument),
            (['--matrix'], MissingArgument),
            (['-f', 'a.apk', 'b.apk'], ConflictingModes),
            (['-f', 'a.apk', '--dir', 'apks'], ConflictingModes),
            (['--dir', 'apks', 'a.apk'], ConflictingModes),
            (['-f', 'a.apk', '--fail-on', 'fatal'], UsageError),
            (['--dir', 'apks', '--workers', '0'], UsageError),
        ]
        for argv, error in cases:
            with self.subTest(argv=argv):
                with self.assertRaises(error) as raised:
                    parse_args(argv)
                self.assertEqual(raised.exception.returncode, EXIT_USAGE)


class MainTests(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.root = Path(tmp.name)
        self.fleet_dir = self.root / 'fleet'
        for profile in bank_fleet():
            write_fixture(profile, self.fleet_dir)

    def test_usage_error_exit_code(self):
        code, stdout, stderr = run('--bogus')
        self.assertEqual(code, EXIT_USAGE)
        self.assertEqual(stdout, '')
        self.assertIn('usage: androscan', stderr)
        self.assertIn('androscan: error:', stderr)

    def test_help_exits_clean(self):
        code, stdout, _ = run('-h')
        self.assertEqual(code, EXIT_CLEAN)
        self.assertIn('--fail-on', stdout)

    def test_threshold_exit_codes(self):
        corpus_dir = self.root / 'corpus'
        for profile in rule_corpus():
            path = write_fixture(profile, corpus_dir)
            worst = max(CATALOG[rule].severity for rule in profile.positive_rules)
            for threshold in Severity:
                expected = EXIT_THRESHOLD if worst >= threshold else EXIT_CLEAN
                with self.subTest(profile=profile.name, threshold=threshold.label):
                    code, _, _ = run('-f', path, '--format', 'json', '--fail-on', threshold.label)
                    self.assertEqual(code, expected)
            self.assertEqual(run('-f', path, '--format', 'json')[0], EXIT_CLEAN)

    def test_single_scan_report(self):
        code, stdout, _ = run('-f', self.fleet_dir / 'starling-like.apk', '--format', 'text')
        self.assertEqual(code, EXIT_CLEAN)
        self.assertIn('Vulnerability report: starling-like.apk', stdout)
        self.assertIn('Rules flagged:    3/14', stdout)

    def test_unreadable_apk(self):
        broken = self.root / 'broken.apk'
        broken.write_bytes(b'\x00' * 64)
        code, stdout, stderr = run('-f', broken)
        self.assertEqual(code, EXIT_PARSE)
        self.assertEqual(stdout, '')
        self.assertIn('broken.apk', stderr)
        self.assertEqual(run('-f', self.root / 'absent.apk')[0], EXIT_PARSE)

    def test_batch_continues_past_a_corrupt_apk(self):
        (self.fleet_dir / 'aaa-broken.apk').write_bytes(b'not an apk at all, just bytes')
        with self.assertLogs('scanner.pipeline', 'ERROR'):
            code, stdout, stderr = run('--dir', self.fleet_dir, '--format', 'json')
        self.assertEqual(code, EXIT_PARSE)
        document = json.loads(stdout)
        self.assertEqual(document['kind'], 'batch')
        self.assertEqual(len(document['reports']), 6)
        self.assertIn('aaa-broken.apk', stderr)
        self.assertIn('1 of 7 APKs could not be scanned', stderr)

    def test_batch_continues_past_a_repeated_method_index(self):
        bad = self.root / 'repeated-index.apk'
        with zipfile.ZipFile(self.fleet_dir / 'starling-like.apk') as source, zipfile.ZipFile(bad, 'w') as target:
            target.writestr('AndroidManifest.xml', source.read('AndroidManifest.xml'))
            target.writestr('classes.dex', repeated_method_index_dex())
        self.assertEqual(run('-f', bad)[0], EXIT_PARSE)

        paths = sorted(self.fleet_dir.glob('*.apk')) + [bad]
        with self.assertLogs('scanner.pipeline', 'ERROR'):
            code, stdout, stderr = run(*paths, '--format', 'json')
        self.assertEqual(code, EXIT_PARSE)
        reports = json.loads(stdout)['reports']
        self.assertEqual(len(reports), 6)
        self.assertNotIn('repeated-index.apk', [report['apk_name'] for report in reports])
        self.assertIn('repeated-index.apk', stderr)

    def test_batch_threshold(self):
        self.assertEqual(run('--dir', self.fleet_dir, '--format', 'json', '--fail-on', 'critical')[0],
                         EXIT_THRESHOLD)
        starling = self.fleet_dir / 'starling-like.apk'
        self.assertEqual(run(starling, '--format', 'json', '--fail-on', 'critical')[0], EXIT_CLEAN)

    def test_empty_directory(self):
        empty = self.root / 'empty'
        empty.mkdir()
        code, _, stderr = run('--dir', empty)
        self.assertEqual(code, EXIT_PARSE)
        self.assertIn('no APK files found', stderr)

    def test_matrix_csv(self):
        code, stdout, _ = run('--matrix', '--dir', self.fleet_dir, '--format', 'csv')
        self.assertEqual(code, EXIT_CLEAN)
        rows = list(csv.DictReader(io.StringIO(stdout)))
        self.assertEqual({row['App']: row['Percentage'] for row in rows}, FLEET_PERCENTAGES)
        self.assertEqual({row['App']: row['Total'] for row in rows}['revolut-like'], '10')

    def test_matrix_csv_in_input_order(self):
        paths = [self.fleet_dir / f'{profile.name}.apk' for profile in bank_fleet()]
        code, stdout, _ = run('--matrix', *paths, '--format', 'csv')
        self.assertEqual(code, EXIT_CLEAN)
        rows = list(csv.DictReader(io.StringIO(stdout)))
        self.assertEqual([row['App'] for row in rows], list(FLEET_PERCENTAGES))
        self.assertEqual([row['Percentage'] for row in rows],
                         ['21.43', '50.00', '35.71', '35.71', '35.71', '71.43'])
        self.assertEqual([row['Total'] for row in rows], ['3', '7', '5', '5', '5', '10'])

    def test_matrix_workers_agree(self):
        serial = run('--matrix', '--dir', self.fleet_dir, '--format', 'csv', '--workers', '1')
        parallel = run('--matrix', '--dir', self.fleet_dir, '--format', 'csv', '--workers', '4')
        self.assertEqual(serial, parallel)

    def test_output_file(self):
        target = self.root / 'out' / 'matrix.json'
        code, stdout, _ = run('--matrix', '--dir', self.fleet_dir, '--format', 'json', '-o', target)
        self.assertEqual(code, EXIT_CLEAN)
        self.assertEqual(stdout, '')
        document = json.loads(target.read_text(encoding='utf-8'))
        self.assertEqual(len(document['rows']), 6)


class AndroscanCommandTests(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.path = write_fixture(bank_fleet()[0], tmp.name)

    def test_call_command(self):
        out = io.StringIO()
        call_command('androscan', file=str(self.path), format='json', stdout=out)
        self.assertEqual(json.loads(out.getvalue())['apk_name'], 'starling-like.apk')

    def test_threshold_raises_command_error(self):
        with self.assertRaises(CommandError) as raised:
            call_command('androscan', file=str(self.path), format='json', fail_on='warning',
                         stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, EXIT_THRESHOLD)
