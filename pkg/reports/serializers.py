"""
Text, JSON and CSV encodings for reports, fleet matrices and scan results.

Every encoder returns UTF-8 bytes. JSON documents carry a "kind" and a
schema_version so deserialize() can rebuild the value it was given.
"""

import json
import logging
from decimal import Decimal

from django.core.serializers.json import DjangoJSONEncoder
from django.db import models
from django.template.loader import render_to_string
from django.utils.dateparse import parse_datetime

from rules.models import Evidence, EvidenceKind, Finding, RuleId, ScanResult, Severity

from .csv_export import matrix_export_csv, reports_export_csv
from .exceptions import ReportError
from .models import SCHEMA_VERSION, FleetMatrix, Report, ReportSection

logger = logging.getLogger(__name__)


class Format(models.TextChoices):
    TEXT = 'text', 'Plain text'
    JSON = 'json', 'JSON'
    CSV = 'csv', 'CSV'


class Kind(models.TextChoices):
    REPORT = 'report', 'Report'
    BATCH = 'batch', 'Batch of reports'
    FLEET_MATRIX = 'fleet_matrix', 'Fleet matrix'
    SCAN_RESULT = 'scan_result', 'Scan result'


# JSON


def _report_payload(report):
    return {
        'apk_name': report.apk_name,
        'generated_at': report.generated_at.isoformat(),
        'package_name': report.package_name,
        'min_sdk': report.min_sdk,
        'target_sdk': report.target_sdk,
        'dex_names': list(report.dex_names),
        'sections': [
            {
                'rule': str(section.rule),
                'title': section.title,
                'evidence': list(section.evidence),
                'severity': section.severity,
                'category': section.category,
                'background': section.background,
                'recommendation': section.recommendation,
                'threat_name': section.threat_name,
                'threat_description': section.threat_description,
            }
            for section in report.sections
        ],
        'appendix': list(report.appendix),
    }


def _matrix_payload(matrix):
    return {
        'rules': [str(rule) for rule in matrix.rules],
        'rows': [
            {
                'app': row.app,
                'cells': list(row.cells),
                'total': row.total,
                'percentage': row.percentage,
            }
            for row in matrix.rows()
        ],
    }


def _result_payload(result):
    return {
        'apk_name': result.apk_name,
        'package_name': result.package_name,
        'min_sdk': result.min_sdk,
        'target_sdk': result.target_sdk,
        'dex_names': list(result.dex_names),
        'rule_vector': list(result.rule_vector),
        'findings': [
            {
                'rule': str(finding.rule),
                'severity': finding.severity.label,
                'title': finding.title,
                'category': finding.category,
                'evidence': [
                    {'kind': str(item.kind), 'location': item.location, 'detail': item.detail}
                    for item in finding.evidence
                ],
            }
            for finding in result.findings
        ],
    }


def _json(kind, body):
    document = {'kind': str(kind), 'schema_version': SCHEMA_VERSION, **body}
    return (json.dumps(document, cls=DjangoJSONEncoder, indent=2) + '\n').encode('utf-8')


def _report_from(payload):
    generated_at = parse_datetime(payload['generated_at'])
    if generated_at is None:
        raise ReportError(f'bad generated_at {payload["generated_at"]!r}')
    return Report(
        apk_name=payload['apk_name'],
        generated_at=generated_at,
        package_name=payload.get('package_name', ''),
        min_sdk=payload.get('min_sdk'),
        target_sdk=payload.get('target_sdk'),
        dex_names=tuple(payload.get('dex_names', ())),
        sections=tuple(
            ReportSection(
                rule=RuleId(section['rule']),
                title=section['title'],
                evidence=tuple(section['evidence']),
                severity=section['severity'],
                category=section['category'],
                background=section['background'],
                recommendation=section['recommendation'],
                threat_name=section.get('threat_name', ''),
                threat_description=section.get('threat_description', ''),
            )
            for section in payload['sections']
        ),
        appendix=tuple(payload['appendix']),
    )


def _matrix_from(payload):
    rows = payload['rows']
    return FleetMatrix(
        apps=tuple(row['app'] for row in rows),
        cells=tuple(tuple(row['cells']) for row in rows),
        totals=tuple(row['total'] for row in rows),
        percentages=tuple(Decimal(row['percentage']) for row in rows),
        rules=tuple(RuleId(rule) for rule in payload['rules']),
    )


def _result_from(payload):
    return ScanResult(
        apk_name=payload['apk_name'],
        package_name=payload.get('package_name', ''),
        min_sdk=payload.get('min_sdk'),
        target_sdk=payload.get('target_sdk'),
        dex_names=tuple(payload.get('dex_names', ())),
        rule_vector=tuple(payload['rule_vector']),
        findings=tuple(
            Finding(
                rule=RuleId(finding['rule']),
                severity=Severity.from_label(finding['severity']),
                title=finding['title'],
                category=finding['category'],
                evidence=tuple(
                    Evidence(kind=EvidenceKind(item['kind']), location=item['location'], detail=item['detail'])
                    for item in finding['evidence']
                ),
            )
            for finding in payload['findings']
        ),
    )


def deserialize(data):
    """Rebuild a Report, list of Reports, FleetMatrix or ScanResult from JSON."""
    try:
        document = json.loads(data)
    except ValueError as exc:
        raise ReportError(f'not a JSON document: {exc}') from exc
    if document.get('schema_version') != SCHEMA_VERSION:
        raise ReportError(f'unsupported schema_version {document.get("schema_version")!r}')

    kind = document.get('kind')
    try:
        if kind == Kind.REPORT:
            return _report_from(document)
        if kind == Kind.BATCH:
            return [_report_from(item) for item in document['reports']]
        if kind == Kind.FLEET_MATRIX:
            return _matrix_from(document)
        if kind == Kind.SCAN_RESULT:
            return _result_from(document)
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportError(f'malformed {kind} document: {exc}') from exc
    raise ReportError(f'unknown document kind {kind!r}')


# Text


def _report_text(report):
    return render_to_string('reports/report.txt', {
        'report': report,
        'generated_at': report.generated_at.isoformat(),
        'rule_count': len(RuleId),
    })


def _matrix_grid(matrix):
    label_width = max(len(f'{rule} {rule.label}') for rule in matrix.rules)
    widths = [max(len(app), 7) for app in matrix.apps]

    def line(label, cells):
        return '  '.join([label.ljust(label_width)] + [str(cell).rjust(width) for cell, width in zip(cells, widths)])

    grid = [line('Vulnerability', matrix.apps)]
    grid.append('-' * len(grid[0]))
    for position, rule in enumerate(matrix.rules):
        grid.append(line(f'{rule} {rule.label}', ['YES' if row[position] else 'no' for row in matrix.cells]))
    grid.append('-' * len(grid[0]))
    grid.append(line('Total', matrix.totals))
    grid.append(line('Percentage', [f'{value:.2f}%' for value in matrix.percentages]))
    return grid


def _matrix_text(matrix):
    return render_to_string('reports/matrix.txt', {
        'matrix': matrix,
        'grid': _matrix_grid(matrix),
        'rule_count': len(matrix.rules),
    })


def _result_text(result):
    lines = [str(result)]
    for finding in result.findings:
        lines.append(f'[{finding.severity.label.capitalize()}] {finding.rule} {finding.title}')
        lines.extend(f'    {item}' for item in finding.evidence)
    return '\n'.join(lines) + '\n'


def serialize(obj, fmt=Format.TEXT):
    """Encode obj in the requested format. A list means a batch of reports."""
    fmt = Format(fmt)
    if isinstance(obj, (list, tuple)):
        reports = list(obj)
        if fmt == Format.JSON:
            return _json(Kind.BATCH, {'reports': [_report_payload(report) for report in reports]})
        if fmt == Format.CSV:
            return reports_export_csv(reports).encode('utf-8')
        return '\n'.join(_report_text(report) for report in reports).encode('utf-8')

    if isinstance(obj, Report):
        if fmt == Format.JSON:
            return _json(Kind.REPORT, _report_payload(obj))
        if fmt == Format.CSV:
            return reports_export_csv([obj]).encode('utf-8')
        return _report_text(obj).encode('utf-8')

    if isinstance(obj, FleetMatrix):
        if fmt == Format.JSON:
            return _json(Kind.FLEET_MATRIX, _matrix_payload(obj))
        if fmt == Format.CSV:
            return matrix_export_csv(obj).encode('utf-8')
        return _matrix_text(obj).encode('utf-8')

    if isinstance(obj, ScanResult):
        if fmt == Format.JSON:
            return _json(Kind.SCAN_RESULT, _result_payload(obj))
        if fmt == Format.CSV:
            raise ReportError('scan results have no CSV form; render a report first')
        return _result_text(obj).encode('utf-8')

    raise ReportError(f'cannot serialize {type(obj).__name__}')
