import csv
import io

SECTION_FIELDS = [
    'rule',
    'severity',
    'category',
    'title',
    'evidence',
    'threat_name',
    'background',
    'recommendation',
]

EVIDENCE_SEPARATOR = ' | '


def _value(obj, field):
    # Nested attributes use __ notation.
    value = obj
    for part in field.split('__'):
        value = getattr(value, part, '')
    if isinstance(value, (tuple, list)):
        return EVIDENCE_SEPARATOR.join(str(item) for item in value)
    return value


def export_to_csv(rows, fields, header=None, prefix=()):
    """
    Generic function to export objects to CSV text.

    Args:
        rows: iterable of objects to export
        fields: attribute names per column, __ for nested attributes
        header: column titles, defaults to the field names
        prefix: constant leading cells written before every row

    Returns:
        list of CSV rows, header first
    """
    table = [list(header or fields)]
    for obj in rows:
        table.append(list(prefix) + [_value(obj, field) for field in fields])
    return table


def write_csv(table):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerows(table)
    return buffer.getvalue()


def report_table(report):
    return export_to_csv(
        report.sections,
        SECTION_FIELDS,
        header=['App'] + SECTION_FIELDS,
        prefix=(report.apk_name,),
    )


def reports_export_csv(reports):
    """Sections of one or more reports under a single header."""
    table = [['App'] + SECTION_FIELDS]
    for report in reports:
        table.extend(report_table(report)[1:])
    return write_csv(table)


def matrix_export_csv(matrix):
    table = [['App'] + [rule.label for rule in matrix.rules] + ['Total', 'Percentage']]
    for row in matrix.rows():
        table.append(
            [row.app]
            + ['YES' if cell else 'no' for cell in row.cells]
            + [row.total, f'{row.percentage:.2f}']
        )
    return write_csv(table)

