from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from typing import Optional

from rules.models import RuleId

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ReportSection:
    """One flagged rule as a human reads it."""
    rule: RuleId
    title: str
    evidence: tuple
    severity: str
    category: str
    background: str
    recommendation: str
    threat_name: str = ''
    threat_description: str = ''

    REQUIRED = ('title', 'evidence', 'severity', 'category', 'background', 'recommendation')

    @property
    def is_complete(self):
        return all(getattr(self, name) for name in self.REQUIRED)

    @property
    def severity_tag(self):
        return self.severity.capitalize()

    @property
    def rule_label(self):
        return RuleId(self.rule).label


@dataclass(frozen=True)
class Report:
    apk_name: str
    generated_at: datetime
    sections: tuple
    appendix: tuple
    package_name: str = ''
    min_sdk: Optional[int] = None
    target_sdk: Optional[int] = None
    dex_names: tuple = ()
    schema_version: int = SCHEMA_VERSION

    @property
    def flagged_rules(self):
        return [section.rule for section in self.sections]

    @property
    def rule_total(self):
        return len(set(self.flagged_rules))

    def __str__(self):
        return f'Report for {self.apk_name} ({len(self.sections)} sections)'


@dataclass(frozen=True)
class MatrixRow:
    app: str
    cells: tuple
    total: int
    percentage: Decimal


@dataclass(frozen=True)
class FleetMatrix:
    """Apps by rules. cells[a][r] is True when app a is vulnerable to rule r."""
    apps: tuple
    cells: tuple
    totals: tuple
    percentages: tuple
    rules: tuple = field(default=tuple(RuleId))
    schema_version: int = SCHEMA_VERSION

    def rows(self):
        for app, cells, total, percentage in zip(self.apps, self.cells, self.totals, self.percentages):
            yield MatrixRow(app=app, cells=cells, total=total, percentage=percentage)

    def column(self, rule):
        position = self.rules.index(RuleId(rule))
        return [cells[position] for cells in self.cells]
