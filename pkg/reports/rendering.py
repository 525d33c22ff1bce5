"""
Turn scan results into reports and fleet matrices.

A report section joins a finding with the knowledge base: threat, background
and the developer countermeasure. Sections run from the most severe finding
down, ties broken by rule order. The six user countermeasures close every
report as an appendix.
"""

import logging
from decimal import ROUND_HALF_UP, Decimal

from django.utils import timezone

from rules.knowledge import knowledge_base
from rules.models import RuleId

from .exceptions import DuplicateAppName, EmptyFleet
from .models import FleetMatrix, Report, ReportSection

logger = logging.getLogger(__name__)

CENT = Decimal('0.01')


def percentage(total, count=len(RuleId)):
    """Share of rules flagged, rounded half-up to two decimals: 3 of 14 is 21.43."""
    return (Decimal(100 * total) / Decimal(count)).quantize(CENT, rounding=ROUND_HALF_UP)


def _section(finding, kb):
    threat = kb.threat_for(finding.rule)
    return ReportSection(
        rule=finding.rule,
        title=finding.title,
        evidence=tuple(str(item) for item in finding.evidence),
        severity=finding.severity.label,
        category=finding.category,
        background=kb.background_for(finding.rule),
        recommendation=kb.countermeasure_for(finding.rule).developer_action,
        threat_name=threat.threat_name,
        threat_description=threat.description,
    )


def render_report(result, kb=None, generated_at=None):
    kb = kb or knowledge_base()
    findings = sorted(result.findings, key=lambda finding: (-finding.severity, finding.rule.position))
    sections = tuple(_section(finding, kb) for finding in findings)
    if generated_at is None:
        generated_at = timezone.now()
    return Report(
        apk_name=result.apk_name,
        generated_at=generated_at.replace(microsecond=0),
        sections=sections,
        appendix=tuple(item.text for item in kb.user_countermeasures),
        package_name=result.package_name,
        min_sdk=result.min_sdk,
        target_sdk=result.target_sdk,
        dex_names=tuple(result.dex_names),
    )


def app_label(apk_name):
    """Fleet column name: the APK file name without its extension."""
    return apk_name[:-4] if apk_name.lower().endswith('.apk') else apk_name


def build_fleet_matrix(results):
    """One row per scan result, in the order given."""
    results = list(results)
    if not results:
        raise EmptyFleet('a fleet matrix needs at least one scan result')

    apps = tuple(app_label(result.apk_name) for result in results)
    duplicates = sorted({app for app in apps if apps.count(app) > 1})
    if duplicates:
        raise DuplicateAppName(f'{", ".join(duplicates)} appears more than once in the fleet')

    totals = tuple(sum(result.rule_vector) for result in results)
    matrix = FleetMatrix(
        apps=apps,
        cells=tuple(tuple(result.rule_vector) for result in results),
        totals=totals,
        percentages=tuple(percentage(total) for total in totals),
    )
    logger.info('fleet matrix built for %d apps', len(results))
    return matrix
