"""
Rule evaluation.

Each check is a plain function of a ScanInput registered against its RuleId.
Presence rules emit one Finding per flagged construct; absence rules emit a
single Finding whose only evidence describes the search that came up empty.
Code queries always run over the union of every DEX image in the APK.
"""

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor

from django.conf import settings

from apk.dex import DEFAULT_LOOKBACK, MatchMode, invocations_of, literal_reaching, string_pool_matches
from apk.models import ProtectionLevel, TriState

from .catalog import CATALOG
from .models import Evidence, EvidenceKind, Finding, RuleId, ScanResult

logger = logging.getLogger(__name__)

INTENT = 'Landroid/content/Intent;'
STRING = 'Ljava/lang/String;'
URI = 'Landroid/net/Uri;'
# Intent(String action) and Intent(String action, Uri data) name no component.
IMPLICIT_INTENT_SHAPES = ((STRING,), (STRING, URI))
SERVICE_STARTERS = ('startService', 'bindService')

WEBVIEW = 'Landroid/webkit/WebView;'
WEB_SETTINGS = 'Landroid/webkit/WebSettings;'
WEBVIEW_TYPES = (WEBVIEW, WEB_SETTINGS)

ROOT_MARKERS = ('/system/xbin/su', '/system/bin/su', 'test-keys', 'superuser')
ROOT_MARKERS_EXACT = ('su',)
RUNTIME = 'Ljava/lang/Runtime;'

SIGNATURE = 'Landroid/content/pm/Signature;'
PACKAGE_MANAGER = 'Landroid/content/pm/PackageManager;'
WINDOW = 'Landroid/view/Window;'
FLAG_SECURE = 0x2000

ANY_OWNER = 'L*'


class RuleRegistry:
    """Maps each RuleId to the function that evaluates it."""

    def __init__(self):
        self._checks = {}

    def register(self, rule):
        def decorator(func):
            self._checks[RuleId(rule)] = func
            return func
        return decorator

    def __getitem__(self, rule):
        return self._checks[RuleId(rule)]

    def __contains__(self, rule):
        return rule in self._checks

    def __len__(self):
        return len(self._checks)


registry = RuleRegistry()


def _lookback():
    return getattr(settings, 'SCAN_LITERAL_LOOKBACK', DEFAULT_LOOKBACK)


def _finding(rule, *evidence):
    entry = CATALOG[rule]
    return Finding(
        rule=rule,
        severity=entry.severity,
        title=entry.title,
        category=entry.category,
        evidence=tuple(evidence),
    )


def _sites(scan, owner_pattern, method_name):
    for dex in scan.dexes:
        for site in invocations_of(dex, owner_pattern, method_name):
            yield dex, site


def _literal(dex, site):
    body = dex.body_of(site)
    return literal_reaching(site, body, _lookback()) if body is not None else None


def _searched(scan):
    return ', '.join(scan.dex_names) or f'{len(scan.dexes)} DEX image(s)'


def _component_path(component):
    return f'manifest/application/{component.kind}[@name={component.name}]'


@registry.register(RuleId.R01)
def implicit_service_intent(scan):
    findings = []
    for dex in scan.dexes:
        by_method = defaultdict(list)
        for site in dex.invocations():
            by_method[site.caller_index].append(site)
        for sites in by_method.values():
            builds_implicit = any(
                site.callee.owner == INTENT and site.callee.name == '<init>'
                and site.callee.parameters in IMPLICIT_INTENT_SHAPES
                for site in sites
            )
            starts = [site for site in sites if site.callee.name in SERVICE_STARTERS]
            if builds_implicit and starts:
                findings.append(_finding(RuleId.R01, *(Evidence.from_site(site) for site in starts)))
    return findings


@registry.register(RuleId.R02)
def intent_filter_without_action(scan):
    findings = []
    for component in scan.manifest.components:
        for index, intent_filter in enumerate(component.intent_filters):
            if not intent_filter.actions:
                findings.append(_finding(RuleId.R02, Evidence(
                    kind=EvidenceKind.MANIFEST,
                    location=f'{_component_path(component)}/intent-filter[{index}]',
                    detail='no <action> declared',
                )))
    return findings


@registry.register(RuleId.R03)
def exposed_content_provider(scan):
    findings = []
    target_sdk = scan.manifest.target_sdk
    for provider in scan.manifest.providers:
        if not provider.effective_exported(target_sdk):
            continue
        if provider.permission or (provider.read_permission and provider.write_permission):
            continue
        how = 'explicitly' if provider.exported == TriState.TRUE else f'by default (targetSdk {target_sdk})'
        findings.append(_finding(RuleId.R03, Evidence(
            kind=EvidenceKind.MANIFEST,
            location=_component_path(provider),
            detail=f'exported {how} without android:permission',
        )))
    return findings


def _flag_each_call(rule, scan, owner, method):
    return [_finding(rule, Evidence.from_site(site)) for _, site in _sites(scan, owner, method)]


@registry.register(RuleId.R04)
def javascript_interface(scan):
    return _flag_each_call(RuleId.R04, scan, WEBVIEW, 'addJavascriptInterface')


@registry.register(RuleId.R05)
def device_id_access(scan):
    return _flag_each_call(RuleId.R05, scan, 'Landroid/telephony/TelephonyManager;', 'getDeviceId')


@registry.register(RuleId.R06)
def normal_protection_level(scan):
    return [
        _finding(RuleId.R06, Evidence(
            kind=EvidenceKind.MANIFEST,
            location=f'manifest/permission[@name={permission.name}]',
            detail=f'protectionLevel={permission.protection_level}',
        ))
        for permission in scan.manifest.declared_permissions
        if permission.protection_level in (ProtectionLevel.NORMAL, ProtectionLevel.UNSET)
    ]


@registry.register(RuleId.R07)
def webview_file_access(scan):
    findings = []
    disabled = False
    for dex, site in _sites(scan, WEB_SETTINGS, 'setAllowFileAccess'):
        literal = _literal(dex, site)
        if literal == 1:
            findings.append(_finding(RuleId.R07, Evidence.from_site(site)))
        elif literal == 0:
            disabled = True

    # WebView allows file:// access unless told otherwise.
    if not disabled:
        for dex in scan.dexes:
            referenced = [name for name in WEBVIEW_TYPES if dex.references_type(name)]
            if referenced:
                findings.append(_finding(RuleId.R07, Evidence(
                    kind=EvidenceKind.TYPE_REFERENCE,
                    location=f'{dex.name}: {referenced[0]}',
                    detail='file access is enabled by default and never disabled',
                )))
                break
    return findings


@registry.register(RuleId.R08)
def webview_javascript_enabled(scan):
    return [
        _finding(RuleId.R08, Evidence.from_site(site))
        for dex, site in _sites(scan, WEB_SETTINGS, 'setJavaScriptEnabled')
        if _literal(dex, site) == 1
    ]


@registry.register(RuleId.R09)
def missing_root_check(scan):
    for dex in scan.dexes:
        if string_pool_matches(dex, ROOT_MARKERS, MatchMode.SUBSTRING):
            return []
        if string_pool_matches(dex, ROOT_MARKERS_EXACT, MatchMode.EXACT):
            return []
    if any(True for _ in _sites(scan, RUNTIME, 'exec')):
        return []
    markers = ', '.join(f'"{marker}"' for marker in ROOT_MARKERS_EXACT + ROOT_MARKERS)
    return [_finding(RuleId.R09, Evidence.absence(
        f'no root-check string ({markers}) and no {RUNTIME}->exec call in {_searched(scan)}'
    ))]


@registry.register(RuleId.R10)
def adb_backup_allowed(scan):
    allow_backup = scan.manifest.application.allow_backup
    if allow_backup == TriState.FALSE:
        return []
    detail = 'allowBackup="true"' if allow_backup == TriState.TRUE else 'allowBackup unset (defaults to true)'
    return [_finding(RuleId.R10, Evidence(
        kind=EvidenceKind.MANIFEST,
        location='manifest/application',
        detail=detail,
    ))]


@registry.register(RuleId.R11)
def unsafe_file_delete(scan):
    return _flag_each_call(RuleId.R11, scan, 'Ljava/io/File;', 'delete')


@registry.register(RuleId.R12)
def missing_signature_check(scan):
    if any(dex.references_type(SIGNATURE) for dex in scan.dexes):
        return []
    if any(True for _ in _sites(scan, ANY_OWNER, 'getPackageInfo')):
        return []
    return [_finding(RuleId.R12, Evidence.absence(
        f'no reference to {SIGNATURE} and no getPackageInfo call in {_searched(scan)}'
    ))]


@registry.register(RuleId.R13)
def screenshots_allowed(scan):
    for method in ('setFlags', 'addFlags'):
        for dex, site in _sites(scan, WINDOW, method):
            literal = _literal(dex, site)
            if literal is not None and literal & FLAG_SECURE:
                return []
    return [_finding(RuleId.R13, Evidence.absence(
        f'no {WINDOW}->setFlags/addFlags call with FLAG_SECURE (0x2000) in {_searched(scan)}'
    ))]


@registry.register(RuleId.R14)
def missing_installer_check(scan):
    if any(True for _ in _sites(scan, PACKAGE_MANAGER, 'getInstallerPackageName')):
        return []
    return [_finding(RuleId.R14, Evidence.absence(
        f'no {PACKAGE_MANAGER}->getInstallerPackageName call in {_searched(scan)}'
    ))]


def evaluate_rule(rule, scan):
    """Run one rule; returns a (possibly empty) list of Findings."""
    rule = RuleId(rule)
    findings = registry[rule](scan)
    logger.debug('%s %s: %d finding(s)', scan.apk_name, rule, len(findings))
    return findings


def run_all_rules(scan, workers=None):
    """Evaluate every rule in RuleId order and fold the findings into a ScanResult."""
    rules = list(RuleId)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_rule = list(pool.map(lambda rule: evaluate_rule(rule, scan), rules))
    else:
        per_rule = [evaluate_rule(rule, scan) for rule in rules]
    findings = [finding for findings in per_rule for finding in findings]
    return ScanResult.from_findings(scan.apk_name, findings, manifest=scan.manifest, dex_names=scan.dex_names)
