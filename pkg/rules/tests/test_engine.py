from django.test import SimpleTestCase, override_settings

from apk.dex import parse_dex
from apk.models import (
    ApplicationAttrs,
    ComponentDecl,
    ComponentKind,
    IntentFilterDecl,
    ManifestModel,
    PermissionDecl,
    ProtectionLevel,
    TriState,
)
from fixture_builder.builder import build
from fixture_builder.dex_writer import (
    Const,
    ConstClass,
    ConstString,
    DexWriter,
    Invoke,
    MethodDef,
    MethodKey,
    ReturnVoid,
)
from fixture_builder.profiles import bank_fleet, rule_corpus
from rules.catalog import ABSENCE_RULES, CATALOG
from rules.engine import evaluate_rule, registry, run_all_rules
from rules.models import EvidenceKind, RuleId, ScanInput, Severity
from scanner.pipeline import scan_bytes

FLEET_VECTORS = {
    'starling-like': {'R10', 'R11', 'R13'},
    'monese-like': {'R01', 'R04', 'R05', 'R07', 'R08', 'R11', 'R13'},
    'atom-like': {'R07', 'R08', 'R09', 'R11', 'R14'},
    'transferwise-like': {'R05', 'R07', 'R08', 'R09', 'R11'},
    'monzo-like': {'R07', 'R09', 'R11', 'R13', 'R14'},
    'revolut-like': {'R01', 'R02', 'R03', 'R06', 'R07', 'R09', 'R11', 'R12', 'R13', 'R14'},
}

WINDOW = 'Landroid/view/Window;'
WEB_SETTINGS = 'Landroid/webkit/WebSettings;'


def dex_with(*code, name='classes.dex'):
    writer = DexWriter().add_class('Lcom/example/Main;', [MethodDef('run', tuple(code) + (ReturnVoid(),))])
    return parse_dex(writer.to_bytes(), name=name)


def scan_input(manifest=None, dexes=None):
    manifest = manifest or ManifestModel(
        package_name='com.example', target_sdk=30, application=ApplicationAttrs(allow_backup=TriState.FALSE),
    )
    dexes = tuple(dexes or (dex_with(),))
    return ScanInput(manifest=manifest, dexes=dexes, apk_name='t.apk', dex_names=tuple(d.name for d in dexes))


def scan_fixture(profile):
    return scan_bytes(build(profile).apk, f'{profile.name}.apk')


class RuleOracleTests(SimpleTestCase):
    def test_positive_and_negative_fixture_per_rule(self):
        for profile in rule_corpus():
            result = scan_fixture(profile)
            with self.subTest(profile=profile.name):
                self.assertEqual(set(result.vulnerable_rules), set(profile.positive_rules))

    def test_fleet_reproduces_table(self):
        for profile in bank_fleet():
            result = scan_fixture(profile)
            with self.subTest(profile=profile.name):
                self.assertEqual({rule.value for rule in result.vulnerable_rules}, FLEET_VECTORS[profile.name])
                self.assertEqual(result.total, len(FLEET_VECTORS[profile.name]))

    def test_findings_carry_catalog_metadata(self):
        for profile in bank_fleet():
            for finding in scan_fixture(profile).findings:
                entry = CATALOG[finding.rule]
                self.assertEqual((finding.severity, finding.title, finding.category),
                                 (entry.severity, entry.title, entry.category))
                self.assertEqual(finding.is_absence, finding.rule in ABSENCE_RULES)


class RegistryTests(SimpleTestCase):
    def test_every_rule_registered(self):
        self.assertEqual(len(registry), len(RuleId))
        for rule in RuleId:
            self.assertIn(rule, registry)

    def test_parallel_matches_serial(self):
        scan = scan_input()
        self.assertEqual(run_all_rules(scan), run_all_rules(scan, workers=4))

    def test_rule_vector_order(self):
        result = run_all_rules(scan_input())
        self.assertEqual(len(result.rule_vector), 14)
        self.assertEqual(result.vulnerable_rules, [RuleId.R09, RuleId.R12, RuleId.R13, RuleId.R14])
        self.assertEqual([finding.rule for finding in result.findings], result.vulnerable_rules)

    def test_scan_input_needs_a_dex(self):
        with self.assertRaises(ValueError):
            ScanInput(manifest=None, dexes=(), apk_name='empty.apk')


class ManifestRuleTests(SimpleTestCase):
    def manifest(self, **kwargs):
        defaults = dict(package_name='com.example', target_sdk=30,
                        application=ApplicationAttrs(allow_backup=TriState.FALSE))
        defaults.update(kwargs)
        return ManifestModel(**defaults)

    def test_r02_one_finding_per_empty_filter(self):
        service = ComponentDecl(kind=ComponentKind.SERVICE, name='com.example.S',
                                intent_filters=(IntentFilterDecl(), IntentFilterDecl(actions=('a',)), IntentFilterDecl()))
        findings = evaluate_rule(RuleId.R02, scan_input(self.manifest(components=(service,))))
        self.assertEqual(len(findings), 2)
        self.assertTrue(findings[0].evidence[0].location.endswith('intent-filter[0]'))

    def test_r03_provider_gating(self):
        cases = [
            (ComponentDecl(kind=ComponentKind.PROVIDER, name='p', exported=TriState.TRUE), 1),
            (ComponentDecl(kind=ComponentKind.PROVIDER, name='p', exported=TriState.TRUE, permission='x'), 0),
            (ComponentDecl(kind=ComponentKind.PROVIDER, name='p', exported=TriState.TRUE,
                           read_permission='r', write_permission='w'), 0),
            (ComponentDecl(kind=ComponentKind.PROVIDER, name='p', exported=TriState.TRUE, read_permission='r'), 1),
            (ComponentDecl(kind=ComponentKind.PROVIDER, name='p', exported=TriState.FALSE), 0),
            (ComponentDecl(kind=ComponentKind.PROVIDER, name='p'), 0),
        ]
        for provider, expected in cases:
            with self.subTest(provider=provider):
                findings = evaluate_rule(RuleId.R03, scan_input(self.manifest(components=(provider,))))
                self.assertEqual(len(findings), expected)

    def test_r03_default_export_below_sdk_17(self):
        provider = ComponentDecl(kind=ComponentKind.PROVIDER, name='p')
        findings = evaluate_rule(RuleId.R03, scan_input(self.manifest(target_sdk=16, components=(provider,))))
        self.assertEqual(len(findings), 1)
        self.assertIn('by default', findings[0].evidence[0].detail)

    def test_r06_levels(self):
        permissions = tuple(
            PermissionDecl(name=f'p.{level}', protection_level=level) for level in ProtectionLevel
        )
        findings = evaluate_rule(RuleId.R06, scan_input(self.manifest(declared_permissions=permissions)))
        flagged = {finding.evidence[0].detail for finding in findings}
        self.assertEqual(flagged, {'protectionLevel=normal', 'protectionLevel=unset'})

    def test_r10_tristate(self):
        for value, expected in ((TriState.TRUE, 1), (TriState.UNSET, 1), (TriState.FALSE, 0)):
            manifest = self.manifest(application=ApplicationAttrs(allow_backup=value))
            with self.subTest(allow_backup=value):
                self.assertEqual(len(evaluate_rule(RuleId.R10, scan_input(manifest))), expected)


class CodeRuleTests(SimpleTestCase):
    def test_r01_needs_implicit_intent_and_service_start_in_one_method(self):
        intent = 'Landroid/content/Intent;'
        start = Invoke('virtual', MethodKey('Landroid/content/Context;', 'startService', (intent,),
                                            'Landroid/content/ComponentName;'), (1, 0))
        implicit = dex_with(
            Invoke('direct', MethodKey(intent, '<init>', ('Ljava/lang/String;', 'Landroid/net/Uri;')), (0, 2, 3)),
            start,
        )
        explicit = dex_with(
            Invoke('direct', MethodKey(intent, '<init>', ('Landroid/content/Context;', 'Ljava/lang/Class;')),
                   (0, 2, 3)),
            start,
        )
        self.assertEqual(len(evaluate_rule(RuleId.R01, scan_input(dexes=[implicit]))), 1)
        self.assertEqual(evaluate_rule(RuleId.R01, scan_input(dexes=[explicit])), [])

    def test_r07_default_when_webview_used_without_disabling(self):
        referenced = dex_with(ConstClass(0, WEB_SETTINGS))
        findings = evaluate_rule(RuleId.R07, scan_input(dexes=[referenced]))
        self.assertEqual(len(findings), 1)
        self.assertEqual(findings[0].evidence[0].kind, EvidenceKind.TYPE_REFERENCE)

        disabled = dex_with(Const(0, 0), Const(1, 0),
                            Invoke('virtual', MethodKey(WEB_SETTINGS, 'setAllowFileAccess', ('Z',)), (0, 1)))
        self.assertEqual(evaluate_rule(RuleId.R07, scan_input(dexes=[disabled])), [])

    def test_r08_only_literal_true(self):
        call = MethodKey(WEB_SETTINGS, 'setJavaScriptEnabled', ('Z',))
        dex = dex_with(
            Const(0, 0), Const(1, 1), Invoke('virtual', call, (0, 1)),
            Const(1, 0), Invoke('virtual', call, (0, 1)),
        )
        self.assertEqual(len(evaluate_rule(RuleId.R08, scan_input(dexes=[dex]))), 1)

    def test_r09_exact_su_string(self):
        self.assertEqual(evaluate_rule(RuleId.R09, scan_input(dexes=[dex_with(ConstString(0, 'su'))])), [])
        findings = evaluate_rule(RuleId.R09, scan_input(dexes=[dex_with(ConstString(0, 'sudo'))]))
        self.assertEqual(len(findings), 1)
        self.assertEqual(findings[0].evidence[0].kind, EvidenceKind.ABSENCE)

    def test_r13_flag_secure_bit(self):
        set_flags = MethodKey(WINDOW, 'setFlags', ('I', 'I'))
        for value, expected in ((0x2000, 0), (0x2000 | 0x80, 0), (8192, 0), (0x80, 1)):
            dex = dex_with(Const(0, 0), Const(1, value), Invoke('virtual', set_flags, (0, 1, 1)))
            with self.subTest(value=value):
                self.assertEqual(len(evaluate_rule(RuleId.R13, scan_input(dexes=[dex]))), expected)

    def test_r13_lookback_setting(self):
        add_flags = MethodKey(WINDOW, 'addFlags', ('I',))
        padding = [ConstString(2, f'pad{n}') for n in range(3)]
        dex = dex_with(Const(0, 0), Const(1, 0x2000), *padding, Invoke('virtual', add_flags, (0, 1)))
        self.assertEqual(evaluate_rule(RuleId.R13, scan_input(dexes=[dex])), [])
        with override_settings(SCAN_LITERAL_LOOKBACK=2):
            self.assertEqual(len(evaluate_rule(RuleId.R13, scan_input(dexes=[dex]))), 1)

    def test_multidex_union(self):
        installer = dex_with(
            Const(0, 0),
            Invoke('virtual', MethodKey('Landroid/content/pm/PackageManager;', 'getInstallerPackageName',
                                        ('Ljava/lang/String;',), 'Ljava/lang/String;'), (0, 0)),
            name='classes2.dex',
        )
        scan = scan_input(dexes=[dex_with(), installer])
        self.assertEqual(evaluate_rule(RuleId.R14, scan), [])
        self.assertEqual(len(evaluate_rule(RuleId.R14, scan_input(dexes=[dex_with()]))), 1)

    def test_absence_evidence_names_searched_dex(self):
        (finding,) = evaluate_rule(RuleId.R12, scan_input())
        self.assertIn('classes.dex', finding.evidence[0].location)
        self.assertEqual(finding.severity, Severity.NOTICE)
