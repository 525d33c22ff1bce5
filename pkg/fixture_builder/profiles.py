"""
Fixture profiles: which vulnerabilities a synthetic APK should exhibit and the
manifest/code knobs that produce them.

expected_rules() is the implication table from knobs to flagged rules. The
builder refuses to emit a profile whose declared positive_rules disagree with
it, so every fixture doubles as an oracle for the rule engine.
"""

from dataclasses import dataclass, field
from typing import Optional

from django.db import models

from apk.models import ProtectionLevel, PROVIDER_DEFAULT_EXPORT_SDK, TriState
from rules.models import RuleId


class InconsistentProfile(ValueError):
    pass


class CodeMarker(models.TextChoices):
    IMPLICIT_SERVICE_INTENT = 'implicit_service_intent', 'Intent(String) passed to startService'
    EXPLICIT_SERVICE_INTENT = 'explicit_service_intent', 'Intent(Context, Class) passed to startService'
    ADD_JAVASCRIPT_INTERFACE = 'add_javascript_interface', 'WebView.addJavascriptInterface call'
    GET_DEVICE_ID = 'get_device_id', 'TelephonyManager.getDeviceId call'
    FILE_ACCESS_ENABLED = 'file_access_enabled', 'WebSettings.setAllowFileAccess(true)'
    FILE_ACCESS_DISABLED = 'file_access_disabled', 'WebSettings.setAllowFileAccess(false)'
    JAVASCRIPT_ENABLED = 'javascript_enabled', 'WebSettings.setJavaScriptEnabled(true)'
    JAVASCRIPT_DISABLED = 'javascript_disabled', 'WebSettings.setJavaScriptEnabled(false)'
    ROOT_CHECK_STRINGS = 'root_check_strings', 'su binary paths and test-keys strings'
    RUNTIME_EXEC = 'runtime_exec', 'Runtime.exec call'
    SIGNATURE_CHECK = 'signature_check', 'getPackageInfo plus Signature reference'
    FLAG_SECURE = 'flag_secure', 'Window.addFlags(FLAG_SECURE)'
    INSTALLER_CHECK = 'installer_check', 'PackageManager.getInstallerPackageName call'
    FILE_DELETE = 'file_delete', 'one File.delete call'
    FILE_DELETE_REPEATED = 'file_delete_repeated', 'two File.delete calls in one method'


# Markers whose code references WebView or WebSettings.
WEBVIEW_MARKERS = frozenset((
    CodeMarker.ADD_JAVASCRIPT_INTERFACE,
    CodeMarker.FILE_ACCESS_ENABLED,
    CodeMarker.FILE_ACCESS_DISABLED,
    CodeMarker.JAVASCRIPT_ENABLED,
    CodeMarker.JAVASCRIPT_DISABLED,
))


class IntentFilterKnob(models.TextChoices):
    NONE = 'none', 'no intent filters'
    WITH_ACTION = 'with_action', 'launcher activity filter with an action'
    EMPTY = 'empty', 'service filter without any action'


class ProviderKnob(models.TextChoices):
    NONE = 'none', 'no provider'
    PRIVATE = 'private', 'exported="false"'
    PROTECTED = 'protected', 'exported="true" with android:permission'
    OPEN = 'open', 'exported="true" without permission'
    IMPLICIT = 'implicit', 'exported unset (default depends on targetSdk)'


@dataclass(frozen=True)
class ManifestKnobs:
    allow_backup: TriState = TriState.FALSE
    intent_filter: IntentFilterKnob = IntentFilterKnob.NONE
    provider: ProviderKnob = ProviderKnob.NONE
    # None means no <permission> element is declared.
    permission_level: Optional[ProtectionLevel] = None
    min_sdk: int = 21
    target_sdk: int = 30


@dataclass(frozen=True)
class FixtureProfile:
    name: str
    positive_rules: frozenset = frozenset()
    manifest: ManifestKnobs = field(default_factory=ManifestKnobs)
    code: frozenset = frozenset()
    dex_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'positive_rules', frozenset(RuleId(rule) for rule in self.positive_rules))
        object.__setattr__(self, 'code', frozenset(CodeMarker(marker) for marker in self.code))

    @property
    def package_name(self):
        return f'fixture.{self.name}'

    def expected_rules(self):
        """Rules the knobs imply; the table the rule engine must agree with."""
        knobs, code = self.manifest, self.code
        flagged = set()
        if CodeMarker.IMPLICIT_SERVICE_INTENT in code:
            flagged.add(RuleId.R01)
        if knobs.intent_filter == IntentFilterKnob.EMPTY:
            flagged.add(RuleId.R02)
        if knobs.provider == ProviderKnob.OPEN or (
            knobs.provider == ProviderKnob.IMPLICIT and knobs.target_sdk < PROVIDER_DEFAULT_EXPORT_SDK
        ):
            flagged.add(RuleId.R03)
        if CodeMarker.ADD_JAVASCRIPT_INTERFACE in code:
            flagged.add(RuleId.R04)
        if CodeMarker.GET_DEVICE_ID in code:
            flagged.add(RuleId.R05)
        if knobs.permission_level in (ProtectionLevel.NORMAL, ProtectionLevel.UNSET):
            flagged.add(RuleId.R06)
        if CodeMarker.FILE_ACCESS_ENABLED in code or (
            code & WEBVIEW_MARKERS and CodeMarker.FILE_ACCESS_DISABLED not in code
        ):
            flagged.add(RuleId.R07)
        if CodeMarker.JAVASCRIPT_ENABLED in code:
            flagged.add(RuleId.R08)
        if not code & {CodeMarker.ROOT_CHECK_STRINGS, CodeMarker.RUNTIME_EXEC}:
            flagged.add(RuleId.R09)
        if knobs.allow_backup in (TriState.TRUE, TriState.UNSET):
            flagged.add(RuleId.R10)
        if code & {CodeMarker.FILE_DELETE, CodeMarker.FILE_DELETE_REPEATED}:
            flagged.add(RuleId.R11)
        if CodeMarker.SIGNATURE_CHECK not in code:
            flagged.add(RuleId.R12)
        if CodeMarker.FLAG_SECURE not in code:
            flagged.add(RuleId.R13)
        if CodeMarker.INSTALLER_CHECK not in code:
            flagged.add(RuleId.R14)
        return frozenset(flagged)

    def validate(self):
        if self.dex_count < 1:
            raise InconsistentProfile(f'{self.name}: dex_count must be at least 1')
        if self.manifest.min_sdk > self.manifest.target_sdk:
            raise InconsistentProfile(f'{self.name}: minSdk {self.manifest.min_sdk} exceeds targetSdk')
        expected = self.expected_rules()
        if expected != self.positive_rules:
            missing = sorted(self.positive_rules - expected)
            extra = sorted(expected - self.positive_rules)
            raise InconsistentProfile(
                f'{self.name}: knobs do not produce the declared rules '
                f'(declared but not produced: {missing or "-"}; produced but not declared: {extra or "-"})'
            )
        return self


def for_rules(name, positive_rules, dex_count=1):
    """Derive knobs that flag exactly positive_rules, turning every defence on otherwise."""
    positive = frozenset(RuleId(rule) for rule in positive_rules)

    def pick(rule, vulnerable, hardened):
        return vulnerable if rule in positive else hardened

    manifest = ManifestKnobs(
        allow_backup=pick(RuleId.R10, TriState.TRUE, TriState.FALSE),
        intent_filter=pick(RuleId.R02, IntentFilterKnob.EMPTY, IntentFilterKnob.WITH_ACTION),
        provider=pick(RuleId.R03, ProviderKnob.OPEN, ProviderKnob.PROTECTED),
        permission_level=pick(RuleId.R06, ProtectionLevel.NORMAL, ProtectionLevel.SIGNATURE),
    )
    code = {
        pick(RuleId.R01, CodeMarker.IMPLICIT_SERVICE_INTENT, CodeMarker.EXPLICIT_SERVICE_INTENT),
        pick(RuleId.R07, CodeMarker.FILE_ACCESS_ENABLED, CodeMarker.FILE_ACCESS_DISABLED),
        pick(RuleId.R08, CodeMarker.JAVASCRIPT_ENABLED, CodeMarker.JAVASCRIPT_DISABLED),
    }
    for rule, marker in (
        (RuleId.R04, CodeMarker.ADD_JAVASCRIPT_INTERFACE),
        (RuleId.R05, CodeMarker.GET_DEVICE_ID),
        (RuleId.R11, CodeMarker.FILE_DELETE),
    ):
        if rule in positive:
            code.add(marker)
    for rule, marker in (
        (RuleId.R09, CodeMarker.ROOT_CHECK_STRINGS),
        (RuleId.R12, CodeMarker.SIGNATURE_CHECK),
        (RuleId.R13, CodeMarker.FLAG_SECURE),
        (RuleId.R14, CodeMarker.INSTALLER_CHECK),
    ):
        if rule not in positive:
            code.add(marker)
    return FixtureProfile(name=name, positive_rules=positive, manifest=manifest, code=frozenset(code),
                          dex_count=dex_count)


def clean_baseline():
    return for_rules('clean', ())


def bank_fleet():
    """The six banking apps, knob by knob, as they scan in the fleet table."""
    return [
        FixtureProfile(
            name='starling-like',
            positive_rules={RuleId.R10, RuleId.R11, RuleId.R13},
            manifest=ManifestKnobs(
                allow_backup=TriState.UNSET,
                intent_filter=IntentFilterKnob.WITH_ACTION,
                provider=ProviderKnob.PRIVATE,
                permission_level=ProtectionLevel.SIGNATURE,
            ),
            code={
                CodeMarker.EXPLICIT_SERVICE_INTENT,
                CodeMarker.FILE_DELETE,
                CodeMarker.ROOT_CHECK_STRINGS,
                CodeMarker.SIGNATURE_CHECK,
                CodeMarker.INSTALLER_CHECK,
            },
        ),
        FixtureProfile(
            name='monese-like',
            positive_rules={RuleId.R01, RuleId.R04, RuleId.R05, RuleId.R07, RuleId.R08, RuleId.R11, RuleId.R13},
            manifest=ManifestKnobs(
                allow_backup=TriState.FALSE,
                intent_filter=IntentFilterKnob.WITH_ACTION,
                provider=ProviderKnob.PROTECTED,
                permission_level=ProtectionLevel.SIGNATURE_OR_SYSTEM,
            ),
            code={
                CodeMarker.IMPLICIT_SERVICE_INTENT,
                CodeMarker.ADD_JAVASCRIPT_INTERFACE,
                CodeMarker.GET_DEVICE_ID,
                CodeMarker.JAVASCRIPT_ENABLED,
                CodeMarker.FILE_DELETE_REPEATED,
                CodeMarker.RUNTIME_EXEC,
                CodeMarker.SIGNATURE_CHECK,
                CodeMarker.INSTALLER_CHECK,
            },
            dex_count=2,
        ),
        FixtureProfile(
            name='atom-like',
            positive_rules={RuleId.R07, RuleId.R08, RuleId.R09, RuleId.R11, RuleId.R14},
            manifest=ManifestKnobs(
                allow_backup=TriState.FALSE,
                intent_filter=IntentFilterKnob.NONE,
                provider=ProviderKnob.IMPLICIT,
            ),
            code={
                CodeMarker.EXPLICIT_SERVICE_INTENT,
                CodeMarker.FILE_ACCESS_ENABLED,
                CodeMarker.JAVASCRIPT_ENABLED,
                CodeMarker.FILE_DELETE,
                CodeMarker.SIGNATURE_CHECK,
                CodeMarker.FLAG_SECURE,
            },
        ),
        FixtureProfile(
            name='transferwise-like',
            positive_rules={RuleId.R05, RuleId.R07, RuleId.R08, RuleId.R09, RuleId.R11},
            manifest=ManifestKnobs(
                allow_backup=TriState.FALSE,
                intent_filter=IntentFilterKnob.WITH_ACTION,
                provider=ProviderKnob.PRIVATE,
                permission_level=ProtectionLevel.SIGNATURE,
            ),
            code={
                CodeMarker.GET_DEVICE_ID,
                CodeMarker.FILE_ACCESS_ENABLED,
                CodeMarker.JAVASCRIPT_ENABLED,
                CodeMarker.FILE_DELETE,
                CodeMarker.SIGNATURE_CHECK,
                CodeMarker.FLAG_SECURE,
                CodeMarker.INSTALLER_CHECK,
            },
            dex_count=2,
        ),
        FixtureProfile(
            name='monzo-like',
            positive_rules={RuleId.R07, RuleId.R09, RuleId.R11, RuleId.R13, RuleId.R14},
            manifest=ManifestKnobs(
                allow_backup=TriState.FALSE,
                intent_filter=IntentFilterKnob.WITH_ACTION,
                provider=ProviderKnob.PROTECTED,
                permission_level=ProtectionLevel.SIGNATURE,
            ),
            code={
                CodeMarker.FILE_ACCESS_ENABLED,
                CodeMarker.JAVASCRIPT_DISABLED,
                CodeMarker.FILE_DELETE,
                CodeMarker.SIGNATURE_CHECK,
            },
        ),
        FixtureProfile(
            name='revolut-like',
            positive_rules={
                RuleId.R01, RuleId.R02, RuleId.R03, RuleId.R06, RuleId.R07,
                RuleId.R09, RuleId.R11, RuleId.R12, RuleId.R13, RuleId.R14,
            },
            manifest=ManifestKnobs(
                allow_backup=TriState.FALSE,
                intent_filter=IntentFilterKnob.EMPTY,
                provider=ProviderKnob.IMPLICIT,
                permission_level=ProtectionLevel.UNSET,
                min_sdk=16,
                target_sdk=16,
            ),
            code={
                CodeMarker.IMPLICIT_SERVICE_INTENT,
                CodeMarker.FILE_ACCESS_ENABLED,
                CodeMarker.JAVASCRIPT_DISABLED,
                CodeMarker.FILE_DELETE,
            },
        ),
    ]


def rule_corpus():
    """One positive and one negative fixture per rule, 28 in all."""
    corpus = []
    for rule in RuleId:
        slug = rule.value.lower()
        corpus.append(for_rules(f'{slug}-positive', {rule}))
        corpus.append(for_rules(f'{slug}-negative', set(RuleId) - {rule}))
    return corpus
