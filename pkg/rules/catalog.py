"""Fixed per-rule metadata: severity, vector title, category, rule shape."""

from dataclasses import dataclass

from .models import RuleId, Severity


@dataclass(frozen=True)
class RuleEntry:
    rule: RuleId
    severity: Severity
    title: str
    category: str
    absence: bool = False


CATALOG = {
    entry.rule: entry for entry in (
        RuleEntry(RuleId.R01, Severity.CRITICAL, 'Implicit Service Checking', 'Implicit_Intent'),
        RuleEntry(RuleId.R02, Severity.CRITICAL, 'AndroidManifest "intent-filter" Settings Checking', 'Manifest'),
        RuleEntry(RuleId.R03, Severity.CRITICAL, 'AndroidManifest ContentProvider Exported Checking', 'Manifest'),
        RuleEntry(RuleId.R04, Severity.CRITICAL, 'WebView RCE Vulnerability Checking', 'WebView'),
        RuleEntry(RuleId.R05, Severity.WARNING, 'Getting IMEI and Device ID', 'Sensitive_Information'),
        RuleEntry(RuleId.R06, Severity.CRITICAL,
                  'AndroidManifest Normal ProtectionLevel of Permission Checking', 'Permission'),
        RuleEntry(RuleId.R07, Severity.WARNING, 'WebView Local File Access Attacks Checking', 'WebView'),
        RuleEntry(RuleId.R08, Severity.WARNING, 'WebView Potential XSS Attacks Checking', 'WebView'),
        RuleEntry(RuleId.R09, Severity.NOTICE, 'Executing "root" or System Privilege Checking', 'Command',
                  absence=True),
        RuleEntry(RuleId.R10, Severity.WARNING, 'AndroidManifest Adb Backup Checking', 'Manifest'),
        RuleEntry(RuleId.R11, Severity.NOTICE, 'File Unsafe Delete Checking', 'File'),
        RuleEntry(RuleId.R12, Severity.NOTICE, 'Getting Signature Code Checking', 'Signature', absence=True),
        RuleEntry(RuleId.R13, Severity.NOTICE, 'Code Setting Preventing Screenshot Capturing',
                  'Sensitive_Information', absence=True),
        RuleEntry(RuleId.R14, Severity.NOTICE, 'APK Installing Source Checking', 'Hacker', absence=True),
    )
}

ABSENCE_RULES = frozenset(rule for rule, entry in CATALOG.items() if entry.absence)


def entry_for(rule):
    return CATALOG[RuleId(rule)]
