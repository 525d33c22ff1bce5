from dataclasses import dataclass
from typing import Optional

from django.db import models


class RuleId(models.TextChoices):
    """The fourteen banking-app checks, in fleet-matrix row order."""
    R01 = 'R01', 'Implicit intent for service'
    R02 = 'R02', 'Misconfiguration of intent-filters'
    R03 = 'R03', 'Content Provider access from other apps on the device'
    R04 = 'R04', 'Remote code execution'
    R05 = 'R05', 'Getting IMEI and Device ID'
    R06 = 'R06', 'Normal protection-level of permission'
    R07 = 'R07', 'Local file system access'
    R08 = 'R08', 'Webview JavaScript enabled'
    R09 = 'R09', "Not executing 'root' or system privilege checks"
    R10 = 'R10', 'ADB backup'
    R11 = 'R11', 'File unsafe deleting'
    R12 = 'R12', 'Not checking Package signature code'
    R13 = 'R13', 'Allowing screenshot capturing'
    R14 = 'R14', 'Not checking APK installer sources'

    @property
    def position(self):
        return list(RuleId).index(self)


class Severity(models.IntegerChoices):
    CRITICAL = 4, 'critical'
    WARNING = 3, 'warning'
    NOTICE = 2, 'notice'
    INFO = 1, 'info'

    @classmethod
    def from_label(cls, label):
        for member in cls:
            if member.label == str(label).strip().lower():
                return member
        raise ValueError(f'unknown severity {label!r}; expected one of {", ".join(cls.labels)}')


class EvidenceKind(models.TextChoices):
    MANIFEST = 'manifest', 'Manifest element'
    INVOCATION = 'invocation', 'Call site'
    TYPE_REFERENCE = 'type', 'Type reference'
    ABSENCE = 'absence', 'Absence'


@dataclass(frozen=True)
class Evidence:
    """Where a finding was observed: a manifest path, a call site, or an exhaustive search."""
    kind: EvidenceKind
    location: str
    detail: str = ''

    def __str__(self):
        if self.kind == EvidenceKind.ABSENCE:
            return f'absence: {self.location}'
        if self.detail:
            return f'{self.location} ({self.detail})'
        return self.location

    @classmethod
    def from_site(cls, site):
        owner, name = site.caller
        return cls(
            kind=EvidenceKind.INVOCATION,
            location=f'{owner}->{name}',
            detail=f'{site.dex_name} @0x{site.offset:04x} calls {site.callee}',
        )

    @classmethod
    def absence(cls, searched):
        return cls(kind=EvidenceKind.ABSENCE, location=searched)


@dataclass(frozen=True)
class Finding:
    """One detected weakness."""
    rule: RuleId
    severity: Severity
    title: str
    category: str
    evidence: tuple

    def __post_init__(self):
        if not self.evidence:
            raise ValueError(f'{self.rule} finding without evidence')

    @property
    def is_absence(self):
        return any(item.kind == EvidenceKind.ABSENCE for item in self.evidence)

    @property
    def threat(self):
        from .knowledge import threat_for
        return threat_for(self.rule)

    @property
    def countermeasure(self):
        from .knowledge import countermeasure_for
        return countermeasure_for(self.rule)


@dataclass(frozen=True)
class ScanInput:
    manifest: object
    dexes: tuple
    apk_name: str
    dex_names: tuple = ()

    def __post_init__(self):
        if not self.dexes:
            raise ValueError(f'{self.apk_name}: a scan needs at least one DEX image')


@dataclass(frozen=True)
class ScanResult:
    apk_name: str
    findings: tuple
    rule_vector: tuple
    package_name: str = ''
    min_sdk: Optional[int] = None
    target_sdk: Optional[int] = None
    dex_names: tuple = ()

    @classmethod
    def from_findings(cls, apk_name, findings, manifest=None, dex_names=()):
        findings = tuple(sorted(findings, key=lambda finding: finding.rule.position))
        hit = {finding.rule for finding in findings}
        return cls(
            apk_name=apk_name,
            findings=findings,
            rule_vector=tuple(rule in hit for rule in RuleId),
            package_name=getattr(manifest, 'package_name', ''),
            min_sdk=getattr(manifest, 'min_sdk', None),
            target_sdk=getattr(manifest, 'target_sdk', None),
            dex_names=tuple(dex_names),
        )

    @property
    def vulnerable_rules(self):
        return [rule for rule, flagged in zip(RuleId, self.rule_vector) if flagged]

    @property
    def total(self):
        return sum(self.rule_vector)

    def meets(self, threshold):
        """True when at least one finding is at or above the threshold severity."""
        if threshold is None:
            return False
        return any(finding.severity >= threshold for finding in self.findings)

    def __str__(self):
        return f'{self.apk_name}: {self.total}/{len(RuleId)} rules flagged'
