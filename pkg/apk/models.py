from dataclasses import dataclass, field
from typing import Optional

from django.db import models

# Providers stopped being exported by default in API 17 (Android 4.2).
PROVIDER_DEFAULT_EXPORT_SDK = 17


class TriState(models.TextChoices):
    TRUE = 'true', 'true'
    FALSE = 'false', 'false'
    UNSET = 'unset', 'unset'

    @classmethod
    def from_bool(cls, value):
        if value is None:
            return cls.UNSET
        return cls.TRUE if value else cls.FALSE


class ComponentKind(models.TextChoices):
    ACTIVITY = 'activity', 'Activity'
    SERVICE = 'service', 'Service'
    RECEIVER = 'receiver', 'Receiver'
    PROVIDER = 'provider', 'Provider'


class ProtectionLevel(models.TextChoices):
    NORMAL = 'normal', 'normal'
    DANGEROUS = 'dangerous', 'dangerous'
    SIGNATURE = 'signature', 'signature'
    SIGNATURE_OR_SYSTEM = 'signatureOrSystem', 'signatureOrSystem'
    UNSET = 'unset', 'unset'


@dataclass(frozen=True)
class IntentFilterDecl:
    actions: tuple = ()
    categories: tuple = ()
    data_specs: tuple = ()


@dataclass(frozen=True)
class ComponentDecl:
    """An activity, service, receiver or provider declared in the manifest."""
    kind: ComponentKind
    name: str
    exported: TriState = TriState.UNSET
    permission: Optional[str] = None
    intent_filters: tuple = ()
    read_permission: Optional[str] = None
    write_permission: Optional[str] = None

    def effective_exported(self, target_sdk=None):
        """
        Resolve android:exported the way the platform does.

        An explicit value wins. Otherwise providers are exported when the
        target SDK is below 17 (or unknown), and the other kinds are
        exported exactly when they declare an intent filter.
        """
        if self.exported != TriState.UNSET:
            return self.exported == TriState.TRUE
        if self.kind == ComponentKind.PROVIDER:
            return target_sdk is None or target_sdk < PROVIDER_DEFAULT_EXPORT_SDK
        return bool(self.intent_filters)


@dataclass(frozen=True)
class PermissionDecl:
    name: str
    protection_level: ProtectionLevel = ProtectionLevel.UNSET


@dataclass(frozen=True)
class ApplicationAttrs:
    allow_backup: TriState = TriState.UNSET
    debuggable: TriState = TriState.UNSET


@dataclass(frozen=True)
class ManifestModel:
    """Structured view of AndroidManifest.xml."""
    package_name: str
    min_sdk: Optional[int] = None
    target_sdk: Optional[int] = None
    application: ApplicationAttrs = field(default_factory=ApplicationAttrs)
    components: tuple = ()
    declared_permissions: tuple = ()
    requested_permissions: tuple = ()

    def components_of(self, kind):
        return [component for component in self.components if component.kind == kind]

    @property
    def providers(self):
        return self.components_of(ComponentKind.PROVIDER)
