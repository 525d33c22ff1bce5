"""Build a ManifestModel from a decoded AXML document."""

import logging

from .axml import ANDROID_NS, ValueType
from .exceptions import MissingPackageName, NotAManifest
from .models import (
    ApplicationAttrs,
    ComponentDecl,
    ComponentKind,
    IntentFilterDecl,
    ManifestModel,
    PermissionDecl,
    ProtectionLevel,
    TriState,
)

logger = logging.getLogger(__name__)

COMPONENT_TAGS = {
    'activity': ComponentKind.ACTIVITY,
    'activity-alias': ComponentKind.ACTIVITY,
    'service': ComponentKind.SERVICE,
    'receiver': ComponentKind.RECEIVER,
    'provider': ComponentKind.PROVIDER,
}

# Base values of the android:protectionLevel flag attribute.
PROTECTION_LEVELS = {
    0: ProtectionLevel.NORMAL,
    1: ProtectionLevel.DANGEROUS,
    2: ProtectionLevel.SIGNATURE,
    3: ProtectionLevel.SIGNATURE_OR_SYSTEM,
}
PROTECTION_BASE_MASK = 0xF

DATA_ATTRIBUTES = ('scheme', 'host', 'port', 'path', 'pathPrefix', 'pathPattern', 'mimeType')


def _text(element, name, namespace=ANDROID_NS):
    """String value of an attribute, or None when absent or not a string."""
    attribute = element.attribute(name, namespace)
    if attribute is None or attribute.value_type != ValueType.STRING:
        return None
    return attribute.string or None


def _integer(element, name):
    attribute = element.attribute(name)
    if attribute is None:
        return None
    if attribute.value_type == ValueType.STRING:
        value = (attribute.string or '').strip()
        return int(value) if value.isascii() and value.isdigit() else None
    if attribute.value_type in (ValueType.INT_DEC, ValueType.INT_HEX):
        return attribute.value
    return None


def _tristate(element, name):
    attribute = element.attribute(name)
    if attribute is None:
        return TriState.UNSET
    if attribute.value_type == ValueType.INT_BOOLEAN:
        return TriState.from_bool(attribute.data != 0)
    if attribute.value_type == ValueType.STRING and attribute.string in ('true', 'false'):
        return TriState.from_bool(attribute.string == 'true')
    if attribute.value_type == ValueType.REFERENCE:
        logger.warning('<%s android:%s> is a resource reference; treating it as unset',
                       element.name, name)
    return TriState.UNSET


def _protection_level(element):
    attribute = element.attribute('protectionLevel')
    if attribute is None:
        return ProtectionLevel.UNSET
    if attribute.value_type in (ValueType.INT_DEC, ValueType.INT_HEX):
        level = PROTECTION_LEVELS.get(attribute.data & PROTECTION_BASE_MASK)
    elif attribute.value_type == ValueType.STRING:
        base = (attribute.string or '').split('|')[0].strip()
        level = base if base in ProtectionLevel.values and base != ProtectionLevel.UNSET else None
    else:
        level = None
    if level is None:
        logger.warning('unrecognised protectionLevel on permission %s', _text(element, 'name'))
        return ProtectionLevel.UNSET
    return ProtectionLevel(level)


def _qualify(name, package):
    if name.startswith('.'):
        return package + name
    if '.' not in name:
        return f'{package}.{name}'
    return name


def _intent_filter(element):
    data_specs = []
    for data in element.find_all('data'):
        parts = [f'{key}={_text(data, key)}' for key in DATA_ATTRIBUTES if _text(data, key)]
        if parts:
            data_specs.append(' '.join(parts))
    return IntentFilterDecl(
        actions=tuple(filter(None, (_text(child, 'name') for child in element.find_all('action')))),
        categories=tuple(filter(None, (_text(child, 'name') for child in element.find_all('category')))),
        data_specs=tuple(data_specs),
    )


def _component(element, package):
    name = _text(element, 'name')
    if not name:
        logger.warning('<%s> without android:name ignored', element.name)
        return None
    return ComponentDecl(
        kind=COMPONENT_TAGS[element.name],
        name=_qualify(name, package),
        exported=_tristate(element, 'exported'),
        permission=_text(element, 'permission'),
        intent_filters=tuple(_intent_filter(child) for child in element.find_all('intent-filter')),
        read_permission=_text(element, 'readPermission'),
        write_permission=_text(element, 'writePermission'),
    )


def build_manifest_model(document):
    """Map the decoded manifest tree onto a ManifestModel."""
    root = document.root
    if root.name != 'manifest':
        raise NotAManifest(f'root element is <{root.name}>, expected <manifest>')
    package = _text(root, 'package', namespace=None)
    if not package:
        raise MissingPackageName('<manifest> has no package attribute')

    min_sdk = target_sdk = None
    for uses_sdk in root.find_all('uses-sdk'):
        min_sdk = _integer(uses_sdk, 'minSdkVersion')
        target_sdk = _integer(uses_sdk, 'targetSdkVersion')

    application = ApplicationAttrs()
    components = []
    for app in root.find_all('application'):
        application = ApplicationAttrs(
            allow_backup=_tristate(app, 'allowBackup'),
            debuggable=_tristate(app, 'debuggable'),
        )
        for child in app.children:
            if child.name in COMPONENT_TAGS:
                component = _component(child, package)
                if component is not None:
                    components.append(component)

    permissions = []
    for element in root.find_all('permission'):
        name = _text(element, 'name')
        if name:
            permissions.append(PermissionDecl(name=name, protection_level=_protection_level(element)))

    requested = tuple(
        name for name in (_text(element, 'name') for element in root.find_all('uses-permission'))
        if name
    )

    return ManifestModel(
        package_name=package,
        min_sdk=min_sdk,
        target_sdk=target_sdk,
        application=application,
        components=tuple(components),
        declared_permissions=tuple(permissions),
        requested_permissions=requested,
    )
