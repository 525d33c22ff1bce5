"""
Assemble fixture APKs from profiles.

The manifest is encoded with axml_writer, code with dex_writer, and both are
zipped with fixed timestamps so identical profiles give identical bytes.
"""

import hashlib
import io
import logging
import zipfile
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from apk.archive import MANIFEST_NAME
from apk.axml import ValueType
from apk.models import ProtectionLevel, TriState

from .axml_writer import Attr, Node, encode_axml
from .dex_writer import DexWriter
from .markers import marker_method
from .profiles import IntentFilterKnob, ProviderKnob

logger = logging.getLogger(__name__)

ZIP_DATE_TIME = (2021, 1, 1, 0, 0, 0)
MAIN_ACTION = 'android.intent.action.MAIN'
LAUNCHER_CATEGORY = 'android.intent.category.LAUNCHER'

# protectionLevel flag values as aapt encodes them.
PROTECTION_LEVEL_VALUES = {
    ProtectionLevel.NORMAL: 0,
    ProtectionLevel.DANGEROUS: 1,
    ProtectionLevel.SIGNATURE: 2,
    ProtectionLevel.SIGNATURE_OR_SYSTEM: 3,
}


@dataclass(frozen=True)
class BuiltFixture:
    """APK bytes plus what the builder knows went into them."""
    profile: object
    apk: bytes
    manifest: bytes
    dexes: tuple
    invocation_targets: dict
    payload_sha256: dict

    @property
    def dex_names(self):
        return [name for name, _ in self.dexes]

    @property
    def all_invocation_targets(self):
        return frozenset().union(*self.invocation_targets.values())


def dex_entry_name(number):
    return 'classes.dex' if number == 1 else f'classes{number}.dex'


def class_descriptor(profile, number=1):
    slug = profile.name.replace('-', '_').replace('.', '_')
    suffix = '' if number == 1 else str(number)
    return f'Lfixture/{slug}/ScanTarget{suffix};'


def manifest_tree(profile):
    """The manifest a profile's knobs describe, as a Node tree."""
    knobs = profile.manifest
    package = profile.package_name
    permission_name = f'{package}.permission.SYNC'

    components = []
    if knobs.intent_filter in (IntentFilterKnob.WITH_ACTION, IntentFilterKnob.EMPTY):
        components.append(Node('activity', (Attr('name', '.MainActivity'), Attr('exported', True)), (
            Node('intent-filter', (), (
                Node('action', (Attr('name', MAIN_ACTION),)),
                Node('category', (Attr('name', LAUNCHER_CATEGORY),)),
            )),
        )))
    else:
        components.append(Node('activity', (Attr('name', '.MainActivity'), Attr('exported', False))))
    if knobs.intent_filter == IntentFilterKnob.EMPTY:
        components.append(Node('service', (Attr('name', '.SyncService'),), (
            Node('intent-filter'),
        )))

    if knobs.provider != ProviderKnob.NONE:
        attrs = [Attr('name', '.DataProvider'), Attr('authorities', f'{package}.provider')]
        if knobs.provider == ProviderKnob.PRIVATE:
            attrs.append(Attr('exported', False))
        elif knobs.provider in (ProviderKnob.PROTECTED, ProviderKnob.OPEN):
            attrs.append(Attr('exported', True))
        if knobs.provider == ProviderKnob.PROTECTED:
            attrs.append(Attr('permission', permission_name))
        components.append(Node('provider', tuple(attrs)))

    application_attrs = [Attr('label', profile.name)]
    if knobs.allow_backup != TriState.UNSET:
        application_attrs.append(Attr('allowBackup', knobs.allow_backup == TriState.TRUE))

    children = [
        Node('uses-sdk', (Attr('minSdkVersion', knobs.min_sdk), Attr('targetSdkVersion', knobs.target_sdk))),
        Node('uses-permission', (Attr('name', 'android.permission.INTERNET'),)),
    ]
    if knobs.permission_level is not None:
        attrs = [Attr('name', permission_name)]
        if knobs.permission_level != ProtectionLevel.UNSET:
            attrs.append(Attr('protectionLevel', PROTECTION_LEVEL_VALUES[knobs.permission_level],
                              value_type=ValueType.INT_HEX))
        children.append(Node('permission', tuple(attrs)))
    children.append(Node('application', tuple(application_attrs), tuple(components)))

    return Node('manifest', (
        Attr('versionCode', 1),
        Attr('versionName', '1.0'),
        Attr('package', package, namespace=None),
    ), tuple(children))


def dex_writers(profile):
    """Spread the profile's markers round-robin over dex_count DEX files."""
    markers = sorted(profile.code)
    writers = []
    for number in range(1, profile.dex_count + 1):
        descriptor = class_descriptor(profile, number)
        methods = [
            marker_method(marker, profile.package_name, descriptor)
            for marker in markers[number - 1::profile.dex_count]
        ]
        writer = DexWriter()
        writer.add_class(descriptor, methods)
        writers.append(writer)
    return writers


def _zip(entries):
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, 'w') as archive:
        for name, payload, method in entries:
            info = zipfile.ZipInfo(name, date_time=ZIP_DATE_TIME)
            info.compress_type = method
            info.create_system = 0
            info.external_attr = 0
            archive.writestr(info, payload)
    return buffer.getvalue()


@lru_cache(maxsize=None)
def build(profile):
    """Validate the profile and emit its APK together with the oracle data."""
    profile.validate()
    manifest = encode_axml(manifest_tree(profile))
    writers = dex_writers(profile)
    dexes = tuple((dex_entry_name(number), writer.to_bytes()) for number, writer in enumerate(writers, 1))

    entries = [(MANIFEST_NAME, manifest, zipfile.ZIP_DEFLATED)]
    entries.extend((name, payload, zipfile.ZIP_STORED) for name, payload in dexes)
    apk = _zip(entries)

    payload_sha256 = {name: hashlib.sha256(payload).hexdigest() for name, payload, _ in entries}
    logger.debug('built fixture %s (%d bytes, %d dex)', profile.name, len(apk), len(dexes))
    return BuiltFixture(
        profile=profile,
        apk=apk,
        manifest=manifest,
        dexes=dexes,
        invocation_targets={
            name: writer.invocation_targets() for (name, _), writer in zip(dexes, writers)
        },
        payload_sha256=payload_sha256,
    )


def build_fixture(profile):
    """APK bytes for a profile. Raises InconsistentProfile for contradictory knobs."""
    return build(profile).apk


def write_fixture(profile, directory):
    path = Path(directory) / f'{profile.name}.apk'
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(build_fixture(profile))
    return path
