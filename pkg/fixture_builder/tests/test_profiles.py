import hashlib
import io
import tempfile
import zipfile
from pathlib import Path

from django.core.management import call_command
from django.test import SimpleTestCase, override_settings

from apk.models import ProtectionLevel, TriState
from fixture_builder.builder import build, build_fixture, class_descriptor, dex_entry_name
from fixture_builder.golden import all_profiles, current_hashes, load_golden, write_golden
from fixture_builder.profiles import (
    CodeMarker,
    FixtureProfile,
    InconsistentProfile,
    IntentFilterKnob,
    ManifestKnobs,
    ProviderKnob,
    clean_baseline,
    for_rules,
    bank_fleet,
    rule_corpus,
)
from rules.models import RuleId


class ProfileTests(SimpleTestCase):
    def test_every_shipped_profile_is_consistent(self):
        for profile in all_profiles():
            with self.subTest(profile=profile.name):
                self.assertIs(profile.validate(), profile)

    def test_corpus_shape(self):
        corpus = rule_corpus()
        self.assertEqual(len(corpus), 28)
        self.assertEqual(len({profile.name for profile in corpus}), 28)
        for rule in RuleId:
            slug = rule.value.lower()
            positive = {profile.name: profile for profile in corpus}[f'{slug}-positive']
            negative = {profile.name: profile for profile in corpus}[f'{slug}-negative']
            self.assertEqual(positive.positive_rules, {rule})
            self.assertEqual(negative.positive_rules, set(RuleId) - {rule})

    def test_contradictory_knobs(self):
        profile = FixtureProfile(
            name='liar',
            positive_rules={RuleId.R10},
            manifest=ManifestKnobs(allow_backup=TriState.FALSE),
        )
        with self.assertRaisesMessage(InconsistentProfile, 'liar'):
            profile.validate()
        with self.assertRaises(InconsistentProfile):
            build_fixture(profile)

    def test_sdk_and_dex_count_checks(self):
        with self.assertRaises(InconsistentProfile):
            FixtureProfile(name='sdk', manifest=ManifestKnobs(min_sdk=30, target_sdk=21)).validate()
        with self.assertRaises(InconsistentProfile):
            for_rules('nodex', (), dex_count=0).validate()

    def test_provider_default_depends_on_target_sdk(self):
        old = ManifestKnobs(provider=ProviderKnob.IMPLICIT, min_sdk=16, target_sdk=16)
        new = ManifestKnobs(provider=ProviderKnob.IMPLICIT)
        self.assertIn(RuleId.R03, FixtureProfile(name='old', manifest=old).expected_rules())
        self.assertNotIn(RuleId.R03, FixtureProfile(name='new', manifest=new).expected_rules())

    def test_webview_use_without_file_access_call(self):
        profile = FixtureProfile(name='web', code={CodeMarker.JAVASCRIPT_DISABLED})
        self.assertIn(RuleId.R07, profile.expected_rules())

    def test_clean_baseline(self):
        profile = clean_baseline()
        self.assertEqual(profile.positive_rules, frozenset())
        self.assertEqual(profile.manifest.permission_level, ProtectionLevel.SIGNATURE)
        self.assertEqual(profile.manifest.intent_filter, IntentFilterKnob.WITH_ACTION)


class BuilderTests(SimpleTestCase):
    def test_archive_layout(self):
        fixture = build(bank_fleet()[1])
        with zipfile.ZipFile(io.BytesIO(fixture.apk)) as archive:
            self.assertEqual(archive.namelist(), ['AndroidManifest.xml', 'classes.dex', 'classes2.dex'])
            self.assertIsNone(archive.testzip())
            self.assertEqual(archive.read('classes2.dex'), fixture.dexes[1][1])

    def test_names(self):
        self.assertEqual([dex_entry_name(number) for number in (1, 2, 3)],
                         ['classes.dex', 'classes2.dex', 'classes3.dex'])
        self.assertEqual(class_descriptor(clean_baseline()), 'Lfixture/clean/ScanTarget;')

    def test_oracle_reflects_markers(self):
        targets = build(for_rules('deleter', {RuleId.R11})).all_invocation_targets
        self.assertIn(('Ljava/io/File;', 'delete'), targets)
        self.assertNotIn(('Ljava/io/File;', 'delete'), build(clean_baseline()).all_invocation_targets)

    def test_bytes_are_deterministic(self):
        for profile in bank_fleet():
            with self.subTest(profile=profile.name):
                self.assertEqual(build.__wrapped__(profile).apk, build_fixture(profile))

    def test_payload_digests(self):
        fixture = build(clean_baseline())
        self.assertEqual(fixture.payload_sha256['classes.dex'],
                         hashlib.sha256(fixture.dexes[0][1]).hexdigest())

    def test_golden_digests(self):
        golden = load_golden()
        current = current_hashes()
        self.assertEqual(set(golden), set(current),
                         'golden digests are missing or stale; run manage.py build_fixtures --write-golden')
        for name in current:
            with self.subTest(fixture=name):
                self.assertEqual(current[name], golden[name])

    def test_write_golden(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'golden.json'
            hashes = write_golden(path, bank_fleet())
            self.assertEqual(load_golden(path), hashes)
            self.assertEqual(set(hashes), {profile.name for profile in bank_fleet()})


class BuildFixturesCommandTests(SimpleTestCase):
    def test_writes_fleet_and_corpus(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = io.StringIO()
            call_command('build_fixtures', output=tmp, stdout=out)
            root = Path(tmp)
            self.assertEqual(len(list((root / 'fleet').glob('*.apk'))), 6)
            self.assertEqual(len(list((root / 'corpus').glob('*.apk'))), 28)
            self.assertEqual((root / 'fleet' / 'monzo-like.apk').read_bytes(),
                             build_fixture(bank_fleet()[4]))
            self.assertIn('Fixture build completed successfully', out.getvalue())

    def test_fleet_only_uses_setting(self):
        with tempfile.TemporaryDirectory() as tmp:
            with override_settings(FIXTURE_OUTPUT_DIR=Path(tmp)):
                call_command('build_fixtures', fleet_only=True, stdout=io.StringIO())
            self.assertTrue((Path(tmp) / 'fleet' / 'starling-like.apk').exists())
            self.assertFalse((Path(tmp) / 'corpus').exists())
