import io
import warnings
import zipfile

from django.test import SimpleTestCase

from apk.archive import MANIFEST_NAME, archive_from_bytes, dex_entry_names, read_entry
from apk.exceptions import (
    ApkError,
    CrcMismatch,
    DuplicateEntry,
    EntryNotFound,
    MissingManifest,
    NoDexEntries,
    NotAZip,
    ParseError,
    UnsupportedCompressionMethod,
)
from fixture_builder.builder import build
from fixture_builder.profiles import clean_baseline

DEX_PAYLOAD = b'dex\n035\x00' + bytes(range(200))


def make_zip(entries, method=zipfile.ZIP_STORED):
    buffer = io.BytesIO()
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        with zipfile.ZipFile(buffer, 'w') as archive:
            for entry in entries:
                name, payload = entry[:2]
                info = zipfile.ZipInfo(name, date_time=(2021, 1, 1, 0, 0, 0))
                info.compress_type = entry[2] if len(entry) > 2 else method
                archive.writestr(info, payload)
    return buffer.getvalue()


class ArchiveFromBytesTests(SimpleTestCase):
    def setUp(self):
        self.fixture = build(clean_baseline())

    def test_fixture_entries(self):
        archive = archive_from_bytes(self.fixture.apk, 'clean.apk')
        self.assertEqual(archive.names, [MANIFEST_NAME, 'classes.dex'])
        self.assertIn(MANIFEST_NAME, archive)
        self.assertEqual(len(archive), 2)
        self.assertEqual(archive.source_path, 'clean.apk')

    def test_payloads_match_builder(self):
        archive = archive_from_bytes(self.fixture.apk)
        self.assertEqual(read_entry(archive, MANIFEST_NAME), self.fixture.manifest)
        self.assertEqual(read_entry(archive, 'classes.dex'), self.fixture.dexes[0][1])

    def test_prepended_bytes_are_tolerated(self):
        archive = archive_from_bytes(b'#!/bin/sh\n' * 12 + self.fixture.apk)
        self.assertEqual(read_entry(archive, MANIFEST_NAME), self.fixture.manifest)

    def test_not_a_zip(self):
        with self.assertRaises(NotAZip):
            archive_from_bytes(b'hello')
        with self.assertRaises(NotAZip):
            archive_from_bytes(bytes(256))

    def test_truncated_archive(self):
        with self.assertRaises(ApkError):
            archive_from_bytes(self.fixture.apk[:len(self.fixture.apk) // 2])

    def test_missing_manifest(self):
        with self.assertRaises(MissingManifest):
            archive_from_bytes(make_zip([('classes.dex', DEX_PAYLOAD)]))

    def test_no_dex_entries(self):
        with self.assertRaises(NoDexEntries):
            archive_from_bytes(make_zip([(MANIFEST_NAME, b'manifest'), ('lib/classes.dex.txt', b'x')]))

    def test_duplicate_entry(self):
        data = make_zip([(MANIFEST_NAME, b'a'), (MANIFEST_NAME, b'b'), ('classes.dex', DEX_PAYLOAD)])
        with self.assertRaises(DuplicateEntry):
            archive_from_bytes(data)

    def test_errors_share_one_root(self):
        for error in (NotAZip, MissingManifest, CrcMismatch, EntryNotFound):
            self.assertTrue(issubclass(error, ParseError))


class ReadEntryTests(SimpleTestCase):
    def test_entry_not_found_is_a_key_error(self):
        archive = archive_from_bytes(make_zip([(MANIFEST_NAME, b'm'), ('classes.dex', DEX_PAYLOAD)]))
        with self.assertRaises(EntryNotFound):
            read_entry(archive, 'resources.arsc')
        with self.assertRaises(KeyError):
            read_entry(archive, 'resources.arsc')

    def test_deflated_entry(self):
        archive = archive_from_bytes(make_zip(
            [(MANIFEST_NAME, b'm' * 500), ('classes.dex', DEX_PAYLOAD)], method=zipfile.ZIP_DEFLATED,
        ))
        self.assertEqual(read_entry(archive, MANIFEST_NAME), b'm' * 500)
        self.assertEqual(read_entry(archive, 'classes.dex'), DEX_PAYLOAD)

    def test_crc_mismatch(self):
        data = bytearray(make_zip([(MANIFEST_NAME, b'm'), ('classes.dex', DEX_PAYLOAD)]))
        position = data.find(DEX_PAYLOAD)
        data[position + 100] ^= 0xFF
        archive = archive_from_bytes(bytes(data))
        with self.assertRaises(CrcMismatch):
            read_entry(archive, 'classes.dex')

    def test_unsupported_compression_method(self):
        archive = archive_from_bytes(make_zip([
            (MANIFEST_NAME, b'm'),
            ('classes.dex', DEX_PAYLOAD),
            ('assets/blob.bin', b'z' * 64, zipfile.ZIP_BZIP2),
        ]))
        with self.assertRaises(UnsupportedCompressionMethod):
            read_entry(archive, 'assets/blob.bin')


class DexEntryNamesTests(SimpleTestCase):
    def test_numeric_order(self):
        archive = archive_from_bytes(make_zip([
            (MANIFEST_NAME, b'm'),
            ('classes10.dex', DEX_PAYLOAD),
            ('classes2.dex', DEX_PAYLOAD),
            ('classes.dex', DEX_PAYLOAD),
            ('classes3.dex', DEX_PAYLOAD),
            ('classes4.dex', DEX_PAYLOAD),
            ('classes5.dex', DEX_PAYLOAD),
            ('classes6.dex', DEX_PAYLOAD),
            ('classes7.dex', DEX_PAYLOAD),
            ('classes8.dex', DEX_PAYLOAD),
            ('classes9.dex', DEX_PAYLOAD),
        ]))
        self.assertEqual(
            dex_entry_names(archive),
            ['classes.dex'] + [f'classes{n}.dex' for n in range(2, 11)],
        )

    def test_classes1_is_not_a_dex_entry(self):
        archive = archive_from_bytes(make_zip([
            (MANIFEST_NAME, b'm'), ('classes.dex', DEX_PAYLOAD), ('classes1.dex', DEX_PAYLOAD),
        ]))
        self.assertEqual(dex_entry_names(archive), ['classes.dex'])

    def test_listing_stops_at_a_gap(self):
        archive = archive_from_bytes(make_zip([
            (MANIFEST_NAME, b'm'), ('classes.dex', DEX_PAYLOAD),
            ('classes3.dex', DEX_PAYLOAD), ('classes4.dex', DEX_PAYLOAD),
        ]))
        with self.assertLogs('apk.archive', 'WARNING') as logs:
            names = dex_entry_names(archive)
        self.assertEqual(names, ['classes.dex'])
        self.assertIn('classes3.dex, classes4.dex', logs.output[0])

    def test_secondary_dex_without_primary(self):
        with self.assertRaises(NoDexEntries):
            archive_from_bytes(make_zip([(MANIFEST_NAME, b'm'), ('classes2.dex', DEX_PAYLOAD)]))
        with self.assertRaises(NoDexEntries):
            archive_from_bytes(make_zip([
                (MANIFEST_NAME, b'm'), ('classes2.dex', DEX_PAYLOAD), ('classes3.dex', DEX_PAYLOAD),
            ]))
