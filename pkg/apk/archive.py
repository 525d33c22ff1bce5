"""
APK container access.

An APK is a ZIP archive. The archive is indexed from the end-of-central-
directory record (the way Android's own package parser reads it), so data
prepended before the first local header is tolerated. Only the `stored`
and `deflate` methods are supported. Signature blocks are ignored.
"""

import logging
import re
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import (
    CorruptEntry,
    CrcMismatch,
    DuplicateEntry,
    EntryNotFound,
    MissingManifest,
    NoDexEntries,
    NotAZip,
    TruncatedArchive,
    UnsupportedCompressionMethod,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'AndroidManifest.xml'
PRIMARY_DEX_NAME = 'classes.dex'

# PKWARE APPNOTE record layouts, little-endian.
EOCD_SIGNATURE = b'PK\x05\x06'
EOCD_FORMAT = '<4s4H2LH'
EOCD_SIZE = struct.calcsize(EOCD_FORMAT)

CENTRAL_SIGNATURE = b'PK\x01\x02'
CENTRAL_FORMAT = '<4s4B4HL2L5H2L'
CENTRAL_SIZE = struct.calcsize(CENTRAL_FORMAT)

LOCAL_SIGNATURE = b'PK\x03\x04'
LOCAL_FORMAT = '<4s2B4HL2L2H'
LOCAL_SIZE = struct.calcsize(LOCAL_FORMAT)

MAX_COMMENT = 0xFFFF
EOCD_SEARCH_WINDOW = 64 * 1024 + EOCD_SIZE

ZIP_STORED = 0
ZIP_DEFLATED = 8
UTF8_NAME_FLAG = 0x800

DEX_NAME_RE = re.compile(r'^classes(\d*)\.dex$')


@dataclass(frozen=True)
class ApkEntry:
    """One central-directory record."""
    name: str
    compressed_size: int
    uncompressed_size: int
    crc32: int
    compression_method: int = ZIP_DEFLATED
    header_offset: int = 0


@dataclass(frozen=True)
class ApkArchive:
    """Decoded APK container. Payloads are inflated lazily by read_entry()."""
    source_path: str
    entries: tuple
    _data: bytes = field(default=b'', repr=False, compare=False)

    @property
    def names(self):
        return [entry.name for entry in self.entries]

    def get(self, name):
        for entry in self.entries:
            if entry.name == name:
                return entry
        return None

    def __contains__(self, name):
        return self.get(name) is not None

    def __len__(self):
        return len(self.entries)


def _dex_number(name):
    """Return the multidex ordinal of an entry name or None."""
    match = DEX_NAME_RE.match(name)
    if not match:
        return None
    digits = match.group(1)
    if not digits:
        return 1
    number = int(digits)
    # classes1.dex is not a valid multidex name; Android starts at 2.
    return number if number >= 2 else None


def _find_end_record(data):
    """Locate the EOCD record by scanning backwards through the last 64 KiB."""
    start = max(0, len(data) - EOCD_SEARCH_WINDOW)
    position = len(data) - EOCD_SIZE
    while position >= start:
        position = data.rfind(EOCD_SIGNATURE, start, position + 4)
        if position < 0:
            break
        comment_length = struct.unpack_from('<H', data, position + 20)[0]
        if position + EOCD_SIZE + comment_length == len(data):
            return position
        position -= 1
    raise NotAZip('end of central directory record not found')


def _decode_name(raw, flags):
    if flags & UTF8_NAME_FLAG:
        return raw.decode('utf-8', errors='replace')
    return raw.decode('cp437')


def _read_central_directory(data, source_path):
    eocd_offset = _find_end_record(data)
    (_, disk, cd_disk, _, total, cd_size, cd_offset, _) = struct.unpack_from(
        EOCD_FORMAT, data, eocd_offset
    )
    if disk != 0 or cd_disk != 0:
        raise NotAZip('multi-disk archives are not APKs')

    # Bytes prepended before the archive shift every recorded offset.
    concat = eocd_offset - cd_size - cd_offset
    if concat < 0:
        raise TruncatedArchive('central directory extends past its end record')
    position = cd_offset + concat
    end = position + cd_size

    entries = []
    seen = set()
    for index in range(total):
        if position + CENTRAL_SIZE > end:
            raise TruncatedArchive(f'central directory ends after {index} of {total} entries')
        record = struct.unpack_from(CENTRAL_FORMAT, data, position)
        if record[0] != CENTRAL_SIGNATURE:
            raise TruncatedArchive(f'bad central directory signature at offset {position}')
        flags, method = record[5], record[6]
        crc, compressed, uncompressed = record[9], record[10], record[11]
        name_length, extra_length, comment_length = record[12], record[13], record[14]
        header_offset = record[18] + concat

        name_start = position + CENTRAL_SIZE
        if name_start + name_length > end:
            raise TruncatedArchive('entry name runs past the central directory')
        name = _decode_name(data[name_start:name_start + name_length], flags)
        if name in seen:
            raise DuplicateEntry(f'duplicate entry name {name!r}')
        seen.add(name)

        entries.append(ApkEntry(
            name=name,
            compressed_size=compressed,
            uncompressed_size=uncompressed,
            crc32=crc,
            compression_method=method,
            header_offset=header_offset,
        ))
        position = name_start + name_length + extra_length + comment_length

    logger.debug('%s: %d central directory entries', source_path, len(entries))
    return tuple(entries)


def archive_from_bytes(data, source_path='<memory>'):
    """Build an ApkArchive from raw bytes."""
    if len(data) < EOCD_SIZE:
        raise NotAZip('input is too short to be a ZIP archive')
    entries = _read_central_directory(bytes(data), source_path)
    archive = ApkArchive(source_path=str(source_path), entries=entries, _data=bytes(data))

    if MANIFEST_NAME not in archive:
        raise MissingManifest(f'{source_path}: no {MANIFEST_NAME} entry')
    if PRIMARY_DEX_NAME not in archive:
        raise NoDexEntries(f'{source_path}: no {PRIMARY_DEX_NAME} entry')
    return archive


def open_apk(path):
    """Open an APK from the filesystem. No payload is inflated yet."""
    path = Path(path)
    data = path.read_bytes()
    return archive_from_bytes(data, source_path=str(path))


def read_entry(archive, name):
    """Return the inflated, CRC-checked payload of one entry."""
    entry = archive.get(name)
    if entry is None:
        raise EntryNotFound(f'{archive.source_path}: no entry named {name!r}')
    if entry.compression_method not in (ZIP_STORED, ZIP_DEFLATED):
        raise UnsupportedCompressionMethod(
            f'{name}: compression method {entry.compression_method} is not supported'
        )

    data = archive._data
    offset = entry.header_offset
    if offset < 0 or offset + LOCAL_SIZE > len(data):
        raise TruncatedArchive(f'{name}: local header lies outside the archive')
    header = struct.unpack_from(LOCAL_FORMAT, data, offset)
    if header[0] != LOCAL_SIGNATURE:
        raise TruncatedArchive(f'{name}: bad local header signature')
    start = offset + LOCAL_SIZE + header[10] + header[11]
    stop = start + entry.compressed_size
    if stop > len(data):
        raise TruncatedArchive(f'{name}: payload runs past the end of the archive')
    raw = data[start:stop]

    if entry.compression_method == ZIP_STORED:
        payload = raw
    else:
        inflater = zlib.decompressobj(-zlib.MAX_WBITS)
        try:
            payload = inflater.decompress(raw, entry.uncompressed_size + 1)
            if not inflater.unconsumed_tail:
                payload += inflater.flush()
        except zlib.error as exc:
            raise CorruptEntry(f'{name}: {exc}') from exc

    if len(payload) != entry.uncompressed_size:
        raise CorruptEntry(
            f'{name}: inflated to {len(payload)} bytes, expected {entry.uncompressed_size}'
        )
    if zlib.crc32(payload) & 0xFFFFFFFF != entry.crc32:
        raise CrcMismatch(f'{name}: CRC-32 mismatch')
    return payload


def dex_entry_names(archive):
    """Return classes.dex, classes2.dex, ... in numeric order, up to the first gap."""
    numbered = {}
    for name in archive.names:
        number = _dex_number(name)
        if number is not None:
            numbered[number] = name
    names = []
    for number in range(1, len(numbered) + 1):
        if number not in numbered:
            logger.warning('%s: multidex numbering has no entry %d, ignoring %s',
                           archive.source_path, number,
                           ', '.join(numbered[n] for n in sorted(numbered) if n > number))
            break
        names.append(numbered[number])
    return names
