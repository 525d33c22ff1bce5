"""
Errors raised while reading APK archives, binary manifests and DEX files.

Everything derives from ParseError so callers can treat any malformed input
as one failure class (the CLI maps it to exit code 3).
"""


class ParseError(Exception):
    """Base class for every structured parsing failure."""


class BadMagic(ParseError):
    """Input does not start with the expected AXML or DEX signature."""


# APK container

class ApkError(ParseError):
    pass


class NotAZip(ApkError):
    pass


class TruncatedArchive(ApkError):
    pass


class DuplicateEntry(ApkError):
    pass


class MissingManifest(ApkError):
    pass


class NoDexEntries(ApkError):
    pass


class EntryNotFound(ApkError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ''


class UnsupportedCompressionMethod(ApkError):
    pass


class CorruptEntry(ApkError):
    """Payload could not be inflated or has the wrong length."""


class CrcMismatch(CorruptEntry):
    pass


# Android binary XML

class AxmlError(ParseError):
    pass


class TruncatedChunk(AxmlError):
    pass


class UnbalancedTree(AxmlError):
    pass


class StringIndexOutOfRange(AxmlError):
    pass


# Manifest model

class ManifestError(ParseError):
    pass


class NotAManifest(ManifestError):
    pass


class MissingPackageName(ManifestError):
    pass


# DEX

class DexError(ParseError):
    pass


class BadEndianTag(DexError):
    pass


class SectionOutOfBounds(DexError):
    pass


class MalformedUleb128(DexError):
    pass


class DuplicateMethodIndex(DexError):
    pass
