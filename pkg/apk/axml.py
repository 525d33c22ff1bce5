"""
Decoder for Android binary XML (AXML), the compiled form of AndroidManifest.xml.

The document is a little-endian sequence of chunks, each starting with a
(type u16, header_size u16, size u32) header:

    0x0003  XML document (wraps everything)
    0x0001  string pool
    0x0180  resource id map (skipped)
    0x0100  namespace start / 0x0101 namespace end
    0x0102  element start   / 0x0103 element end
    0x0104  CDATA (skipped)

Attributes are looked up by name plus namespace URI; resource ids are not
resolved.
"""

import logging
import struct
from dataclasses import dataclass
from typing import Optional

from django.db import models

from .exceptions import BadMagic, StringIndexOutOfRange, TruncatedChunk, UnbalancedTree

logger = logging.getLogger(__name__)

ANDROID_NS = 'http://schemas.android.com/apk/res/android'

CHUNK_XML = 0x0003
CHUNK_STRING_POOL = 0x0001
CHUNK_RESOURCE_MAP = 0x0180
CHUNK_NAMESPACE_START = 0x0100
CHUNK_NAMESPACE_END = 0x0101
CHUNK_ELEMENT_START = 0x0102
CHUNK_ELEMENT_END = 0x0103
CHUNK_CDATA = 0x0104

CHUNK_HEADER = struct.Struct('<HHI')
STRING_POOL_HEADER = struct.Struct('<IIIII')
NODE_HEADER = struct.Struct('<II')
ELEMENT_START = struct.Struct('<IIHHHHHH')
ELEMENT_END = struct.Struct('<II')
ATTRIBUTE = struct.Struct('<IIIHBBI')

NO_INDEX = 0xFFFFFFFF
UTF8_FLAG = 1 << 8


class ValueType(models.IntegerChoices):
    NULL = 0x00, 'null'
    REFERENCE = 0x01, 'reference'
    ATTRIBUTE = 0x02, 'attribute'
    STRING = 0x03, 'string'
    FLOAT = 0x04, 'float'
    DIMENSION = 0x05, 'dimension'
    FRACTION = 0x06, 'fraction'
    INT_DEC = 0x10, 'int'
    INT_HEX = 0x11, 'hex'
    INT_BOOLEAN = 0x12, 'boolean'


INTEGER_TYPES = (ValueType.INT_DEC, ValueType.INT_HEX)


@dataclass(frozen=True)
class AxmlAttribute:
    namespace: Optional[str]
    name: str
    value_type: int
    data: int
    string: Optional[str] = None

    @property
    def value(self):
        """Python rendering of the typed value."""
        if self.value_type == ValueType.STRING:
            return self.string
        if self.value_type == ValueType.INT_BOOLEAN:
            return self.data != 0
        if self.value_type in INTEGER_TYPES:
            return self.data - (1 << 32) if self.data & 0x80000000 else self.data
        if self.string is not None:
            return self.string
        return self.data


@dataclass(frozen=True)
class AxmlElement:
    namespace: Optional[str]
    name: str
    attributes: tuple = ()
    children: tuple = ()

    def attribute(self, name, namespace=ANDROID_NS):
        for attribute in self.attributes:
            if attribute.name == name and attribute.namespace == namespace:
                return attribute
        return None

    def get(self, name, namespace=ANDROID_NS, default=None):
        attribute = self.attribute(name, namespace)
        return default if attribute is None else attribute.value

    def find_all(self, name):
        return [child for child in self.children if child.name == name]

    def iter(self):
        """Depth-first walk including self."""
        stack = [self]
        while stack:
            element = stack.pop()
            yield element
            stack.extend(reversed(element.children))


@dataclass(frozen=True)
class AxmlDocument:
    string_pool: tuple
    root: AxmlElement
    namespaces: tuple = ()


def _chunk_header(data, offset, limit):
    if offset + CHUNK_HEADER.size > limit:
        raise TruncatedChunk(f'chunk header at {offset} runs past the end of the document')
    chunk_type, header_size, size = CHUNK_HEADER.unpack_from(data, offset)
    if header_size < CHUNK_HEADER.size or size < header_size or offset + size > limit:
        raise TruncatedChunk(
            f'chunk 0x{chunk_type:04x} at {offset} declares size {size} (header {header_size})'
        )
    return chunk_type, header_size, size


def _decode_length(data, position, limit, wide):
    """Read a string length prefix; returns (length, next position)."""
    unit = 2 if wide else 1
    fmt = '<H' if wide else '<B'
    high_bit = 0x8000 if wide else 0x80
    if position + unit > limit:
        raise TruncatedChunk('string length runs past the string pool')
    length = struct.unpack_from(fmt, data, position)[0]
    position += unit
    if length & high_bit:
        if position + unit > limit:
            raise TruncatedChunk('string length runs past the string pool')
        low = struct.unpack_from(fmt, data, position)[0]
        length = ((length & (high_bit - 1)) << (16 if wide else 8)) | low
        position += unit
    return length, position


def _decode_string_pool(data, offset, header_size, size):
    limit = offset + size
    if offset + CHUNK_HEADER.size + STRING_POOL_HEADER.size > limit:
        raise TruncatedChunk('string pool header is truncated')
    count, style_count, flags, strings_start, _ = STRING_POOL_HEADER.unpack_from(
        data, offset + CHUNK_HEADER.size
    )
    offsets_start = offset + header_size
    if offsets_start + 4 * (count + style_count) > limit:
        raise TruncatedChunk(f'string pool offset table ({count} entries) is truncated')
    utf8 = bool(flags & UTF8_FLAG)
    base = offset + strings_start

    strings = []
    for index in range(count):
        position = base + struct.unpack_from('<I', data, offsets_start + 4 * index)[0]
        if position >= limit:
            raise TruncatedChunk(f'string {index} starts outside the string pool')
        if utf8:
            _, position = _decode_length(data, position, limit, wide=False)
            length, position = _decode_length(data, position, limit, wide=False)
            if position + length > limit:
                raise TruncatedChunk(f'string {index} runs past the string pool')
            text = data[position:position + length].decode('utf-8', errors='replace')
        else:
            length, position = _decode_length(data, position, limit, wide=True)
            if position + 2 * length > limit:
                raise TruncatedChunk(f'string {index} runs past the string pool')
            text = data[position:position + 2 * length].decode('utf-16-le', errors='replace')
        strings.append(text)
    return tuple(strings)


def _string_at(pool, index, what):
    if index == NO_INDEX:
        return None
    if index >= len(pool):
        raise StringIndexOutOfRange(f'{what} references string {index} of {len(pool)}')
    return pool[index]


def _decode_attributes(data, offset, header_size, size, pool):
    limit = offset + size
    ext = offset + header_size
    if ext + ELEMENT_START.size > limit:
        raise TruncatedChunk(f'element chunk at {offset} is truncated')
    namespace, name, attr_start, attr_size, attr_count, _, _, _ = ELEMENT_START.unpack_from(data, ext)
    if attr_count and attr_size < ATTRIBUTE.size:
        raise TruncatedChunk(f'attribute record size {attr_size} is too small')
    first = ext + attr_start
    if first + attr_count * attr_size > limit:
        raise TruncatedChunk(f'{attr_count} attributes overrun element chunk at {offset}')

    element_name = _string_at(pool, name, 'element name')
    if element_name is None:
        raise StringIndexOutOfRange(f'element at {offset} has no name')
    attributes = []
    for index in range(attr_count):
        a_ns, a_name, a_raw, _, _, a_type, a_data = ATTRIBUTE.unpack_from(data, first + index * attr_size)
        attr_name = _string_at(pool, a_name, 'attribute name')
        if attr_name is None:
            raise StringIndexOutOfRange(f'attribute {index} of <{element_name}> has no name')
        string = None
        if a_type == ValueType.STRING:
            string = _string_at(pool, a_data, f'attribute {attr_name}')
        elif a_raw != NO_INDEX:
            string = _string_at(pool, a_raw, f'attribute {attr_name}')
        attributes.append(AxmlAttribute(
            namespace=_string_at(pool, a_ns, 'attribute namespace'),
            name=attr_name,
            value_type=a_type,
            data=a_data,
            string=string,
        ))
    return _string_at(pool, namespace, 'element namespace'), element_name, tuple(attributes)


def decode_axml(data):
    """Decode AXML bytes into an AxmlDocument."""
    data = bytes(data)
    if len(data) < CHUNK_HEADER.size:
        if data and data[:2] != b'\x03\x00':
            raise BadMagic('not an Android binary XML document')
        raise TruncatedChunk('document header is truncated')
    doc_type, doc_header, doc_size = CHUNK_HEADER.unpack_from(data, 0)
    if doc_type != CHUNK_XML:
        raise BadMagic(f'chunk type 0x{doc_type:04x} is not an XML document')
    if doc_size != len(data) or doc_header < CHUNK_HEADER.size or doc_header > doc_size:
        raise TruncatedChunk(f'document declares {doc_size} bytes, got {len(data)}')

    pool = ()
    namespaces = []
    # Each open element: [namespace, name, attributes, children]
    stack = []
    root = None
    offset = doc_header
    while offset < doc_size:
        chunk_type, header_size, size = _chunk_header(data, offset, doc_size)

        if chunk_type == CHUNK_STRING_POOL:
            pool = _decode_string_pool(data, offset, header_size, size)
        elif chunk_type == CHUNK_NAMESPACE_START:
            if offset + header_size + 8 > offset + size:
                raise TruncatedChunk(f'namespace chunk at {offset} is truncated')
            prefix, uri = struct.unpack_from('<II', data, offset + header_size)
            namespaces.append((_string_at(pool, prefix, 'namespace prefix'),
                               _string_at(pool, uri, 'namespace uri')))
        elif chunk_type == CHUNK_ELEMENT_START:
            if root is not None:
                raise UnbalancedTree('more than one root element')
            namespace, name, attributes = _decode_attributes(data, offset, header_size, size, pool)
            stack.append([namespace, name, attributes, []])
        elif chunk_type == CHUNK_ELEMENT_END:
            if offset + header_size + ELEMENT_END.size > offset + size:
                raise TruncatedChunk(f'end element chunk at {offset} is truncated')
            namespace_index, name_index = ELEMENT_END.unpack_from(data, offset + header_size)
            name = _string_at(pool, name_index, 'end element name')
            if not stack:
                raise UnbalancedTree(f'</{name}> closes nothing')
            namespace, open_name, attributes, children = stack.pop()
            if name != open_name:
                raise UnbalancedTree(f'</{name}> closes <{open_name}>')
            element = AxmlElement(namespace, open_name, attributes, tuple(children))
            if stack:
                stack[-1][3].append(element)
            else:
                root = element
        elif chunk_type in (CHUNK_RESOURCE_MAP, CHUNK_NAMESPACE_END, CHUNK_CDATA):
            pass
        else:
            logger.debug('skipping unknown AXML chunk 0x%04x at %d', chunk_type, offset)
        offset += size

    if stack:
        raise UnbalancedTree(f'<{stack[-1][1]}> is never closed')
    if root is None:
        raise UnbalancedTree('document has no root element')
    return AxmlDocument(string_pool=pool, root=root, namespaces=tuple(namespaces))
