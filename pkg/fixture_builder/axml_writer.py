"""
Android binary XML encoder for fixture manifests.

Produces the same chunk layout aapt writes: XML header, UTF-16 string pool,
resource id map for android: attribute names, namespace start/end and
element start/end chunks with 16-byte node headers.
"""

import struct
from dataclasses import dataclass, field
from typing import Optional

from apk.axml import (
    ANDROID_NS,
    CHUNK_ELEMENT_END,
    CHUNK_ELEMENT_START,
    CHUNK_NAMESPACE_END,
    CHUNK_NAMESPACE_START,
    CHUNK_RESOURCE_MAP,
    CHUNK_STRING_POOL,
    CHUNK_XML,
    NO_INDEX,
    ValueType,
)

ANDROID_PREFIX = 'android'
NODE_HEADER_SIZE = 16
ATTRIBUTE_SIZE = 20
STRING_POOL_HEADER_SIZE = 28

# Framework resource ids of the android: attributes fixtures use.
ATTRIBUTE_RESOURCE_IDS = {
    'label': 0x01010001,
    'name': 0x01010003,
    'permission': 0x01010006,
    'readPermission': 0x01010007,
    'writePermission': 0x01010008,
    'protectionLevel': 0x01010009,
    'exported': 0x01010010,
    'authorities': 0x01010018,
    'minSdkVersion': 0x0101020C,
    'versionCode': 0x0101021B,
    'versionName': 0x0101021C,
    'targetSdkVersion': 0x01010270,
    'allowBackup': 0x01010280,
}


@dataclass(frozen=True)
class Attr:
    name: str
    value: object
    namespace: Optional[str] = ANDROID_NS
    value_type: Optional[int] = None

    @property
    def resolved_type(self):
        if self.value_type is not None:
            return self.value_type
        if isinstance(self.value, bool):
            return ValueType.INT_BOOLEAN
        if isinstance(self.value, int):
            return ValueType.INT_DEC
        return ValueType.STRING


@dataclass(frozen=True)
class Node:
    name: str
    attrs: tuple = ()
    children: tuple = field(default=())

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


def _pool_strings(root):
    """android: attribute names with resource ids first, in id-map order."""
    mapped, others = [], []

    def add(bucket, text):
        if text not in mapped and text not in others:
            bucket.append(text)

    for node in root.walk():
        for attr in node.attrs:
            if attr.namespace == ANDROID_NS and attr.name in ATTRIBUTE_RESOURCE_IDS:
                add(mapped, attr.name)
    for node in root.walk():
        add(others, node.name)
        for attr in node.attrs:
            add(others, attr.name)
            if attr.resolved_type == ValueType.STRING:
                add(others, attr.value)
    others = [text for text in others if text not in mapped]
    for text in (ANDROID_PREFIX, ANDROID_NS):
        if text not in others:
            others.append(text)
    return mapped, mapped + others


def _string_pool(strings):
    offsets, body = [], bytearray()
    for text in strings:
        offsets.append(len(body))
        encoded = text.encode('utf-16-le')
        length = len(encoded) // 2
        if length > 0x7FFF:
            body.extend(struct.pack('<HH', 0x8000 | (length >> 16), length & 0xFFFF))
        else:
            body.extend(struct.pack('<H', length))
        body.extend(encoded + b'\x00\x00')
    while len(body) % 4:
        body.append(0)
    strings_start = STRING_POOL_HEADER_SIZE + 4 * len(strings)
    chunk = bytearray(struct.pack('<HHI', CHUNK_STRING_POOL, STRING_POOL_HEADER_SIZE, strings_start + len(body)))
    chunk.extend(struct.pack('<IIIII', len(strings), 0, 0, strings_start, 0))
    for offset in offsets:
        chunk.extend(struct.pack('<I', offset))
    return bytes(chunk + body)


def _node(chunk_type, payload, line=1):
    return struct.pack('<HHIII', chunk_type, NODE_HEADER_SIZE, NODE_HEADER_SIZE + len(payload), line, NO_INDEX) + payload


def _ref(index, text):
    return NO_INDEX if text is None else index[text]


def _attribute(attr, index):
    value_type = attr.resolved_type
    raw = NO_INDEX
    if value_type == ValueType.STRING:
        data = raw = index[attr.value]
    elif value_type == ValueType.INT_BOOLEAN:
        data = 0xFFFFFFFF if attr.value else 0
    else:
        data = int(attr.value) & 0xFFFFFFFF
    return struct.pack('<IIIHBBI', _ref(index, attr.namespace), index[attr.name], raw, 8, 0, value_type, data)


def _element(node, index, chunks):
    attrs = sorted(node.attrs, key=lambda attr: ATTRIBUTE_RESOURCE_IDS.get(attr.name, 0xFFFFFFFF)
                   if attr.namespace == ANDROID_NS else 0xFFFFFFFF)
    payload = struct.pack('<IIHHHHHH', NO_INDEX, index[node.name], 20, ATTRIBUTE_SIZE, len(attrs), 0, 0, 0)
    payload += b''.join(_attribute(attr, index) for attr in attrs)
    chunks.append(_node(CHUNK_ELEMENT_START, payload))
    for child in node.children:
        _element(child, index, chunks)
    chunks.append(_node(CHUNK_ELEMENT_END, struct.pack('<II', NO_INDEX, index[node.name])))


def encode_axml(root):
    """Encode a Node tree as an AXML document."""
    mapped, strings = _pool_strings(root)
    index = {text: i for i, text in enumerate(strings)}

    chunks = [_string_pool(strings)]
    if mapped:
        ids = b''.join(struct.pack('<I', ATTRIBUTE_RESOURCE_IDS[name]) for name in mapped)
        chunks.append(struct.pack('<HHI', CHUNK_RESOURCE_MAP, 8, 8 + len(ids)) + ids)
    namespace = struct.pack('<II', index[ANDROID_PREFIX], index[ANDROID_NS])
    chunks.append(_node(CHUNK_NAMESPACE_START, namespace))
    _element(root, index, chunks)
    chunks.append(_node(CHUNK_NAMESPACE_END, namespace))

    body = b''.join(chunks)
    return struct.pack('<HHI', CHUNK_XML, 8, 8 + len(body)) + body
