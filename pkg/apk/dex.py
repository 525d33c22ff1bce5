"""
DEX parsing, far enough for call-site and string queries.

parse_dex() decodes the id sections, the class definitions and every code
item's instruction stream (by format width). Operands are kept only for the
const and invoke instructions the rules look at. Register dataflow is not
modelled: literal_reaching() is a bounded linear back-scan.
"""

import collections
import logging
import struct
import zlib
from dataclasses import dataclass, field
from typing import Optional

from django.db import models

from . import dalvik
from .exceptions import (
    BadEndianTag, BadMagic, DuplicateMethodIndex, MalformedUleb128, SectionOutOfBounds,
)

logger = logging.getLogger(__name__)

DEX_MAGIC = b'dex\n'
DEX_VERSIONS = (b'035\x00', b'037\x00', b'038\x00', b'039\x00')
ENDIAN_CONSTANT = 0x12345678
HEADER_SIZE = 0x70
NO_INDEX = 0xFFFFFFFF
DEFAULT_LOOKBACK = 8

# https://source.android.com/docs/core/runtime/dex-format#header-item
_DEX_HEADER_FMT = (
    ('magic', '8s'),
    ('checksum', 'I'),
    ('signature', '20s'),
    ('file_size', 'I'),
    ('header_size', 'I'),
    ('endian_tag', 'I'),
    ('link_size', 'I'),
    ('link_off', 'I'),
    ('map_off', 'I'),
    ('string_ids_size', 'I'),
    ('string_ids_off', 'I'),
    ('type_ids_size', 'I'),
    ('type_ids_off', 'I'),
    ('proto_ids_size', 'I'),
    ('proto_ids_off', 'I'),
    ('field_ids_size', 'I'),
    ('field_ids_off', 'I'),
    ('method_ids_size', 'I'),
    ('method_ids_off', 'I'),
    ('class_defs_size', 'I'),
    ('class_defs_off', 'I'),
    ('data_size', 'I'),
    ('data_off', 'I'),
)
DexHeader = collections.namedtuple('DexHeader', ','.join(name for name, _ in _DEX_HEADER_FMT))
HEADER_STRUCT = struct.Struct('<' + ''.join(fmt for _, fmt in _DEX_HEADER_FMT))

PROTO_ID = struct.Struct('<III')
FIELD_ID = struct.Struct('<HHI')
METHOD_ID = struct.Struct('<HHI')
CLASS_DEF = struct.Struct('<8I')
CODE_ITEM = struct.Struct('<HHHHII')


class MatchMode(models.TextChoices):
    EXACT = 'exact', 'exact'
    SUBSTRING = 'substring', 'substring'


@dataclass(frozen=True)
class MethodRef:
    owner: str
    name: str
    shorty: str
    parameters: tuple = ()
    return_type: str = 'V'

    def __str__(self):
        return f"{self.owner}->{self.name}({''.join(self.parameters)}){self.return_type}"


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    width: int
    literal: Optional[int] = None
    method_index: Optional[int] = None

    @property
    def is_invoke(self):
        return self.opcode in dalvik.INVOKE_OPCODES or self.opcode in dalvik.INVOKE_RANGE_OPCODES


@dataclass(frozen=True)
class MethodBody:
    owner: str
    name: str
    method_index: int
    instructions: tuple = ()
    insns_size: int = 0


@dataclass(frozen=True)
class ClassDef:
    type_name: str
    methods: tuple = ()
    superclass: Optional[str] = None


@dataclass(frozen=True)
class InvocationSite:
    caller: tuple
    callee: MethodRef
    offset: int
    index: int = field(default=0, compare=False)
    caller_index: int = field(default=-1, compare=False)
    dex_name: str = field(default='classes.dex', compare=False)
    body: Optional[MethodBody] = field(default=None, compare=False, repr=False)

    def __str__(self):
        owner, name = self.caller
        return f'{owner}->{name} @0x{self.offset:04x} calls {self.callee}'


@dataclass(frozen=True)
class DexImage:
    name: str
    string_pool: tuple
    type_names: tuple
    method_refs: tuple
    classes: tuple
    version: str = '035'
    checksum_valid: bool = True

    def iter_methods(self):
        for class_def in self.classes:
            yield from class_def.methods

    def body_of(self, site):
        if site.body is not None:
            return site.body
        for body in self.iter_methods():
            if body.method_index == site.caller_index:
                return body
        return None

    def invocations(self):
        for body in self.iter_methods():
            for index, instruction in enumerate(body.instructions):
                if instruction.method_index is not None and instruction.is_invoke:
                    yield InvocationSite(
                        caller=(body.owner, body.name),
                        callee=self.method_refs[instruction.method_index],
                        offset=instruction.offset,
                        index=index,
                        caller_index=body.method_index,
                        dex_name=self.name,
                        body=body,
                    )

    def invocation_targets(self):
        return {(site.callee.owner, site.callee.name) for site in self.invocations()}

    def references_type(self, descriptor):
        return descriptor in self.type_names


# Low-level readers. Every read is bounds-checked so malformed input ends in
# a DexError and never in struct.error or IndexError.

def _check_range(data, offset, length, what):
    if offset < 0 or length < 0 or offset + length > len(data):
        raise SectionOutOfBounds(f'{what} at 0x{offset:x} (+{length}) lies outside the file')


def _unpack(layout, data, offset, what):
    _check_range(data, offset, layout.size, what)
    return layout.unpack_from(data, offset)


def _u32(data, offset, what):
    _check_range(data, offset, 4, what)
    return struct.unpack_from('<I', data, offset)[0]


def read_uleb128(data, offset):
    """Decode one unsigned LEB128 value; returns (value, next offset)."""
    result = 0
    for shift in range(0, 35, 7):
        if offset >= len(data):
            raise MalformedUleb128('uleb128 runs past the end of the file')
        byte = data[offset]
        offset += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result & 0xFFFFFFFF, offset
    raise MalformedUleb128(f'uleb128 longer than five bytes ending at 0x{offset:x}')


def _decode_mutf8(raw):
    try:
        return raw.decode('utf-8')
    except UnicodeDecodeError:
        pass
    # NUL is C0 80 and characters above U+FFFF are two 3-byte surrogates.
    raw = raw.replace(b'\xc0\x80', b'\x00')
    try:
        text = raw.decode('utf-8', errors='surrogatepass')
    except UnicodeDecodeError:
        return raw.decode('utf-8', errors='replace')
    return text.encode('utf-16-le', errors='surrogatepass').decode('utf-16-le', errors='replace')


def _index(value, limit, what):
    if value >= limit:
        raise SectionOutOfBounds(f'{what} index {value} is beyond {limit} entries')
    return value


def _section(data, header, name, item_size):
    count = getattr(header, f'{name}_size')
    offset = getattr(header, f'{name}_off')
    if count:
        _check_range(data, offset, count * item_size, name)
    return count, offset


def _read_header(data):
    if data[:4] != DEX_MAGIC or data[4:8] not in DEX_VERSIONS:
        raise BadMagic('not a DEX file (bad magic)')
    if len(data) < HEADER_SIZE:
        raise SectionOutOfBounds(f'DEX header needs {HEADER_SIZE} bytes, got {len(data)}')
    header = DexHeader._make(HEADER_STRUCT.unpack_from(data, 0))
    if header.endian_tag != ENDIAN_CONSTANT:
        raise BadEndianTag(f'endian tag 0x{header.endian_tag:08x} is not supported')
    if header.file_size > len(data):
        raise SectionOutOfBounds(f'header declares {header.file_size} bytes, got {len(data)}')
    return header


def _read_strings(data, header):
    count, offset = _section(data, header, 'string_ids', 4)
    strings = []
    for index in range(count):
        position = _u32(data, offset + 4 * index, 'string_id')
        _, position = read_uleb128(data, position)
        end = data.find(b'\x00', position)
        if end < 0:
            raise SectionOutOfBounds(f'string {index} is not terminated')
        strings.append(_decode_mutf8(data[position:end]))
    return tuple(strings)


def _read_types(data, header, strings):
    count, offset = _section(data, header, 'type_ids', 4)
    return tuple(
        strings[_index(_u32(data, offset + 4 * i, 'type_id'), len(strings), 'type descriptor')]
        for i in range(count)
    )


def _read_type_list(data, offset, types):
    if not offset:
        return ()
    size = _u32(data, offset, 'type_list')
    _check_range(data, offset + 4, 2 * size, 'type_list')
    indices = struct.unpack_from(f'<{size}H', data, offset + 4)
    return tuple(types[_index(i, len(types), 'parameter type')] for i in indices)


def _read_protos(data, header, strings, types):
    count, offset = _section(data, header, 'proto_ids', PROTO_ID.size)
    protos = []
    for i in range(count):
        shorty, return_type, parameters_off = _unpack(PROTO_ID, data, offset + i * PROTO_ID.size, 'proto_id')
        protos.append((
            strings[_index(shorty, len(strings), 'shorty')],
            types[_index(return_type, len(types), 'return type')],
            _read_type_list(data, parameters_off, types),
        ))
    return tuple(protos)


def _check_fields(data, header, strings, types):
    count, offset = _section(data, header, 'field_ids', FIELD_ID.size)
    for i in range(count):
        class_idx, type_idx, name_idx = _unpack(FIELD_ID, data, offset + i * FIELD_ID.size, 'field_id')
        _index(class_idx, len(types), 'field class')
        _index(type_idx, len(types), 'field type')
        _index(name_idx, len(strings), 'field name')


def _read_methods(data, header, strings, types, protos):
    count, offset = _section(data, header, 'method_ids', METHOD_ID.size)
    methods = []
    for i in range(count):
        class_idx, proto_idx, name_idx = _unpack(METHOD_ID, data, offset + i * METHOD_ID.size, 'method_id')
        shorty, return_type, parameters = protos[_index(proto_idx, len(protos), 'method proto')]
        methods.append(MethodRef(
            owner=types[_index(class_idx, len(types), 'method class')],
            name=strings[_index(name_idx, len(strings), 'method name')],
            shorty=shorty,
            parameters=parameters,
            return_type=return_type,
        ))
    return tuple(methods)


def _payload_width(units, position):
    """Width of a switch/array payload pseudo-instruction starting at position."""
    ident = units[position]
    if ident == dalvik.PACKED_SWITCH_PAYLOAD and position + 1 < len(units):
        return units[position + 1] * 2 + 4
    if ident == dalvik.SPARSE_SWITCH_PAYLOAD and position + 1 < len(units):
        return units[position + 1] * 4 + 2
    if ident == dalvik.FILL_ARRAY_DATA_PAYLOAD and position + 3 < len(units):
        element_width = units[position + 1]
        size = units[position + 2] | (units[position + 3] << 16)
        return (size * element_width + 1) // 2 + 4
    if ident in (dalvik.PACKED_SWITCH_PAYLOAD, dalvik.SPARSE_SWITCH_PAYLOAD,
                 dalvik.FILL_ARRAY_DATA_PAYLOAD):
        return len(units) + 1
    return 1


def _decode_instructions(units, method_count, owner, name):
    instructions = []
    position = 0
    total = len(units)
    while position < total:
        unit = units[position]
        opcode = unit & 0xFF
        if opcode == 0x00 and unit:
            width = _payload_width(units, position)
        else:
            width = dalvik.OPCODE_WIDTHS[opcode]
        if position + width > total:
            raise SectionOutOfBounds(f'{owner}->{name}: instruction at 0x{position * 2:x} overruns the code item')

        literal = method_index = None
        if opcode == dalvik.CONST_4:
            literal = dalvik.sign_extend(unit >> 12, 4)
        elif opcode == dalvik.CONST_16:
            literal = dalvik.sign_extend(units[position + 1], 16)
        elif opcode == dalvik.CONST:
            literal = dalvik.sign_extend(units[position + 1] | (units[position + 2] << 16), 32)
        elif opcode in dalvik.INVOKE_OPCODES or opcode in dalvik.INVOKE_RANGE_OPCODES:
            method_index = _index(units[position + 1], method_count, 'invoked method')

        instructions.append(Instruction(
            offset=position * 2,
            opcode=opcode,
            width=width,
            literal=literal,
            method_index=method_index,
        ))
        position += width
    return tuple(instructions)


def _read_code(data, code_off, method_count, ref):
    if not code_off:
        return (), 0
    _, _, _, _, _, insns_size = _unpack(CODE_ITEM, data, code_off, 'code_item')
    start = code_off + CODE_ITEM.size
    _check_range(data, start, 2 * insns_size, 'code_item insns')
    units = struct.unpack_from(f'<{insns_size}H', data, start)
    return _decode_instructions(units, method_count, ref.owner, ref.name), insns_size


def _read_class_data(data, offset, methods, type_name):
    static_fields, position = read_uleb128(data, offset)
    instance_fields, position = read_uleb128(data, position)
    direct_count, position = read_uleb128(data, position)
    virtual_count, position = read_uleb128(data, position)

    for _ in range(static_fields + instance_fields):
        _, position = read_uleb128(data, position)
        _, position = read_uleb128(data, position)

    bodies = []
    seen = set()
    for count in (direct_count, virtual_count):
        method_idx = 0
        for position_in_list in range(count):
            diff, position = read_uleb128(data, position)
            _, position = read_uleb128(data, position)
            code_off, position = read_uleb128(data, position)
            if position_in_list and not diff:
                raise DuplicateMethodIndex(f'{type_name} repeats method index {method_idx}')
            method_idx += diff
            if method_idx in seen:
                raise DuplicateMethodIndex(f'{type_name} defines method index {method_idx} twice')
            seen.add(method_idx)
            ref = methods[_index(method_idx, len(methods), f'{type_name} method')]
            instructions, insns_size = _read_code(data, code_off, len(methods), ref)
            bodies.append(MethodBody(
                owner=ref.owner,
                name=ref.name,
                method_index=method_idx,
                instructions=instructions,
                insns_size=insns_size,
            ))
    return tuple(bodies)


def _read_classes(data, header, types, methods):
    count, offset = _section(data, header, 'class_defs', CLASS_DEF.size)
    classes = []
    for i in range(count):
        (class_idx, _, superclass_idx, _, _, _, class_data_off, _) = _unpack(
            CLASS_DEF, data, offset + i * CLASS_DEF.size, 'class_def'
        )
        type_name = types[_index(class_idx, len(types), 'class')]
        superclass = None
        if superclass_idx != NO_INDEX:
            superclass = types[_index(superclass_idx, len(types), 'superclass')]
        bodies = _read_class_data(data, class_data_off, methods, type_name) if class_data_off else ()
        classes.append(ClassDef(type_name=type_name, methods=bodies, superclass=superclass))
    return tuple(classes)


def parse_dex(data, name='classes.dex'):
    """Parse DEX bytes into an immutable DexImage."""
    data = bytes(data)
    header = _read_header(data)
    checksum_valid = zlib.adler32(data[12:header.file_size]) == header.checksum
    if not checksum_valid:
        logger.warning('%s: header checksum does not match contents', name)

    strings = _read_strings(data, header)
    types = _read_types(data, header, strings)
    protos = _read_protos(data, header, strings, types)
    _check_fields(data, header, strings, types)
    methods = _read_methods(data, header, strings, types, protos)
    classes = _read_classes(data, header, types, methods)

    logger.debug('%s: %d strings, %d types, %d methods, %d classes',
                 name, len(strings), len(types), len(methods), len(classes))
    return DexImage(
        name=name,
        string_pool=strings,
        type_names=types,
        method_refs=methods,
        classes=classes,
        version=header.magic[4:7].decode('ascii'),
        checksum_valid=checksum_valid,
    )


def _owner_matches(pattern, owner):
    if pattern.endswith('*'):
        return owner.startswith(pattern[:-1])
    return owner == pattern


def invocations_of(dex, owner_pattern, method_name):
    """
    Every invoke-kind call site whose target matches.

    owner_pattern is an exact descriptor ('Landroid/webkit/WebView;') or a
    prefix ending in '*' ('Landroid/webkit/*').
    """
    return [
        site for site in dex.invocations()
        if site.callee.name == method_name and _owner_matches(owner_pattern, site.callee.owner)
    ]


def string_pool_matches(dex, needles, mode=MatchMode.SUBSTRING):
    """Return (string, pool index) for every pool string matching a needle."""
    needles = list(needles)
    if not needles:
        raise ValueError('at least one needle is required')
    if mode == MatchMode.EXACT:
        wanted = set(needles)
        return [(text, i) for i, text in enumerate(dex.string_pool) if text in wanted]
    return [
        (text, i) for i, text in enumerate(dex.string_pool)
        if any(needle in text for needle in needles)
    ]


def literal_reaching(site, body, max_lookback=DEFAULT_LOOKBACK):
    """
    Nearest const/4, const/16 or const literal within max_lookback
    instructions before the call site, ignoring which register it targets.
    """
    instructions = body.instructions
    if (
        (body.owner, body.name) != site.caller
        or site.index >= len(instructions)
        or instructions[site.index].offset != site.offset
    ):
        raise ValueError(f'{site} does not belong to {body.owner}->{body.name}')
    for instruction in reversed(instructions[max(0, site.index - max_lookback):site.index]):
        if instruction.opcode in dalvik.CONST_OPCODES:
            return instruction.literal
    return None
