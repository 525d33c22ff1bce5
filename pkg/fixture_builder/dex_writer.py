"""
Minimal DEX emitter.

Writes real, conformant sections: header with adler32 checksum and SHA-1
signature, sorted string/type/proto/method ids, class_defs, code items,
type lists, string data, class data and a map list. Only the opcodes the
parser materializes (const*, const-string, const-class, new-instance,
move-result-object, invoke-*, return-void) can be emitted.
"""

import hashlib
import struct
import zlib
from dataclasses import dataclass, field

from apk import dalvik
from apk.dex import DEX_MAGIC, ENDIAN_CONSTANT, HEADER_SIZE, HEADER_STRUCT, NO_INDEX

DEX_VERSION = b'035\x00'
OBJECT = 'Ljava/lang/Object;'

ACC_PUBLIC = 0x1
ACC_STATIC = 0x8
ACC_CONSTRUCTOR = 0x10000

MOVE_RESULT_OBJECT = 0x0C

# map_list item type codes
TYPE_HEADER_ITEM = 0x0000
TYPE_STRING_ID_ITEM = 0x0001
TYPE_TYPE_ID_ITEM = 0x0002
TYPE_PROTO_ID_ITEM = 0x0003
TYPE_METHOD_ID_ITEM = 0x0005
TYPE_CLASS_DEF_ITEM = 0x0006
TYPE_MAP_LIST = 0x1000
TYPE_TYPE_LIST = 0x1001
TYPE_CLASS_DATA_ITEM = 0x2000
TYPE_CODE_ITEM = 0x2001
TYPE_STRING_DATA_ITEM = 0x2002

INVOKE_KINDS = {
    'virtual': dalvik.INVOKE_VIRTUAL,
    'super': dalvik.INVOKE_SUPER,
    'direct': dalvik.INVOKE_DIRECT,
    'static': dalvik.INVOKE_STATIC,
    'interface': dalvik.INVOKE_INTERFACE,
}


def shorty_char(descriptor):
    return 'L' if descriptor[0] in 'L[' else descriptor


@dataclass(frozen=True)
class MethodKey:
    owner: str
    name: str
    parameters: tuple = ()
    return_type: str = 'V'

    @property
    def shorty(self):
        return shorty_char(self.return_type) + ''.join(shorty_char(p) for p in self.parameters)

    @property
    def proto(self):
        return (self.shorty, self.return_type, self.parameters)


# Instruction forms understood by the emitter.

@dataclass(frozen=True)
class Const:
    register: int
    value: int


@dataclass(frozen=True)
class ConstString:
    register: int
    text: str


@dataclass(frozen=True)
class ConstClass:
    register: int
    type_name: str


@dataclass(frozen=True)
class NewInstance:
    register: int
    type_name: str


@dataclass(frozen=True)
class MoveResultObject:
    register: int


@dataclass(frozen=True)
class Invoke:
    kind: str
    method: MethodKey
    registers: tuple = ()


@dataclass(frozen=True)
class ReturnVoid:
    pass


@dataclass(frozen=True)
class MethodDef:
    name: str
    code: tuple
    registers: int = 5
    access_flags: int = ACC_PUBLIC | ACC_STATIC
    parameters: tuple = ()
    return_type: str = 'V'


@dataclass(frozen=True)
class ClassDefSource:
    type_name: str
    methods: tuple = ()
    superclass: str = OBJECT


def uleb128(value):
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _align(buffer, boundary=4):
    while len(buffer) % boundary:
        buffer.append(0)


def _utf16_length(text):
    return len(text.encode('utf-16-le')) // 2


@dataclass
class DexWriter:
    """Collects class sources and serializes them into one DEX file."""
    classes: list = field(default_factory=list)

    def add_class(self, type_name, methods, superclass=OBJECT):
        self.classes.append(ClassDefSource(type_name=type_name, methods=tuple(methods), superclass=superclass))
        return self

    # Reference collection

    def _method_keys(self):
        keys = set()
        for source in self.classes:
            for method in source.methods:
                keys.add(MethodKey(source.type_name, method.name, method.parameters, method.return_type))
                keys.update(op.method for op in method.code if isinstance(op, Invoke))
        return keys

    def invocation_targets(self):
        """(owner, name) of every invoked method; the oracle for parser queries."""
        return frozenset(
            (op.method.owner, op.method.name)
            for source in self.classes
            for method in source.methods
            for op in method.code
            if isinstance(op, Invoke)
        )

    def _collect(self):
        methods = self._method_keys()
        types = set()
        strings = set()
        for source in self.classes:
            types.update((source.type_name, source.superclass))
            for method in source.methods:
                for op in method.code:
                    if isinstance(op, ConstString):
                        strings.add(op.text)
                    elif isinstance(op, (ConstClass, NewInstance)):
                        types.add(op.type_name)
        for key in methods:
            types.add(key.owner)
            types.add(key.return_type)
            types.update(key.parameters)
            strings.update((key.name, key.shorty))
        strings.update(types)
        return sorted(strings), sorted(types), methods

    # Serialization

    def to_bytes(self):
        strings, types, method_keys = self._collect()
        string_index = {text: i for i, text in enumerate(strings)}
        type_index = {name: i for i, name in enumerate(types)}

        protos = sorted(
            {key.proto for key in method_keys},
            key=lambda proto: (type_index[proto[1]], [type_index[p] for p in proto[2]]),
        )
        proto_index = {proto: i for i, proto in enumerate(protos)}
        methods = sorted(
            method_keys,
            key=lambda key: (type_index[key.owner], string_index[key.name], proto_index[key.proto]),
        )
        method_index = {key: i for i, key in enumerate(methods)}
        classes = sorted(self.classes, key=lambda source: type_index[source.type_name])

        string_ids_off = HEADER_SIZE
        type_ids_off = string_ids_off + 4 * len(strings)
        proto_ids_off = type_ids_off + 4 * len(types)
        method_ids_off = proto_ids_off + 12 * len(protos)
        class_defs_off = method_ids_off + 8 * len(methods)
        data_off = class_defs_off + 32 * len(classes)

        data = bytearray()
        map_items = []

        def here():
            return data_off + len(data)

        # code items
        code_offsets = {}
        code_start, code_count = here(), 0
        for source in classes:
            for method in source.methods:
                if not method.code:
                    continue
                key = MethodKey(source.type_name, method.name, method.parameters, method.return_type)
                _align(data)
                if not code_count:
                    code_start = here()
                code_offsets[key] = here()
                data.extend(self._code_item(method, string_index, type_index, method_index))
                code_count += 1
        if code_count:
            map_items.append((TYPE_CODE_ITEM, code_count, code_start))

        # type lists
        _align(data)
        type_list_offsets = {}
        lists = sorted({proto[2] for proto in protos if proto[2]})
        if lists:
            map_items.append((TYPE_TYPE_LIST, len(lists), here()))
        for params in lists:
            _align(data)
            type_list_offsets[params] = here()
            data.extend(struct.pack('<I', len(params)))
            data.extend(struct.pack(f'<{len(params)}H', *(type_index[p] for p in params)))

        # string data
        string_data_offsets = []
        map_items.append((TYPE_STRING_DATA_ITEM, len(strings), here()))
        for text in strings:
            string_data_offsets.append(here())
            data.extend(uleb128(_utf16_length(text)))
            data.extend(text.encode('utf-8'))
            data.append(0)

        # class data
        class_data_offsets = {}
        with_methods = [source for source in classes if source.methods]
        if with_methods:
            map_items.append((TYPE_CLASS_DATA_ITEM, len(with_methods), here()))
        for source in with_methods:
            class_data_offsets[source.type_name] = here()
            data.extend(self._class_data(source, method_index, code_offsets))

        # map list
        _align(data)
        map_off = here()
        map_items = [
            (TYPE_HEADER_ITEM, 1, 0),
            (TYPE_STRING_ID_ITEM, len(strings), string_ids_off),
            (TYPE_TYPE_ID_ITEM, len(types), type_ids_off),
            (TYPE_PROTO_ID_ITEM, len(protos), proto_ids_off),
            (TYPE_METHOD_ID_ITEM, len(methods), method_ids_off),
            (TYPE_CLASS_DEF_ITEM, len(classes), class_defs_off),
        ] + map_items + [(TYPE_MAP_LIST, 1, map_off)]
        map_items = [item for item in map_items if item[1]]
        data.extend(struct.pack('<I', len(map_items)))
        for item_type, size, offset in map_items:
            data.extend(struct.pack('<HHII', item_type, 0, size, offset))

        ids = bytearray()
        for offset in string_data_offsets:
            ids.extend(struct.pack('<I', offset))
        for name in types:
            ids.extend(struct.pack('<I', string_index[name]))
        for shorty, return_type, params in protos:
            ids.extend(struct.pack(
                '<III', string_index[shorty], type_index[return_type], type_list_offsets.get(params, 0)
            ))
        for key in methods:
            ids.extend(struct.pack('<HHI', type_index[key.owner], proto_index[key.proto], string_index[key.name]))
        for source in classes:
            ids.extend(struct.pack(
                '<8I',
                type_index[source.type_name],
                ACC_PUBLIC,
                type_index[source.superclass],
                0,
                NO_INDEX,
                0,
                class_data_offsets.get(source.type_name, 0),
                0,
            ))

        file_size = data_off + len(data)
        header = HEADER_STRUCT.pack(
            DEX_MAGIC + DEX_VERSION, 0, b'\x00' * 20, file_size, HEADER_SIZE, ENDIAN_CONSTANT,
            0, 0, map_off,
            len(strings), string_ids_off if strings else 0,
            len(types), type_ids_off if types else 0,
            len(protos), proto_ids_off if protos else 0,
            0, 0,
            len(methods), method_ids_off if methods else 0,
            len(classes), class_defs_off if classes else 0,
            len(data), data_off,
        )
        image = bytearray(header + ids + data)
        image[12:32] = hashlib.sha1(bytes(image[32:])).digest()
        image[8:12] = struct.pack('<I', zlib.adler32(bytes(image[12:])))
        return bytes(image)

    def _code_item(self, method, string_index, type_index, method_index):
        units = []
        outs = 0
        for op in method.code:
            units.extend(self._encode(op, string_index, type_index, method_index))
            if isinstance(op, Invoke):
                outs = max(outs, len(op.registers))
        ins = len(method.parameters) + (0 if method.access_flags & ACC_STATIC else 1)
        header = struct.pack('<HHHHII', max(method.registers, ins), ins, outs, 0, 0, len(units))
        return header + struct.pack(f'<{len(units)}H', *units)

    @staticmethod
    def _encode(op, string_index, type_index, method_index):
        if isinstance(op, Const):
            reg, value = op.register, op.value
            if -8 <= value <= 7 and reg < 16:
                return [((value & 0xF) << 12) | (reg << 8) | dalvik.CONST_4]
            if -0x8000 <= value <= 0x7FFF:
                return [(reg << 8) | dalvik.CONST_16, value & 0xFFFF]
            value &= 0xFFFFFFFF
            return [(reg << 8) | dalvik.CONST, value & 0xFFFF, value >> 16]
        if isinstance(op, ConstString):
            return [(op.register << 8) | dalvik.CONST_STRING, string_index[op.text]]
        if isinstance(op, ConstClass):
            return [(op.register << 8) | dalvik.CONST_CLASS, type_index[op.type_name]]
        if isinstance(op, NewInstance):
            return [(op.register << 8) | dalvik.NEW_INSTANCE, type_index[op.type_name]]
        if isinstance(op, MoveResultObject):
            return [(op.register << 8) | MOVE_RESULT_OBJECT]
        if isinstance(op, Invoke):
            regs = list(op.registers)
            if len(regs) > 5 or any(reg > 15 for reg in regs):
                raise ValueError(f'{op.method}: invoke supports at most five low registers')
            padded = regs + [0] * (5 - len(regs))
            unit0 = (len(regs) << 12) | (padded[4] << 8) | INVOKE_KINDS[op.kind]
            unit2 = (padded[3] << 12) | (padded[2] << 8) | (padded[1] << 4) | padded[0]
            return [unit0, method_index[op.method], unit2]
        if isinstance(op, ReturnVoid):
            return [dalvik.RETURN_VOID]
        raise TypeError(f'cannot encode {op!r}')

    @staticmethod
    def _class_data(source, method_index, code_offsets):
        direct, virtual = [], []
        for method in source.methods:
            key = MethodKey(source.type_name, method.name, method.parameters, method.return_type)
            is_direct = method.access_flags & ACC_STATIC or method.name == '<init>'
            (direct if is_direct else virtual).append((method_index[key], method.access_flags, code_offsets.get(key, 0)))

        out = bytearray(uleb128(0) + uleb128(0) + uleb128(len(direct)) + uleb128(len(virtual)))
        for group in (direct, virtual):
            previous = 0
            for index, flags, code_off in sorted(group):
                out.extend(uleb128(index - previous))
                out.extend(uleb128(flags))
                out.extend(uleb128(code_off))
                previous = index
        return bytes(out)
