"""
Dalvik opcode formats.

Only widths are needed to walk an instruction stream; operands are
materialized for const and invoke instructions. Widths are in 16-bit code
units and come from the published instruction-format table
(https://source.android.com/docs/core/runtime/dalvik-bytecode).
"""

# Format id -> width in code units.
FORMAT_WIDTHS = {
    '10x': 1, '12x': 1, '11n': 1, '11x': 1, '10t': 1,
    '20t': 2, '22x': 2, '21t': 2, '21s': 2, '21h': 2, '21c': 2,
    '23x': 2, '22b': 2, '22t': 2, '22s': 2, '22c': 2,
    '30t': 3, '32x': 3, '31i': 3, '31t': 3, '31c': 3, '35c': 3, '3rc': 3,
    '45cc': 4, '4rcc': 4,
    '51l': 5,
}


def _build_format_table():
    table = ['10x'] * 256
    spans = [
        (0x00, 0x00, '10x'),  # nop, also the payload pseudo-opcodes
        (0x01, 0x01, '12x'),
        (0x02, 0x02, '22x'),
        (0x03, 0x03, '32x'),
        (0x04, 0x04, '12x'),
        (0x05, 0x05, '22x'),
        (0x06, 0x06, '32x'),
        (0x07, 0x07, '12x'),
        (0x08, 0x08, '22x'),
        (0x09, 0x09, '32x'),
        (0x0A, 0x0D, '11x'),  # move-result*, move-exception
        (0x0E, 0x0E, '10x'),  # return-void
        (0x0F, 0x11, '11x'),  # return*
        (0x12, 0x12, '11n'),  # const/4
        (0x13, 0x13, '21s'),  # const/16
        (0x14, 0x14, '31i'),  # const
        (0x15, 0x15, '21h'),  # const/high16
        (0x16, 0x16, '21s'),  # const-wide/16
        (0x17, 0x17, '31i'),  # const-wide/32
        (0x18, 0x18, '51l'),  # const-wide
        (0x19, 0x19, '21h'),  # const-wide/high16
        (0x1A, 0x1A, '21c'),  # const-string
        (0x1B, 0x1B, '31c'),  # const-string/jumbo
        (0x1C, 0x1C, '21c'),  # const-class
        (0x1D, 0x1E, '11x'),  # monitor-enter/exit
        (0x1F, 0x1F, '21c'),  # check-cast
        (0x20, 0x20, '22c'),  # instance-of
        (0x21, 0x21, '12x'),  # array-length
        (0x22, 0x22, '21c'),  # new-instance
        (0x23, 0x23, '22c'),  # new-array
        (0x24, 0x24, '35c'),  # filled-new-array
        (0x25, 0x25, '3rc'),  # filled-new-array/range
        (0x26, 0x26, '31t'),  # fill-array-data
        (0x27, 0x27, '11x'),  # throw
        (0x28, 0x28, '10t'),  # goto
        (0x29, 0x29, '20t'),  # goto/16
        (0x2A, 0x2A, '30t'),  # goto/32
        (0x2B, 0x2C, '31t'),  # packed-switch, sparse-switch
        (0x2D, 0x31, '23x'),  # cmp*
        (0x32, 0x37, '22t'),  # if-*
        (0x38, 0x3D, '21t'),  # if-*z
        (0x3E, 0x43, '10x'),  # unused
        (0x44, 0x51, '23x'),  # aget*/aput*
        (0x52, 0x5F, '22c'),  # iget*/iput*
        (0x60, 0x6D, '21c'),  # sget*/sput*
        (0x6E, 0x72, '35c'),  # invoke-*
        (0x73, 0x73, '10x'),  # unused
        (0x74, 0x78, '3rc'),  # invoke-*/range
        (0x79, 0x7A, '10x'),  # unused
        (0x7B, 0x8F, '12x'),  # unops
        (0x90, 0xAF, '23x'),  # binops
        (0xB0, 0xCF, '12x'),  # binop/2addr
        (0xD0, 0xD7, '22s'),  # binop/lit16
        (0xD8, 0xE2, '22b'),  # binop/lit8
        (0xE3, 0xF9, '10x'),  # unused
        (0xFA, 0xFA, '45cc'),  # invoke-polymorphic
        (0xFB, 0xFB, '4rcc'),  # invoke-polymorphic/range
        (0xFC, 0xFC, '35c'),  # invoke-custom
        (0xFD, 0xFD, '3rc'),  # invoke-custom/range
        (0xFE, 0xFF, '21c'),  # const-method-handle, const-method-type
    ]
    for first, last, fmt in spans:
        for opcode in range(first, last + 1):
            table[opcode] = fmt
    return tuple(table)


OPCODE_FORMATS = _build_format_table()
OPCODE_WIDTHS = tuple(FORMAT_WIDTHS[fmt] for fmt in OPCODE_FORMATS)

CONST_4 = 0x12
CONST_16 = 0x13
CONST = 0x14
CONST_OPCODES = frozenset((CONST_4, CONST_16, CONST))

CONST_STRING = 0x1A
NEW_INSTANCE = 0x22
CONST_CLASS = 0x1C
RETURN_VOID = 0x0E

INVOKE_VIRTUAL = 0x6E
INVOKE_SUPER = 0x6F
INVOKE_DIRECT = 0x70
INVOKE_STATIC = 0x71
INVOKE_INTERFACE = 0x72
INVOKE_OPCODES = frozenset(range(0x6E, 0x73))
INVOKE_RANGE_OPCODES = frozenset(range(0x74, 0x79))

# Payload pseudo-instructions hide behind opcode 0x00 with a non-zero high byte.
PACKED_SWITCH_PAYLOAD = 0x0100
SPARSE_SWITCH_PAYLOAD = 0x0200
FILL_ARRAY_DATA_PAYLOAD = 0x0300


def sign_extend(value, bits):
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)
