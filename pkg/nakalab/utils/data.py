import csv
import json
import math
import os
import struct
from typing import Any, Iterable, Sequence


class TruncatedData(ValueError):
    pass


class ByteReader:
    """Cursor over a byte string for the little-endian wire formats."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedData(f'wanted {n} bytes at offset {self.pos}, only {len(self.data) - self.pos} left')
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.read(1)[0]

    def u16(self) -> int:
        return struct.unpack('<H', self.read(2))[0]

    def u32(self) -> int:
        return struct.unpack('<I', self.read(4))[0]

    def u64(self) -> int:
        return struct.unpack('<Q', self.read(8))[0]

    def at_end(self) -> bool:
        return self.pos == len(self.data)


def fmt_float(x: float) -> str:
    """9 significant digits, the precision of every float the tools print."""
    if x is None:
        return ''
    if math.isinf(x) or math.isnan(x):
        return str(x)
    return f'{x:.9g}'


def round_floats(obj: Any) -> Any:
    if isinstance(obj, float):
        if math.isinf(obj) or math.isnan(obj):
            return None
        return float(f'{obj:.9g}')
    if isinstance(obj, dict):
        return {str(k): round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def to_json(obj: Any) -> str:
    return json.dumps(round_floats(obj), indent=2, sort_keys=False)


def write_json(path: str, obj: Any):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='\n') as f:
        f.write(to_json(obj))
        f.write('\n')


def _cell(v):
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, bytes):
        return v.hex()
    if v is None:
        return ''
    return v


def write_csv(path_or_file, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    if isinstance(path_or_file, str):
        os.makedirs(os.path.dirname(os.path.abspath(path_or_file)), exist_ok=True)
        with open(path_or_file, 'w', newline='') as f:
            write_csv(f, header, rows)
        return
    writer = csv.writer(path_or_file, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
