"""TCUT binary blob: a tiny self-describing container for particle-scale arrays.

Layout (all integers little-endian):

    magic   4 bytes  b"TCUT"
    version u32      format version (currently 1)
    count   u32      primary element count (particle/point total)
    nfields u32
    field table, nfields entries:
        name_len u16, name bytes (ascii)
        dtype    u8   (see _DTYPE_CODES)
        comps    u32  components per element
        count    u32  element count for this field
    data blocks, one per field in table order:
        bitmask fields: ceil(count / 8) bytes, LSB-first bit packing
        others: count * comps values of the coded dtype
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"TCUT"
VERSION = 1

# code -> numpy dtype string (None marks the bit-packed mask pseudo-dtype)
_DTYPE_CODES = {
    0: "<f4",
    1: "<f8",
    2: "<i4",
    3: "<i8",
    4: "u1",
    5: None,  # bitmask
}
_DTYPE_NAMES = {"f32": 0, "f64": 1, "i32": 2, "i64": 3, "u8": 4, "bitmask": 5}
BITMASK = "bitmask"


class BlobError(ValueError):
    pass


@dataclass
class BlobField:
    name: str
    dtype: str  # key of _DTYPE_NAMES
    data: np.ndarray  # (count,) or (count, comps); bitmask takes a 0/1 u8 vector

    def __post_init__(self):
        if self.dtype not in _DTYPE_NAMES:
            raise BlobError(f"unknown dtype {self.dtype!r}")
        arr = np.asarray(self.data)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise BlobError(f"field {self.name!r}: expected 1-D or 2-D data")
        if self.dtype == BITMASK:
            if arr.shape[1] != 1:
                raise BlobError("bitmask fields must be flat vectors")
            arr = (arr != 0).astype(np.uint8)
        else:
            arr = np.ascontiguousarray(arr, dtype=_DTYPE_CODES[_DTYPE_NAMES[self.dtype]])
        self.data = arr

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def comps(self) -> int:
        return self.data.shape[1]


def write_blob(path, fields: list[BlobField], count: int | None = None) -> None:
    if count is None:
        count = fields[0].count if fields else 0
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<III", VERSION, count, len(fields)))
    for f in fields:
        name = f.name.encode("ascii")
        buf.write(struct.pack("<H", len(name)))
        buf.write(name)
        buf.write(struct.pack("<BII", _DTYPE_NAMES[f.dtype], f.comps, f.count))
    for f in fields:
        if f.dtype == BITMASK:
            buf.write(np.packbits(f.data[:, 0], bitorder="little").tobytes())
        else:
            buf.write(f.data.tobytes())
    data = buf.getvalue()
    if hasattr(path, "write"):
        path.write(data)
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def read_blob(path) -> tuple[int, dict[str, np.ndarray]]:
    """Returns (primary count, {name: array}).

    Bitmask fields come back as flat 0/1 uint8 vectors; single-component
    fields as 1-D arrays.
    """
    if hasattr(path, "read"):
        raw = path.read()
    else:
        with open(path, "rb") as fh:
            raw = fh.read()
    if raw[:4] != MAGIC:
        raise BlobError("not a TCUT blob (bad magic)")
    if len(raw) < 16:
        raise BlobError("truncated blob header")
    version, count, nfields = struct.unpack_from("<III", raw, 4)
    if version != VERSION:
        raise BlobError(f"unsupported TCUT version {version}")
    off = 16
    table = []
    try:
        for _ in range(nfields):
            (name_len,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off : off + name_len].decode("ascii")
            off += name_len
            code, comps, fcount = struct.unpack_from("<BII", raw, off)
            off += 9
            if code not in _DTYPE_CODES:
                raise BlobError(f"field {name!r}: unknown dtype code {code}")
            table.append((name, code, comps, fcount))
    except struct.error as exc:
        raise BlobError("truncated blob header") from exc
    out = {}
    for name, code, comps, fcount in table:
        if _DTYPE_CODES[code] is None:
            nbytes = (fcount + 7) // 8
        else:
            nbytes = fcount * comps * np.dtype(_DTYPE_CODES[code]).itemsize
        if off + nbytes > len(raw):
            raise BlobError(f"truncated blob: field {name!r} runs past end of file")
        if _DTYPE_CODES[code] is None:
            packed = np.frombuffer(raw, dtype=np.uint8, count=nbytes, offset=off)
            out[name] = np.unpackbits(packed, bitorder="little", count=fcount).astype(np.uint8)
        else:
            dt = np.dtype(_DTYPE_CODES[code])
            arr = np.frombuffer(raw, dtype=dt, count=fcount * comps, offset=off).copy()
            out[name] = arr.reshape(fcount, comps) if comps > 1 else arr
        off += nbytes
    if off != len(raw):
        raise BlobError(f"trailing bytes: expected {off}, file has {len(raw)}")
    return count, out
