"""Sequence codecs: plain text, 2-bit packing, and block prefix/dictionary.

``packed2bit`` stores four bases per byte (A=00, C=01, G=10, T=11, first
base in the high bits, last byte zero padded).  ``N`` positions are kept
in an exception list of 1-based positions and packed as ``A``.

``blockdict`` imitates page-level compression of a DBMS: rows are grouped
into blocks of roughly ``block_size`` text bytes; inside a block every
value is stored as (shared prefix length with an anchor value, suffix), and
(prefix, suffix) pairs that repeat are replaced by dictionary references.
"""

from __future__ import annotations

import itertools
import struct
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

N_FALLBACK_FRACTION = 0.25
DEFAULT_BLOCK_SIZE = 8 * 1024

_TEXT, _PACKED = 0, 1
_CODE = np.full(256, 255, dtype=np.uint8)
for _i, _b in enumerate(b"ACGT"):
    _CODE[_b] = _i
_CODE[ord("N")] = 0
_LETTERS = np.frombuffer(b"ACGT", dtype=np.uint8)
_N = ord("N")
_SHORT = 256  # below this length a lookup table beats numpy's per-call overhead


def _quad_table():
    digits = {"A": 0, "C": 1, "G": 2, "T": 3, "N": 0}
    table = {}
    for k in range(1, 5):
        for combo in itertools.product("ACGTN", repeat=k):
            v = 0
            for ch in combo:
                v = (v << 2) | digits[ch]
            table["".join(combo)] = v << 2 * (4 - k)
    return table


_QUADS = _quad_table()


@dataclass(frozen=True, slots=True)
class EncodedSequence:
    codec: str
    payload: bytes
    original_length: int
    n_exceptions: tuple[int, ...] = ()

    def serialize(self) -> bytes:
        """Codec tag byte, 4-byte length, [4-byte exception count and positions], payload."""
        if self.codec == "text":
            return struct.pack("<BI", _TEXT, self.original_length) + self.payload
        head = struct.pack(f"<BII{len(self.n_exceptions)}I", _PACKED, self.original_length,
                           len(self.n_exceptions), *self.n_exceptions)
        return head + self.payload

    @property
    def serialized_size(self) -> int:
        if self.codec == "text":
            return 5 + len(self.payload)
        return 9 + 4 * len(self.n_exceptions) + len(self.payload)

    @classmethod
    def deserialize(cls, data: bytes, offset: int = 0) -> tuple["EncodedSequence", int]:
        """Decode one serialized value at ``offset``; returns (value, next offset)."""
        tag, length = struct.unpack_from("<BI", data, offset)
        offset += 5
        if tag == _TEXT:
            return cls("text", bytes(data[offset:offset + length]), length), offset + length
        (n_exc,) = struct.unpack_from("<I", data, offset)
        offset += 4
        exceptions = struct.unpack_from(f"<{n_exc}I", data, offset)
        offset += 4 * n_exc
        size = packed_size(length)
        return cls("packed2bit", bytes(data[offset:offset + size]), length, exceptions), offset + size


def packed_size(length: int) -> int:
    return (length + 3) // 4


def encode_packed2bit(seq: str) -> EncodedSequence:
    if len(seq) < _SHORT:
        try:
            payload = bytes([_QUADS[seq[i:i + 4]] for i in range(0, len(seq), 4)])
        except KeyError:
            pass  # let the vectorized path name the bad symbols
        else:
            exceptions = ()
            if "N" in seq:
                exceptions = tuple(i for i, ch in enumerate(seq, 1) if ch == "N")
            return EncodedSequence("packed2bit", payload, len(seq), exceptions)
    raw = np.frombuffer(seq.encode("ascii"), dtype=np.uint8)
    codes = _CODE[raw]
    if (codes == 255).any():
        bad = sorted({chr(c) for c in raw[codes == 255]})
        raise ValueError(f"cannot pack symbols {bad}")
    exceptions = tuple((np.flatnonzero(raw == _N) + 1).tolist())
    n = len(raw)
    padded = np.zeros(packed_size(n) * 4, dtype=np.uint8)
    padded[:n] = codes
    quads = padded.reshape(-1, 4)
    payload = (quads[:, 0] << 6) | (quads[:, 1] << 4) | (quads[:, 2] << 2) | quads[:, 3]
    return EncodedSequence("packed2bit", payload.astype(np.uint8).tobytes(), n, exceptions)


def decode_packed2bit(enc: EncodedSequence) -> str:
    if enc.codec != "packed2bit":
        raise ValueError(f"not a packed2bit value: {enc.codec}")
    packed = np.frombuffer(enc.payload, dtype=np.uint8)
    codes = np.stack([packed >> 6, (packed >> 4) & 3, (packed >> 2) & 3, packed & 3], axis=1)
    letters = _LETTERS[codes.ravel()[:enc.original_length]]
    if enc.n_exceptions:
        letters[np.asarray(enc.n_exceptions, dtype=np.int64) - 1] = _N
    return letters.tobytes().decode("ascii")


def encode_text(seq: str) -> EncodedSequence:
    payload = seq.encode("ascii")
    return EncodedSequence("text", payload, len(payload))


def encode_sequence(seq: str) -> EncodedSequence:
    """Pick packed2bit, falling back to text when more than a quarter is N."""
    if seq and seq.count("N") > N_FALLBACK_FRACTION * len(seq):
        return encode_text(seq)
    return encode_packed2bit(seq)


def decode_sequence(enc: EncodedSequence) -> str:
    if enc.codec == "text":
        return enc.payload.decode("ascii")
    return decode_packed2bit(enc)


# -- varints -----------------------------------------------------------------

def _put_varint(out: bytearray, value: int):
    while value >= 0x80:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    out.append(value)


def _get_varint(data, pos):
    result = shift = 0
    while True:
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if byte < 0x80:
            return result, pos
        shift += 7


def _shared_prefix(a: bytes, b: bytes) -> int:
    n = min(len(a), len(b))
    if a[:n] == b[:n]:
        return n
    i = 0
    while a[i] == b[i]:
        i += 1
    return i


# -- blockdict ----------------------------------------------------------------

def _encode_block(values: list[bytes]) -> bytes:
    anchor = Counter(values).most_common(1)[0][0]
    pairs = []
    for v in values:
        p = _shared_prefix(anchor, v)
        pairs.append((p, v[p:]))
    counts = Counter(pairs)
    dictionary = {}
    for pair in pairs:
        if counts[pair] > 1 and pair not in dictionary:
            dictionary[pair] = len(dictionary)
    out = bytearray()
    _put_varint(out, len(values))
    _put_varint(out, len(anchor))
    out += anchor
    _put_varint(out, len(dictionary))
    for plen, suffix in dictionary:
        _put_varint(out, plen)
        _put_varint(out, len(suffix))
        out += suffix
    for pair in pairs:
        idx = dictionary.get(pair)
        if idx is not None:
            _put_varint(out, (idx << 1) | 1)
        else:
            plen, suffix = pair
            _put_varint(out, plen << 1)
            _put_varint(out, len(suffix))
            out += suffix
    return bytes(out)


def _decode_block(data, pos):
    n_rows, pos = _get_varint(data, pos)
    alen, pos = _get_varint(data, pos)
    anchor = bytes(data[pos:pos + alen])
    pos += alen
    n_dict, pos = _get_varint(data, pos)
    dictionary = []
    for _ in range(n_dict):
        plen, pos = _get_varint(data, pos)
        slen, pos = _get_varint(data, pos)
        dictionary.append(anchor[:plen] + bytes(data[pos:pos + slen]))
        pos += slen
    values = []
    for _ in range(n_rows):
        code, pos = _get_varint(data, pos)
        if code & 1:
            values.append(dictionary[code >> 1])
        else:
            slen, pos = _get_varint(data, pos)
            values.append(anchor[:code >> 1] + bytes(data[pos:pos + slen]))
            pos += slen
    return values, pos


def iter_blocks(seqs: Sequence[str], block_size: int = DEFAULT_BLOCK_SIZE):
    """Split rows into blocks; a block closes once its text reaches ``block_size`` bytes."""
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    block, size = [], 0
    for s in seqs:
        block.append(s)
        size += len(s)
        if size >= block_size:
            yield block
            block, size = [], 0
    if block:
        yield block


def encode_blockdict(seqs: Sequence[str], block_size: int = DEFAULT_BLOCK_SIZE) -> bytes:
    """Encode a batch of sequences; the result is a varint block count then the blocks."""
    out = bytearray()
    blocks = [_encode_block([s.encode("ascii") for s in block]) for block in iter_blocks(seqs, block_size)]
    _put_varint(out, len(blocks))
    for block in blocks:
        out += block
    return bytes(out)


def decode_blockdict(data: bytes) -> list[str]:
    n_blocks, pos = _get_varint(data, 0)
    result = []
    for _ in range(n_blocks):
        values, pos = _decode_block(data, pos)
        result.extend(v.decode("ascii") for v in values)
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} trailing bytes after blockdict batch")
    return result
