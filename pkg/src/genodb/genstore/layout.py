"""Byte layouts of catalog rows.

Every catalog row is serialized little-endian with 8-byte surrogate ids,
4-byte integers and 4-byte length-prefixed byte strings.  The same
encoders are used to persist a store and to account storage, so the
storage report measures exactly what would be written.

Short reads are clustered by ``read_id``: a read row carries no lane or
sample columns; the lane-run row covering its id range does.  The quality
string follows the sequence without its own length prefix because both
always have the same length.
"""

from __future__ import annotations

import struct
import uuid
from dataclasses import dataclass

from ..seqcore import (
    Alignment,
    GeneExpression,
    ReferenceSequence,
    SampleKey,
    Strand,
    Tag,
)
from .codecs import EncodedSequence

_U32 = struct.Struct("<I")
_ID = struct.Struct("<Q")
_ID2 = struct.Struct("<QQ")
_ID3 = struct.Struct("<QQQ")
_READ_HEAD = struct.Struct("<QIII")
_LANE_RUN = struct.Struct("<QQQQQIQI")
_TAG_HEAD = struct.Struct("<QQQQII")
_ALIGNMENT = struct.Struct("<QQQQIQQII")
_EXPRESSION = struct.Struct("<QQQQII")
_BLOB_HEAD = struct.Struct("<16sQQQIQ32s")

TARGET_KINDS = ("tag", "read")


@dataclass(frozen=True, slots=True)
class Flowcell:
    flowcell_id: int
    instrument: str
    flowcell: str


@dataclass(frozen=True, slots=True)
class LaneRun:
    """A contiguous range of read ids imported from one lane of one flowcell."""

    lane_run_id: int
    sample: SampleKey
    flowcell_id: int
    lane: int
    first_read_id: int
    read_count: int


@dataclass(frozen=True, slots=True)
class RawRead:
    """A FASTQ entry kept exactly as its four text lines (minus sentinels)."""

    name: str
    seq: str
    plus: str
    qual: bytes  # Phred+33 ASCII, as in the file


@dataclass(frozen=True, slots=True)
class BlobEntry:
    guid: uuid.UUID
    sample: SampleKey
    lane: int
    path: str
    byte_length: int
    format_tag: str
    sha256: bytes


def lp(data: bytes) -> bytes:
    return _U32.pack(len(data)) + data


def read_lp(buf, pos):
    (n,) = _U32.unpack_from(buf, pos)
    pos += 4
    return bytes(buf[pos:pos + n]), pos + n


def text_row(fields) -> bytes:
    """A row of length-prefixed text columns (the file-mimicking layout)."""
    return b"".join(lp(f.encode() if isinstance(f, str) else f) for f in fields)


def text_row_size(fields) -> int:
    return sum(4 + len(f.encode() if isinstance(f, str) else f) for f in fields)


# -- encoders -----------------------------------------------------------------

def encode_experiment(experiment_id: int) -> bytes:
    return _ID.pack(experiment_id)


def encode_sample_group(key: tuple[int, int]) -> bytes:
    return _ID2.pack(*key)


def encode_sample(sample: SampleKey) -> bytes:
    return _ID3.pack(sample.experiment_id, sample.sample_group_id, sample.sample_id)


def encode_flowcell(fc: Flowcell) -> bytes:
    return _ID.pack(fc.flowcell_id) + lp(fc.instrument.encode()) + lp(fc.flowcell.encode())


def encode_lane_run(run: LaneRun) -> bytes:
    s = run.sample
    return _LANE_RUN.pack(run.lane_run_id, s.experiment_id, s.sample_group_id, s.sample_id,
                          run.flowcell_id, run.lane, run.first_read_id, run.read_count)


def encode_read(read, seq_column: bytes | None = None) -> bytes:
    """Normalized read row.  ``seq_column`` replaces the plain text sequence
    (pass an encoded value, or ``b""`` to leave the column out)."""
    c = read.coords
    if seq_column is None:
        seq_column = lp(read.seq.encode("ascii"))
    return _READ_HEAD.pack(read.read_id, c.tile, c.x, c.y) + seq_column + bytes(read.qual)


def read_row_size(read, seq_column_size: int | None = None) -> int:
    if seq_column_size is None:
        seq_column_size = 4 + len(read.seq)
    return _READ_HEAD.size + seq_column_size + len(read.qual)


def encode_raw_read(raw: RawRead) -> bytes:
    return text_row((raw.name, raw.seq, raw.plus, raw.qual))


def encode_tag(tag: Tag, seq_column: bytes | None = None) -> bytes:
    s = tag.sample
    if seq_column is None:
        seq_column = lp(tag.seq.encode("ascii"))
    return _TAG_HEAD.pack(tag.tag_id, s.experiment_id, s.sample_group_id, s.sample_id,
                          tag.frequency, tag.rank) + seq_column


def encode_reference(ref: ReferenceSequence, seq_column: bytes | None = None) -> bytes:
    if seq_column is None:
        seq_column = lp(ref.seq.encode("ascii"))
    return _ID.pack(ref.ref_id) + lp(ref.name.encode()) + seq_column


def encode_alignment(a: Alignment) -> bytes:
    s = a.sample
    return _ALIGNMENT.pack(a.alignment_id, s.experiment_id, s.sample_group_id, s.sample_id,
                           TARGET_KINDS.index(a.target_kind), a.target_id, a.gene_id, a.pos,
                           0 if a.strand == Strand.FORWARD else 1)


def encode_expression(g: GeneExpression) -> bytes:
    s = g.sample
    return _EXPRESSION.pack(g.gene_id, s.experiment_id, s.sample_group_id, s.sample_id,
                            g.total_frequency, g.tag_count)


def encode_blob(b: BlobEntry) -> bytes:
    s = b.sample
    head = _BLOB_HEAD.pack(b.guid.bytes, s.experiment_id, s.sample_group_id, s.sample_id,
                           b.lane, b.byte_length, b.sha256)
    return head + lp(b.format_tag.encode()) + lp(b.path.encode())


def encode_encoded_seq(enc: EncodedSequence) -> bytes:
    return enc.serialize()


# -- decoders: each returns (row, next position) ---------------------------------

def decode_experiment(buf, pos):
    return _ID.unpack_from(buf, pos)[0], pos + _ID.size


def decode_sample_group(buf, pos):
    return _ID2.unpack_from(buf, pos), pos + _ID2.size


def decode_sample(buf, pos):
    return SampleKey(*_ID3.unpack_from(buf, pos)), pos + _ID3.size


def decode_flowcell(buf, pos):
    (fid,) = _ID.unpack_from(buf, pos)
    inst, pos = read_lp(buf, pos + 8)
    fc, pos = read_lp(buf, pos)
    return Flowcell(fid, inst.decode(), fc.decode()), pos


def decode_lane_run(buf, pos):
    rid, e, g, s, fid, lane, first, count = _LANE_RUN.unpack_from(buf, pos)
    return LaneRun(rid, SampleKey(e, g, s), fid, lane, first, count), pos + _LANE_RUN.size


def decode_read_row(buf, pos):
    """Returns ((read_id, tile, x, y, seq, qual), next position)."""
    read_id, tile, x, y = _READ_HEAD.unpack_from(buf, pos)
    seq, pos = read_lp(buf, pos + _READ_HEAD.size)
    qual = bytes(buf[pos:pos + len(seq)])
    return (read_id, tile, x, y, seq.decode("ascii"), qual), pos + len(seq)


def decode_raw_read(buf, pos):
    name, pos = read_lp(buf, pos)
    seq, pos = read_lp(buf, pos)
    plus, pos = read_lp(buf, pos)
    qual, pos = read_lp(buf, pos)
    return RawRead(name.decode(), seq.decode("ascii"), plus.decode(), qual), pos


def decode_tag(buf, pos):
    tid, e, g, s, freq, rank = _TAG_HEAD.unpack_from(buf, pos)
    seq, pos = read_lp(buf, pos + _TAG_HEAD.size)
    return Tag(tid, SampleKey(e, g, s), seq.decode("ascii"), freq, rank), pos


def decode_reference(buf, pos):
    (rid,) = _ID.unpack_from(buf, pos)
    name, pos = read_lp(buf, pos + 8)
    seq, pos = read_lp(buf, pos)
    return ReferenceSequence(rid, name.decode(), seq.decode("ascii")), pos


def decode_alignment(buf, pos):
    aid, e, g, s, kind, target, gene, apos, strand = _ALIGNMENT.unpack_from(buf, pos)
    a = Alignment(aid, SampleKey(e, g, s), target, gene, apos,
                  Strand.FORWARD if strand == 0 else Strand.REVERSE, TARGET_KINDS[kind])
    return a, pos + _ALIGNMENT.size


def decode_expression(buf, pos):
    gid, e, g, s, total, count = _EXPRESSION.unpack_from(buf, pos)
    return GeneExpression(gid, SampleKey(e, g, s), total, count), pos + _EXPRESSION.size


def decode_blob(buf, pos):
    guid, e, g, s, lane, length, digest = _BLOB_HEAD.unpack_from(buf, pos)
    fmt, pos = read_lp(buf, pos + _BLOB_HEAD.size)
    path, pos = read_lp(buf, pos)
    entry = BlobEntry(uuid.UUID(bytes=guid), SampleKey(e, g, s), lane, path.decode(),
                      length, fmt.decode(), digest)
    return entry, pos
