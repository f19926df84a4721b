"""Chunk-buffered streaming readers and writers for FASTQ and FASTA.

The readers pull fixed-size chunks from a byte source into one reusable
buffer and parse records out of it.  When a chunk ends in the middle of a
record, the unfinished bytes are moved to the front of the buffer and the
rest of the buffer is refilled from the source (the "paging" step).  A
FASTQ record therefore has to fit into the buffer; FASTA records may be
arbitrarily long because FASTA is parsed line by line and over-long lines
are spilled out of the buffer.

Usage::

    with open_fastq("lane1.fastq") as reader:
        for rec in reader:
            ...
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import CapacityError, FormatError, SourceIOError
from .seqcore import MAX_PHRED, PHRED_OFFSET

DEFAULT_BUFFER_SIZE = 64 * 1024

_QUAL_DECODE = bytes((c - PHRED_OFFSET) % 256 for c in range(256))
_QUAL_ENCODE = bytes((c + PHRED_OFFSET) % 256 for c in range(256))
_QUAL_CHARS = bytes(range(PHRED_OFFSET, PHRED_OFFSET + MAX_PHRED + 1))
_AT, _PLUS, _GT, _LF, _CR = 64, 43, 62, 10, 13


@dataclass(frozen=True, slots=True)
class FastqRecord:
    """One FASTQ entry.  ``qual`` holds raw Phred scores, not ASCII.

    ``plus`` keeps whatever followed the ``+`` separator (old pipelines
    repeated the read name there).  It does not take part in equality.
    """

    name: str
    seq: str
    qual: bytes
    plus: str = field(default="", compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class FastaRecord:
    name: str
    seq: str


class _Malformed(Exception):
    # raised by the entry parsers with a buffer-relative position
    def __init__(self, pos, message):
        self.pos = pos
        self.message = message


def _open_source(source):
    if isinstance(source, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(source)), True
    if isinstance(source, (str, os.PathLike)):
        return open(source, "rb", buffering=0), True
    return source, False


class ChunkReader:
    """Buffer management shared by the FASTQ and FASTA readers.

    Attributes mirror the iterator state: ``file_pos`` counts bytes taken
    from the source, ``buffer_pos`` is the parse cursor, ``bytes_read`` the
    number of valid bytes in the buffer and ``buffer_offset`` the length of
    a partial entry carried over to the buffer start for the next refill.
    """

    def __init__(self, source, buffer_size: int = DEFAULT_BUFFER_SIZE):
        if buffer_size < 1:
            raise ValueError(f"buffer_size must be positive, got {buffer_size}")
        self._source, self._owns_source = _open_source(source)
        self._readinto = getattr(self._source, "readinto", None)
        self.buffer = bytearray(buffer_size)
        self.buffer_size = buffer_size
        self.file_pos = 0
        self.buffer_pos = 0
        self.buffer_offset = 0
        self.buffer_base = 0  # source offset of buffer[0]
        self.records = 0
        self._eof = False
        self.bytes_read = self.read_chunk()
        if self.bytes_read == 0:
            self._eof = True

    def read_chunk(self) -> int:
        """Refill the buffer behind any carried-over bytes.

        Returns the number of valid bytes now in the buffer (carried plus
        new), or 0 once the source is exhausted.
        """
        length = self.buffer_size - self.buffer_offset
        try:
            if self._readinto is not None:
                with memoryview(self.buffer) as view:
                    read = self._readinto(view[self.buffer_offset:]) or 0
            else:
                data = self._source.read(length)
                read = len(data)
                self.buffer[self.buffer_offset:self.buffer_offset + read] = data
        except OSError as exc:
            raise SourceIOError(f"read failed: {exc}", offset=self.file_pos) from exc
        self.buffer_base = self.file_pos - self.buffer_offset
        self.file_pos += read
        self.buffer_pos = 0
        if read > 0 and self.buffer_offset > 0:
            read += self.buffer_offset
            self.buffer_offset = 0
        return read

    def _refill(self) -> bool:
        """Pull the next chunk; at end of source expose any carried bytes.

        Returns False when nothing is left to parse.
        """
        self.bytes_read = self.read_chunk()
        if self.bytes_read == 0:
            self._eof = True
            if self.buffer_offset == 0:
                return False
            self.bytes_read, self.buffer_offset = self.buffer_offset, 0
        return True

    def _page(self):
        # move the unfinished entry to the buffer start; next loop refills
        tail = self.bytes_read - self.buffer_pos
        self.buffer[:tail] = self.buffer[self.buffer_pos:self.bytes_read]
        self.buffer_offset = tail
        self.buffer_pos = self.bytes_read

    def next_record(self):
        """Return the next record, or ``None`` at end of stream."""
        return next(self, None)

    def close(self):
        if self._owns_source and self._source is not None:
            self._source.close()
        self._source = None

    def __iter__(self):
        return self

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _line_end(buf, start, nl):
    # exclusive end of line content, dropping a CR before the LF
    if nl > start and buf[nl - 1] == _CR:
        return nl - 1
    return nl


def _parse_fastq_entry(buf, pos, end, final, materialize=True):
    """Parse one FASTQ record at ``buf[pos:end]``.

    Returns ``(consumed, record)``; ``consumed == 0`` means the entry is
    incomplete and needs more data.  ``record`` is None when only blank
    lines were consumed.  With ``final`` the data ends at ``end`` and a
    missing last newline is tolerated.
    """
    start = pos
    while pos < end and (buf[pos] == _LF or buf[pos] == _CR):
        pos += 1
    if pos >= end:
        return pos - start, None
    if buf[pos] != _AT:
        raise _Malformed(pos, "expected '@' at start of FASTQ record")
    e1 = buf.find(b"\n", pos, end)
    e2 = buf.find(b"\n", e1 + 1, end) if e1 >= 0 else -1
    e3 = buf.find(b"\n", e2 + 1, end) if e2 >= 0 else -1
    e4 = buf.find(b"\n", e3 + 1, end) if e3 >= 0 else -1
    if e4 < 0:
        if not final:
            return 0, None
        if e3 < 0:
            raise _Malformed(pos, "truncated FASTQ record at end of input")
        e4 = end
        consumed = end - start
    else:
        consumed = e4 + 1 - start
    l1 = _line_end(buf, pos, e1)
    l2 = _line_end(buf, e1 + 1, e2)
    l3 = _line_end(buf, e2 + 1, e3)
    l4 = _line_end(buf, e3 + 1, e4)
    if l3 <= e2 + 1 or buf[e2 + 1] != _PLUS:
        raise _Malformed(e2 + 1, "expected '+' separator line")
    if l2 - (e1 + 1) != l4 - (e3 + 1):
        raise _Malformed(
            pos,
            f"sequence length {l2 - e1 - 1} differs from quality length {l4 - e3 - 1}",
        )
    qual = bytes(buf[e3 + 1:l4])
    if qual.translate(None, _QUAL_CHARS):
        raise _Malformed(e3 + 1, "quality characters outside the Phred+33 range")
    if not materialize:
        return consumed, True
    try:
        name = buf[pos + 1:l1].decode()
        seq = buf[e1 + 1:l2].upper().decode("ascii")
        plus = buf[e2 + 2:l3].decode() if l3 > e2 + 2 else ""
    except UnicodeDecodeError:
        raise _Malformed(pos, "non-ASCII bytes in FASTQ record") from None
    return consumed, FastqRecord(name, seq, qual.translate(_QUAL_DECODE), plus)


class FastqReader(ChunkReader):
    """Pull iterator over :class:`FastqRecord`.

    With ``materialize=False`` the reader still checks record structure
    but yields ``True`` instead of building records (used for counting).
    """

    def __init__(self, source, buffer_size: int = DEFAULT_BUFFER_SIZE, materialize: bool = True):
        self._materialize = materialize
        super().__init__(source, buffer_size)

    def __next__(self):
        while True:
            if self.buffer_pos >= self.bytes_read:
                if self._eof or not self._refill():
                    raise StopIteration
            try:
                used, rec = _parse_fastq_entry(
                    self.buffer, self.buffer_pos, self.bytes_read, self._eof, self._materialize
                )
            except _Malformed as bad:
                raise FormatError(
                    bad.message, offset=self.buffer_base + bad.pos, ordinal=self.records + 1
                ) from None
            if used:
                self.buffer_pos += used
                if rec is None:
                    continue
                self.records += 1
                return rec
            if self._eof:  # pragma: no cover - parser raises on truncation
                raise FormatError("truncated FASTQ record", offset=self.buffer_base + self.buffer_pos)
            if self.bytes_read - self.buffer_pos >= self.buffer_size:
                raise self._capacity_error()
            self._page()

    def _capacity_error(self):
        # read ahead just far enough to report how large the record is
        offset = self.buffer_base + self.buffer_pos
        data = bytearray(self.buffer[self.buffer_pos:self.bytes_read])
        required = None
        while required is None:
            chunk = self._source.read(self.buffer_size) if self._source else b""
            if chunk:
                data += chunk
            try:
                used, _ = _parse_fastq_entry(data, 0, len(data), not chunk, False)
            except _Malformed:
                used = len(data)
            if used:
                required = used
            elif not chunk:
                required = len(data)
        return CapacityError(required, self.buffer_size, offset=offset, ordinal=self.records + 1)


class FastaReader(ChunkReader):
    """Pull iterator over :class:`FastaRecord`; multi-line sequences are joined."""

    def __init__(self, source, buffer_size: int = DEFAULT_BUFFER_SIZE):
        self._name = None
        self._pieces: list[bytes] = []
        self._spill = None
        super().__init__(source, buffer_size)

    def _emit(self):
        seq = b"".join(self._pieces).upper()
        self._pieces = []
        try:
            text = seq.decode("ascii")
        except UnicodeDecodeError:
            raise FormatError(f"non-ASCII sequence in FASTA record {self._name!r}") from None
        return FastaRecord(self._name, text)

    def __next__(self):
        buf = self.buffer
        while True:
            if self.buffer_pos >= self.bytes_read:
                if self._eof or not self._refill():
                    if self._name is None:
                        raise StopIteration
                    rec = self._emit()
                    self._name = None
                    self.records += 1
                    return rec
            pos, end = self.buffer_pos, self.bytes_read
            nl = buf.find(b"\n", pos, end)
            if nl < 0:
                if not self._eof:
                    if end - pos >= self.buffer_size:
                        # a single line fills the buffer: spill it, keep going
                        if self._spill is None:
                            self._spill = bytearray()
                        self._spill += buf[pos:end]
                        self.buffer_pos = end
                    else:
                        self._page()
                    continue
                nl = end
            line_offset = self.buffer_base + pos
            line = buf[pos:nl]
            self.buffer_pos = nl + 1 if nl < end else end
            if self._spill is not None:
                line_offset -= len(self._spill)
                line = self._spill + line
                self._spill = None
            line = line.strip()
            if not line:
                continue
            if line[0] == _GT:
                previous = self._emit() if self._name is not None else None
                try:
                    self._name = line[1:].decode()
                except UnicodeDecodeError:
                    raise FormatError(
                        "undecodable FASTA header", offset=line_offset, ordinal=self.records + 1
                    ) from None
                if previous is not None:
                    self.records += 1
                    return previous
            elif self._name is None:
                raise FormatError(
                    "sequence data before the first '>' header",
                    offset=line_offset,
                    ordinal=self.records + 1,
                )
            else:
                self._pieces.append(bytes(line))


def open_fastq(source, buffer_size: int = DEFAULT_BUFFER_SIZE) -> FastqReader:
    """Open a lazy FASTQ record iterator over a path, bytes, or binary stream."""
    return FastqReader(source, buffer_size)


def open_fasta(source, buffer_size: int = DEFAULT_BUFFER_SIZE) -> FastaReader:
    return FastaReader(source, buffer_size)


def next_record(reader: ChunkReader):
    """Advance ``reader``; returns None at end of stream."""
    return reader.next_record()


def sniff_format(path) -> str:
    """Guess ``"fastq"`` or ``"fasta"`` from the first non-blank byte."""
    with open(path, "rb") as fh:
        head = fh.read(4096).lstrip()
    if head.startswith(b"@"):
        return "fastq"
    if head.startswith(b">"):
        return "fasta"
    if not head:
        return "fastq"
    raise FormatError(f"{os.fspath(path)!r} is neither FASTQ nor FASTA", offset=0)


def _count_clean_fastq(buf, pos, end) -> tuple[int, int]:
    """Count the leading run of complete, plain LF-terminated records.

    Returns ``(records, bytes)``.  Stops before the first record with
    anything the full parser would have to look at more closely.
    """
    arr = np.frombuffer(buf, dtype=np.uint8, count=end)[pos:]
    nl = np.flatnonzero(arr == _LF)
    n = len(nl) // 4
    if n == 0:
        return 0, 0
    nl = nl[:4 * n]
    starts = np.empty_like(nl)
    starts[0] = 0
    starts[1:] = nl[:-1] + 1
    lens = nl - starts
    ok = (arr[starts[0::4]] == _AT) & (arr[starts[2::4]] == _PLUS) & (lens[1::4] == lens[3::4])
    stray = arr[:nl[-1]]
    stray = np.flatnonzero(((stray < PHRED_OFFSET) | (stray > PHRED_OFFSET + MAX_PHRED)) & (stray != _LF))
    if len(stray):
        line = np.searchsorted(nl, stray)
        ok[line[line % 4 == 3] // 4] = False
    good = n if ok.all() else int(np.argmin(ok))
    used = int(nl[4 * good - 1]) + 1 if good else 0
    del arr, stray
    return good, used


def count_records(source, fmt: str = "fastq", buffer_size: int = DEFAULT_BUFFER_SIZE) -> int:
    """Count records by streaming chunks, without building record objects.

    FASTQ records are structurally checked.  FASTA records are counted as
    header lines (a ``>`` at a line start); only data before the first
    header is rejected.
    """
    if fmt == "fastq":
        count = 0
        with FastqReader(source, buffer_size, materialize=False) as reader:
            while True:
                if reader.buffer_pos < reader.bytes_read:
                    n, used = _count_clean_fastq(reader.buffer, reader.buffer_pos, reader.bytes_read)
                    reader.buffer_pos += used
                    reader.records += n
                    count += n
                # one record the slow way: paging, CRLF, blank lines and errors
                if next(reader, None) is None:
                    return count
                count += 1
    if fmt != "fasta":
        raise ValueError(f"unknown format {fmt!r}")
    with ChunkReader(source, buffer_size) as reader:
        count = 0
        at_line_start = True
        seen_data = False
        n = reader.bytes_read
        while n:
            chunk = reader.buffer if n == reader.buffer_size else reader.buffer[:n]
            if not seen_data:
                stripped = bytes(chunk).lstrip()
                if stripped:
                    if stripped[0] != _GT:
                        raise FormatError(
                            "sequence data before the first '>' header",
                            offset=reader.buffer_base + n - len(stripped),
                        )
                    seen_data = True
            count += chunk.count(b"\n>", 0, n)
            if at_line_start and chunk[0] == _GT:
                count += 1
            at_line_start = chunk[n - 1] == _LF
            n = reader.read_chunk()
        return count


def count_fasta_range(path, start: int, end: int, buffer_size: int = DEFAULT_BUFFER_SIZE) -> int:
    """Count FASTA headers whose ``>`` lies at a byte offset in ``[start, end)``.

    Disjoint ranges covering a file add up to :func:`count_records`, so a
    large file can be counted by several workers.
    """
    count = 0
    try:
        with open(path, "rb") as fh:
            prev = b"\n"
            if start > 0:
                fh.seek(start - 1)
                prev = fh.read(1)
            pos = start
            while pos < end:
                chunk = fh.read(min(buffer_size, end - pos))
                if not chunk:
                    break
                if prev == b"\n" and chunk[0] == _GT:
                    count += 1
                count += chunk.count(b"\n>")
                prev = chunk[-1:]
                pos += len(chunk)
    except OSError as exc:
        raise SourceIOError(f"cannot read {os.fspath(path)!r}: {exc}") from None
    return count


def write_fastq(records: Iterable[FastqRecord], sink: BinaryIO) -> int:
    """Write records as 4-line FASTQ with Phred+33 qualities; returns bytes written."""
    total = 0
    for rec in records:
        qual = bytes(rec.qual)
        if len(qual) != len(rec.seq):
            raise ValueError(f"record {rec.name!r}: sequence and quality lengths differ")
        if qual and max(qual) > MAX_PHRED:
            raise ValueError(f"record {rec.name!r}: quality score above {MAX_PHRED}")
        data = b"".join((
            b"@", rec.name.encode(), b"\n", rec.seq.encode("ascii"), b"\n+\n",
            qual.translate(_QUAL_ENCODE), b"\n",
        ))
        sink.write(data)
        total += len(data)
    return total


def write_fasta(records: Iterable[FastaRecord], sink: BinaryIO, line_width: int = 60) -> int:
    """Write FASTA, wrapping sequence lines at ``line_width`` (0 = no wrapping)."""
    total = 0
    for rec in records:
        total += _write_fasta_chunks(rec.name, (rec.seq,), sink, line_width)
    return total


def _write_fasta_chunks(name: str, chunks: Iterable[str], sink: BinaryIO, line_width: int = 60) -> int:
    # streams sequence text arriving in arbitrary pieces, re-wrapping it
    header = b">" + name.encode() + b"\n"
    sink.write(header)
    total = len(header)
    pending = ""
    for chunk in chunks:
        pending += chunk
        if line_width and len(pending) >= line_width:
            cut = len(pending) - len(pending) % line_width
            body = pending[:cut]
            data = "\n".join(body[i:i + line_width] for i in range(0, cut, line_width)) + "\n"
            sink.write(data.encode("ascii"))
            total += len(data)
            pending = pending[cut:]
    if pending:
        data = pending + "\n"
        sink.write(data.encode("ascii"))
        total += len(data)
    return total


def iter_fastq(source, buffer_size: int = DEFAULT_BUFFER_SIZE) -> Iterator[FastqRecord]:
    """Generator wrapper that closes the source when exhausted."""
    with open_fastq(source, buffer_size) as reader:
        yield from reader


def iter_fasta(source, buffer_size: int = DEFAULT_BUFFER_SIZE) -> Iterator[FastaRecord]:
    with open_fasta(source, buffer_size) as reader:
        yield from reader
