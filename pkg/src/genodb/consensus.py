"""Consensus calling over stacked, gapless alignments.

Two routes produce the same result:

* :func:`consensus_pivot` explodes every aligned read into per-position
  bases, groups them by (reference, position), calls each column and
  assembles the calls.  Simple and memory hungry; used as the reference.
* :func:`consensus_sliding` scans alignments sorted by (reference, start)
  once, keeping per-base score counters only for the window of positions
  that a later alignment can still reach.  A position is called as soon as
  the scan start passes it.

Calling rule: every entry adds ``qual + 1`` to the score of its base; N
entries add nothing.  The highest score wins, ties go to the
alphabetically first base, and a column without A/C/G/T evidence is N.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple, TextIO

import numpy as np

from .errors import DataError
from .parexec import Timings, default_workers, run_parallel_ordered
from .seqcore import (
    CALLABLE_BASES,
    Alignment,
    ConsensusSequence,
    ReferenceSequence,
    Strand,
    reverse_complement,
)

_CHUNK = 1 << 16
_BASE_CODE = np.full(256, -1, dtype=np.int8)
for _i, _b in enumerate(b"ACGT"):
    _BASE_CODE[_b] = _i
_LETTERS = np.frombuffer(b"ACGT", dtype=np.uint8)
_N = ord("N")


@dataclass(frozen=True, slots=True)
class AlignedRead:
    """An alignment joined with the sequence and qualities it places."""

    alignment: Alignment
    seq: str
    qual: bytes

    @property
    def ref_id(self) -> int:
        return self.alignment.gene_id

    @property
    def pos(self) -> int:
        return self.alignment.pos

    @property
    def end(self) -> int:
        return self.alignment.pos + len(self.seq) - 1

    def oriented(self) -> tuple[str, bytes]:
        """Bases and qualities in reference order (reverse strand complemented)."""
        if self.alignment.strand == Strand.REVERSE:
            return reverse_complement(self.seq), bytes(self.qual)[::-1]
        return self.seq, bytes(self.qual)


class PivotedBase(NamedTuple):
    ref_id: int
    pos: int
    base: str
    qual: int


@dataclass
class PileupColumn:
    ref_id: int
    pos: int
    entries: list = field(default_factory=list)


def _ref_map(refs) -> dict[int, ReferenceSequence]:
    if isinstance(refs, Mapping):
        refs = refs.values()
    return {r.ref_id: r for r in sorted(refs, key=lambda r: r.ref_id)}


def _check_bounds(ar: AlignedRead, ref_length: int):
    if ar.pos < 1 or ar.end > ref_length:
        raise DataError(
            f"alignment {ar.alignment.alignment_id} at {ar.pos}..{ar.end} lies outside "
            f"reference {ar.ref_id} of length {ref_length}")


def pivot_alignment(ar: AlignedRead, ref_length: int | None = None) -> Iterator[PivotedBase]:
    """Yield one (ref, position, base, qual) tuple per aligned base, in reference order."""
    if ref_length is not None:
        _check_bounds(ar, ref_length)
    seq, qual = ar.oriented()
    ref_id, start = ar.ref_id, ar.pos
    for i, (base, q) in enumerate(zip(seq, qual)):
        yield PivotedBase(ref_id, start + i, base, q)


def call_base(column) -> str:
    """Quality-weighted base call for a column (a PileupColumn or (base, qual) pairs)."""
    entries = column.entries if isinstance(column, PileupColumn) else column
    scores = dict.fromkeys(CALLABLE_BASES, 0)
    for base, qual in entries:
        if base in scores:
            scores[base] += qual + 1
    best = "N"
    best_score = 0
    for base in CALLABLE_BASES:
        if scores[base] > best_score:
            best, best_score = base, scores[base]
    return best


def iter_assemble(called: Iterable[tuple[int, str]], ref_length: int) -> Iterator[str]:
    """Stream the consensus string in chunks; uncovered positions become N."""
    parts, size = [], 0
    expected = 1
    for pos, base in called:
        if pos < expected:
            raise DataError(f"position {pos} is out of order or duplicated")
        if pos > ref_length:
            raise DataError(f"position {pos} beyond reference length {ref_length}")
        if pos > expected:
            parts.append("N" * (pos - expected))
            size += pos - expected
        parts.append(base)
        size += 1
        expected = pos + 1
        if size >= _CHUNK:
            yield "".join(parts)
            parts, size = [], 0
    if ref_length >= expected:
        parts.append("N" * (ref_length - expected + 1))
    if parts:
        yield "".join(parts)


def assemble_sequence(called: Iterable[tuple[int, str]], ref_length: int) -> str:
    return "".join(iter_assemble(called, ref_length))


def pileup_columns(alignments: Iterable[AlignedRead], refs) -> Iterator[PileupColumn]:
    """Group pivoted bases into columns ordered by (reference, position)."""
    ref_map = _ref_map(refs)
    groups: dict[int, dict[int, list]] = defaultdict(lambda: defaultdict(list))
    for ar in alignments:
        ref = ref_map.get(ar.ref_id)
        if ref is None:
            raise DataError(f"alignment {ar.alignment.alignment_id}: unknown reference {ar.ref_id}")
        for pb in pivot_alignment(ar, len(ref.seq)):
            groups[pb.ref_id][pb.pos].append((pb.base, pb.qual))
    for ref_id in ref_map:
        columns = groups.get(ref_id, {})
        for pos in sorted(columns):
            yield PileupColumn(ref_id, pos, columns[pos])


def consensus_pivot(alignments: Iterable[AlignedRead], refs) -> dict[int, ConsensusSequence]:
    """Pivot, group by position, call, assemble.  Input order does not matter."""
    ref_map = _ref_map(refs)
    called: dict[int, list] = {ref_id: [] for ref_id in ref_map}
    for col in pileup_columns(alignments, ref_map):
        called[col.ref_id].append((col.pos, call_base(col)))
    return {
        ref_id: ConsensusSequence(ref_id, assemble_sequence(called[ref_id], len(ref.seq)))
        for ref_id, ref in ref_map.items()
    }


def write_pileup_tsv(columns: Iterable[PileupColumn], sink: TextIO) -> None:
    """Debug dump: ref, pos, bases, Phred+33 qualities."""
    sink.write("ref\tpos\tbases\tquals\n")
    for col in columns:
        bases = "".join(b for b, _ in col.entries)
        quals = "".join(chr(q + 33) for _, q in col.entries)
        sink.write(f"{col.ref_id}\t{col.pos}\t{bases}\t{quals}\n")


def _call_rows(scores: np.ndarray) -> str:
    letters = _LETTERS[scores.argmax(axis=1)]
    letters[scores.sum(axis=1) == 0] = _N
    return letters.tobytes().decode("ascii")


class _Window:
    """Score counters for the positions a scan can still reach.

    Positions map onto a ring buffer (``pos % capacity``); everything
    before ``next_pos`` has been called and emitted.  The ring only grows
    when a single alignment is longer than the current capacity.
    """

    def __init__(self, start: int, end: int, capacity: int = 256):
        self.capacity = capacity
        self.scores = np.zeros((capacity, 4), dtype=np.int64)
        self.next_pos = start
        self.end = end
        self.hi = start - 1  # last position holding any score

    def _grow(self, needed: int):
        capacity = max(needed, 2 * self.capacity)
        scores = np.zeros((capacity, 4), dtype=np.int64)
        if self.hi >= self.next_pos:
            live = np.arange(self.next_pos, self.hi + 1)
            scores[live % capacity] = self.scores[live % self.capacity]
        self.capacity, self.scores = capacity, scores

    def add(self, pos: int, codes: np.ndarray, weights: np.ndarray):
        lo = max(pos, self.next_pos)
        hi = min(pos + len(codes) - 1, self.end)
        if lo > hi:
            return
        if hi - self.next_pos + 1 > self.capacity:
            self._grow(hi - self.next_pos + 1)
        seg_codes = codes[lo - pos:hi - pos + 1]
        seg_weights = weights[lo - pos:hi - pos + 1]
        keep = seg_codes >= 0
        positions = np.arange(lo, hi + 1)[keep]
        self.scores[positions % self.capacity, seg_codes[keep]] += seg_weights[keep]
        if hi > self.hi:
            self.hi = hi

    def flush(self, upto: int) -> Iterator[str]:
        """Call and emit every position before ``upto`` (capped at the window end)."""
        upto = min(upto, self.end + 1)
        start = self.next_pos
        if upto <= start:
            return
        covered = min(upto, self.hi + 1)
        while start < covered:
            stop = min(covered, start + _CHUNK)
            idx = np.arange(start, stop) % self.capacity
            block = self.scores[idx]
            self.scores[idx] = 0
            yield _call_rows(block)
            start = stop
        while start < upto:
            stop = min(upto, start + _CHUNK)
            yield "N" * (stop - start)
            start = stop
        self.next_pos = upto


def _encode_read(ar: AlignedRead):
    seq, qual = ar.oriented()
    codes = _BASE_CODE[np.frombuffer(seq.encode("ascii"), dtype=np.uint8)]
    weights = np.frombuffer(qual, dtype=np.uint8).astype(np.int64) + 1
    return codes, weights


def iter_consensus_sliding(alignments: Iterable[AlignedRead], refs,
                           segments: list[tuple[int, int, int]] | None = None
                           ) -> Iterator[tuple[int, str]]:
    """Single ordered scan yielding ``(ref_id, chunk)`` pieces of the consensus.

    ``alignments`` must be sorted by (ref_id, pos).  ``segments`` limits
    output to ``(ref_id, start, end)`` ranges (1-based, inclusive), in
    reference order; by default every reference is emitted in full.
    """
    ref_map = _ref_map(refs)
    if segments is None:
        segments = [(rid, 1, len(ref.seq)) for rid, ref in ref_map.items()]
    seg_iter = iter(segments)
    current = None  # (ref_id, window)
    last_key = None

    def finish():
        rid, window = current
        for chunk in window.flush(window.end + 1):
            yield rid, chunk

    for ar in alignments:
        key = (ar.ref_id, ar.pos)
        if last_key is not None and key < last_key:
            raise DataError(
                f"alignments are not sorted by (reference, position): {key} after {last_key}")
        last_key = key
        ref = ref_map.get(ar.ref_id)
        if ref is None:
            raise DataError(f"alignment {ar.alignment.alignment_id}: unknown reference {ar.ref_id}")
        _check_bounds(ar, len(ref.seq))
        while current is None or current[0] < ar.ref_id:
            if current is not None:
                yield from finish()
            seg = next(seg_iter, None)
            if seg is None:
                current = None
                break
            current = (seg[0], _Window(seg[1], seg[2]))
        if current is None:
            break
        if current[0] != ar.ref_id:
            continue  # alignment on a reference this scan does not emit
        window = current[1]
        for chunk in window.flush(ar.pos):
            yield current[0], chunk
        codes, weights = _encode_read(ar)
        window.add(ar.pos, codes, weights)
    if current is not None:
        yield from finish()
    for rid, start, end in seg_iter:
        window = _Window(start, end)
        for chunk in window.flush(end + 1):
            yield rid, chunk


def _collect(chunks: Iterable[tuple[int, str]], ref_map) -> dict[int, ConsensusSequence]:
    parts: dict[int, list[str]] = {rid: [] for rid in ref_map}
    for rid, chunk in chunks:
        parts[rid].append(chunk)
    return {rid: ConsensusSequence(rid, "".join(p)) for rid, p in parts.items()}


def consensus_sliding(alignments: Iterable[AlignedRead], refs) -> dict[int, ConsensusSequence]:
    """Sliding-window consensus of alignments sorted by (ref_id, pos)."""
    ref_map = _ref_map(refs)
    return _collect(iter_consensus_sliding(alignments, ref_map), ref_map)


@dataclass
class Partition:
    """A contiguous slice of the concatenated reference coordinate space."""

    index: int
    segments: list[tuple[int, int, int]]
    alignments: list[AlignedRead] = field(default_factory=list)


def partition_alignments(alignments: Iterable[AlignedRead], k: int, refs) -> list[Partition]:
    """Split the references into ``k`` contiguous ranges and route alignments.

    An alignment overlapping a range border goes to every partition it
    touches; each partition only emits positions inside its own range.
    """
    if k < 1:
        raise ValueError(f"partition count must be >= 1, got {k}")
    ref_map = _ref_map(refs)
    offsets, total = {}, 0
    for rid, ref in ref_map.items():
        offsets[rid] = total
        total += len(ref.seq)
    bounds = [i * total // k for i in range(k + 1)]
    parts = []
    for i in range(k):
        lo, hi = bounds[i], bounds[i + 1]  # global, 0-based, half-open
        segs = []
        for rid, ref in ref_map.items():
            off = offsets[rid]
            s, e = max(lo, off), min(hi, off + len(ref.seq))
            if s < e:
                segs.append((rid, s - off + 1, e - off))
        parts.append(Partition(i, segs))
    last_key = None
    for ar in alignments:
        key = (ar.ref_id, ar.pos)
        if last_key is not None and key < last_key:
            raise DataError(
                f"alignments are not sorted by (reference, position): {key} after {last_key}")
        last_key = key
        if ar.ref_id not in offsets:
            raise DataError(f"alignment {ar.alignment.alignment_id}: unknown reference {ar.ref_id}")
        g_start = offsets[ar.ref_id] + ar.pos - 1
        g_end = offsets[ar.ref_id] + ar.end  # exclusive
        first = bisect.bisect_right(bounds, g_start) - 1
        for i in range(max(first, 0), k):
            if bounds[i] >= g_end:
                break
            if bounds[i] < bounds[i + 1]:
                parts[i].alignments.append(ar)
    return parts


def consensus_partitioned(alignments: Iterable[AlignedRead], refs, k: int = 1,
                          workers: int | None = None,
                          timings: Timings | None = None) -> dict[int, ConsensusSequence]:
    """Sliding consensus computed over ``k`` reference ranges in parallel."""
    ref_map = _ref_map(refs)
    parts = partition_alignments(alignments, k, ref_map)

    def run(part: Partition):
        return list(iter_consensus_sliding(part.alignments, ref_map, part.segments))

    def finalize(results):
        return _collect((piece for chunks in results for piece in chunks), ref_map)

    return run_parallel_ordered(parts, run, finalize, workers or min(k, default_workers()),
                                timings, name="consensus")
