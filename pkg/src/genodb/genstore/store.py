"""Normalized, surrogate-keyed store with a blob registry for raw files.

A store lives either in memory (``Store()``) or in a directory
(``Store(path)``).  A directory store keeps one append-only ``.cat`` file
per catalog plus a ``blobs/`` directory holding byte-identical copies of
registered read files.  Writers take an exclusive lock on the directory,
readers a shared one.
"""

from __future__ import annotations

import fcntl
import hashlib
import logging
import os
import shutil
import threading
import uuid
from pathlib import Path
from typing import Iterable, Iterator

from .. import fastx
from ..errors import DataError, ReferentialError, SourceIOError
from ..seqcore import (
    MAX_LANE,
    Alignment,
    GeneExpression,
    ReadCoordinates,
    ReferenceSequence,
    SampleKey,
    ShortRead,
    Strand,
    Tag,
    illegal_symbols,
    parse_read_name,
    validate_read,
)
from . import layout
from .layout import BlobEntry, Flowcell, LaneRun, RawRead

log = logging.getLogger(__name__)

FORMAT_TAGS = {"fastq": "FastQ", "fasta": "Fasta", "other": "other"}
_BLOB_NS = uuid.UUID("6f1d8a52-3c1e-4d47-9d0a-2b7c51f0e8a4")
_QUAL_ASCII = bytes((c + 33) % 256 for c in range(256))

# load order respects foreign keys
CATALOGS = (
    "experiments", "sample_groups", "samples", "flowcells", "lane_runs", "reads",
    "reads_1to1", "references", "tags", "alignments", "gene_expression", "blobs",
)

_ENCODERS = {
    "experiments": layout.encode_experiment,
    "sample_groups": layout.encode_sample_group,
    "samples": layout.encode_sample,
    "flowcells": layout.encode_flowcell,
    "lane_runs": layout.encode_lane_run,
    "reads": layout.encode_read,
    "reads_1to1": layout.encode_raw_read,
    "references": layout.encode_reference,
    "tags": layout.encode_tag,
    "alignments": layout.encode_alignment,
    "gene_expression": layout.encode_expression,
    "blobs": layout.encode_blob,
}


def _sha256_file(path) -> bytes:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.digest()


class Store:
    """In-process catalogs for experiments, reads, tags, references, alignments.

    All mutating methods stage their rows first and commit only when the
    whole input was accepted, so a failed import leaves the store as it was.
    """

    def __init__(self, path=None, readonly: bool = False):
        self.path = Path(path) if path is not None else None
        self.readonly = readonly
        self._lock = threading.RLock()
        self._lockfile = None
        self.experiments: dict[int, None] = {}
        self.sample_groups: dict[tuple[int, int], None] = {}
        self.samples: dict[SampleKey, None] = {}
        self.flowcells: list[Flowcell] = []
        self._flowcell_ids: dict[tuple[str, str], int] = {}
        self.lane_runs: list[LaneRun] = []
        self.reads: list[ShortRead] = []
        self.reads_1to1: list[RawRead] = []
        self.references: list[ReferenceSequence] = []
        self._ref_ids: dict[str, int] = {}
        self.tags: list[Tag] = []
        self.alignments: list[Alignment] = []
        self.gene_expression: list[GeneExpression] = []
        self.blobs: dict[uuid.UUID, BlobEntry] = {}
        self._coord_keys: set = set()
        if self.path is not None:
            self._open_dir()

    # -- persistence --------------------------------------------------------

    def _open_dir(self):
        if not self.readonly:
            self.path.mkdir(parents=True, exist_ok=True)
            (self.path / "blobs").mkdir(exist_ok=True)
        elif not self.path.is_dir():
            raise SourceIOError(f"store directory {str(self.path)!r} does not exist")
        self._lockfile = open(self.path / ".lock", "a+b")
        fcntl.flock(self._lockfile, fcntl.LOCK_SH if self.readonly else fcntl.LOCK_EX)
        for name in CATALOGS:
            file = self.path / f"{name}.cat"
            if file.exists():
                self._load_catalog(name, file.read_bytes())

    def _load_catalog(self, name, data):
        pos, end = 0, len(data)
        if name == "reads":
            runs = iter(self.lane_runs)
            run, left, fc = None, 0, None
            while pos < end:
                (read_id, tile, x, y, seq, qual), pos = layout.decode_read_row(data, pos)
                while left == 0:
                    run = next(runs)
                    left = run.read_count
                    fc = self.flowcells[run.flowcell_id - 1]
                coords = ReadCoordinates(fc.instrument, fc.flowcell, run.lane, tile, x, y)
                self._add_read(ShortRead(read_id, run.sample, coords, seq, qual), run.flowcell_id)
                left -= 1
            return
        decode = getattr(layout, {
            "experiments": "decode_experiment", "sample_groups": "decode_sample_group",
            "samples": "decode_sample", "flowcells": "decode_flowcell",
            "lane_runs": "decode_lane_run", "reads_1to1": "decode_raw_read",
            "references": "decode_reference", "tags": "decode_tag",
            "alignments": "decode_alignment", "gene_expression": "decode_expression",
            "blobs": "decode_blob",
        }[name])
        rows = []
        while pos < end:
            row, pos = decode(data, pos)
            rows.append(row)
        self._apply(name, rows)

    def _apply(self, name, rows):
        # install committed rows into the in-memory catalogs
        if name == "experiments":
            self.experiments.update(dict.fromkeys(rows))
        elif name == "sample_groups":
            self.sample_groups.update(dict.fromkeys(rows))
        elif name == "samples":
            self.samples.update(dict.fromkeys(rows))
        elif name == "flowcells":
            for fc in rows:
                self.flowcells.append(fc)
                self._flowcell_ids[(fc.instrument, fc.flowcell)] = fc.flowcell_id
        elif name == "lane_runs":
            self.lane_runs.extend(rows)
        elif name == "reads":
            for read, fc_id in rows:
                self._add_read(read, fc_id)
        elif name == "references":
            for ref in rows:
                self.references.append(ref)
                self._ref_ids[ref.name] = ref.ref_id
        elif name == "blobs":
            for b in rows:
                self.blobs[b.guid] = b
        else:
            getattr(self, name).extend(rows)

    def _add_read(self, read, fc_id):
        c = read.coords
        self.reads.append(read)
        self._coord_keys.add((read.sample, fc_id, c.lane, c.tile, c.x, c.y))

    def _commit(self, staged: dict):
        """Persist and install rows, catalog by catalog in foreign-key order."""
        if self.readonly:
            raise DataError("store was opened read-only")
        for name in CATALOGS:
            rows = staged.get(name)
            if not rows:
                continue
            if self.path is not None:
                encode = _ENCODERS[name]
                with open(self.path / f"{name}.cat", "ab") as fh:
                    if name == "reads":
                        fh.write(b"".join(encode(r) for r, _ in rows))
                    else:
                        fh.write(b"".join(encode(r) for r in rows))
            self._apply(name, rows)

    def close(self):
        if self._lockfile is not None:
            fcntl.flock(self._lockfile, fcntl.LOCK_UN)
            self._lockfile.close()
            self._lockfile = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- samples ------------------------------------------------------------

    def _stage_sample(self, sample: SampleKey, staged: dict):
        e, g = sample.experiment_id, (sample.experiment_id, sample.sample_group_id)
        if e not in self.experiments:
            staged.setdefault("experiments", []).append(e)
        if g not in self.sample_groups:
            staged.setdefault("sample_groups", []).append(g)
        if sample not in self.samples:
            staged.setdefault("samples", []).append(sample)

    # -- imports ------------------------------------------------------------

    def import_fastq_normalized(self, source, sample: SampleKey, lane: int,
                                buffer_size: int = fastx.DEFAULT_BUFFER_SIZE) -> int:
        """Import a lane's FASTQ as normalized short reads; returns reads imported.

        Read names are decomposed into flowcell coordinates.  Re-importing
        a read already stored for the sample (same flowcell coordinates) is
        a :class:`ReferentialError`.
        """
        _check_lane(lane)
        with self._lock:
            staged: dict = {}
            self._stage_sample(sample, staged)
            reads, runs, new_fcs = [], [], []
            fc_ids = dict(self._flowcell_ids)
            seen = set()
            next_id = len(self.reads) + 1
            next_run = len(self.lane_runs) + 1
            run_fc, run_first, run_count = None, next_id, 0
            with fastx.open_fastq(source, buffer_size) as reader:
                for rec in reader:
                    ordinal = reader.records
                    try:
                        coords = parse_read_name(rec.name)
                    except ValueError as exc:
                        raise DataError(f"record {ordinal}: {exc}") from None
                    if coords.lane != lane:
                        raise DataError(
                            f"record {ordinal} ({rec.name}): name says lane {coords.lane}, "
                            f"importing lane {lane}")
                    read = ShortRead(next_id, sample, coords, rec.seq, rec.qual)
                    problems = validate_read(read)
                    if problems:
                        raise DataError(f"record {ordinal} ({rec.name}): {'; '.join(problems)}")
                    fc_key = (coords.instrument, coords.flowcell)
                    fc_id = fc_ids.get(fc_key)
                    if fc_id is None:
                        fc_id = len(fc_ids) + 1
                        fc_ids[fc_key] = fc_id
                        new_fcs.append(Flowcell(fc_id, *fc_key))
                    key = (sample, fc_id, lane, coords.tile, coords.x, coords.y)
                    if key in self._coord_keys or key in seen:
                        raise ReferentialError(
                            f"record {ordinal} ({rec.name}): duplicate coordinates "
                            f"for sample {sample}")
                    seen.add(key)
                    if fc_id != run_fc:
                        if run_count:
                            runs.append(LaneRun(next_run, sample, run_fc, lane, run_first, run_count))
                            next_run += 1
                        run_fc, run_first, run_count = fc_id, next_id, 0
                    run_count += 1
                    reads.append((read, fc_id))
                    next_id += 1
            if run_count:
                runs.append(LaneRun(next_run, sample, run_fc, lane, run_first, run_count))
            staged["flowcells"] = new_fcs
            staged["lane_runs"] = runs
            staged["reads"] = reads
            self._commit(staged)
            log.info("imported %d reads into sample %s lane %d", len(reads), sample, lane)
            return len(reads)

    def import_fastq_1to1(self, source, sample: SampleKey, lane: int,
                          buffer_size: int = fastx.DEFAULT_BUFFER_SIZE) -> int:
        """Import FASTQ keeping each record's text lines verbatim (storage baseline)."""
        _check_lane(lane)
        with self._lock:
            staged: dict = {}
            self._stage_sample(sample, staged)
            with fastx.open_fastq(source, buffer_size) as reader:
                staged["reads_1to1"] = [
                    RawRead(r.name, r.seq, r.plus, r.qual.translate(_QUAL_ASCII)) for r in reader
                ]
            self._commit(staged)
            return len(staged["reads_1to1"])

    # -- blob registry ---------------------------------------------------------

    def register_blob(self, path, sample: SampleKey, lane: int, format_tag: str) -> uuid.UUID:
        """Register a raw read file without parsing it; returns the blob guid."""
        tag = FORMAT_TAGS.get(str(format_tag).lower())
        if tag is None:
            raise DataError(f"unknown format tag {format_tag!r}; expected FastQ, Fasta or other")
        _check_lane(lane)
        src = Path(path)
        if not src.is_file():
            raise SourceIOError(f"no such file: {str(src)!r}")
        with self._lock:
            staged: dict = {}
            self._stage_sample(sample, staged)
            digest = _sha256_file(src)
            guid = uuid.uuid5(_BLOB_NS, f"{len(self.blobs)}:{sample}:{lane}:{digest.hex()}")
            if self.path is not None:
                target = self.path / "blobs" / f"{guid}{src.suffix}"
                shutil.copyfile(src, target)
                stored = str(target)
            else:
                stored = str(src.resolve())
            entry = BlobEntry(guid, sample, lane, stored, os.path.getsize(stored), tag, digest)
            staged["blobs"] = [entry]
            self._commit(staged)
            return guid

    def blob(self, guid) -> BlobEntry:
        key = guid if isinstance(guid, uuid.UUID) else _parse_guid(guid)
        try:
            return self.blobs[key]
        except KeyError:
            raise ReferentialError(f"no blob registered under {guid}") from None

    def list_blob_records(self, guid, buffer_size: int = fastx.DEFAULT_BUFFER_SIZE) -> Iterator:
        """Stream the records of a registered file straight from disk."""
        entry = self.blob(guid)
        if entry.format_tag == "FastQ":
            return fastx.iter_fastq(entry.path, buffer_size)
        if entry.format_tag == "Fasta":
            return fastx.iter_fasta(entry.path, buffer_size)
        raise DataError(f"blob {entry.guid} has format 'other' and cannot be listed")

    # -- references, tags, alignments, expression --------------------------------

    def add_references(self, records: Iterable) -> list[ReferenceSequence]:
        """Add (name, seq) pairs or FastaRecords; names must be new and unique."""
        with self._lock:
            refs, names = [], set()
            next_id = len(self.references) + 1
            for rec in records:
                name, seq = (rec.name, rec.seq) if hasattr(rec, "seq") else rec
                name = name.split(None, 1)[0] if name.strip() else name
                if name in self._ref_ids or name in names:
                    raise ReferentialError(f"reference {name!r} already exists")
                if not seq:
                    raise DataError(f"reference {name!r} is empty")
                bad = illegal_symbols(seq)
                if bad:
                    raise DataError(f"reference {name!r}: illegal symbols {bad}")
                names.add(name)
                refs.append(ReferenceSequence(next_id, name, seq))
                next_id += 1
            self._commit({"references": refs})
            return refs

    def reference(self, ref) -> ReferenceSequence:
        if isinstance(ref, str):
            if ref not in self._ref_ids:
                raise ReferentialError(f"unknown reference {ref!r}")
            ref = self._ref_ids[ref]
        if not 1 <= ref <= len(self.references):
            raise ReferentialError(f"unknown reference id {ref}")
        return self.references[ref - 1]

    def store_tags(self, sample: SampleKey, binned) -> list[Tag]:
        """Materialize binned rows (rank, frequency, seq) as tags of ``sample``."""
        with self._lock:
            if any(t.sample == sample for t in self.tags):
                raise DataError(f"tags for sample {sample} are already stored")
            staged: dict = {}
            self._stage_sample(sample, staged)
            first = len(self.tags) + 1
            staged["tags"] = [
                Tag(first + i, sample, row.seq, row.frequency, row.rank) for i, row in enumerate(binned)
            ]
            self._commit(staged)
            return staged["tags"]

    def target(self, kind: str, target_id: int):
        rows = self.tags if kind == "tag" else self.reads
        if not 1 <= target_id <= len(rows):
            raise ReferentialError(f"{kind} id {target_id} does not exist")
        return rows[target_id - 1]

    def add_alignments(self, rows: Iterable, sample: SampleKey, target_kind: str = "tag") -> int:
        """Store alignments given as (line_no, target_id, ref_name, pos, strand).

        Every row is checked: the target exists and belongs to ``sample``,
        the reference exists, and the placement lies inside the reference.
        """
        if target_kind not in layout.TARGET_KINDS:
            raise ValueError(f"target kind must be 'tag' or 'read', not {target_kind!r}")
        with self._lock:
            staged: dict = {}
            self._stage_sample(sample, staged)
            out = []
            next_id = len(self.alignments) + 1
            for line_no, target_id, ref_name, pos, strand in rows:
                where = f"line {line_no}"
                try:
                    target = self.target(target_kind, target_id)
                    ref = self.reference(ref_name)
                except ReferentialError as exc:
                    raise ReferentialError(f"{where}: {exc}") from None
                if target.sample != sample:
                    raise ReferentialError(
                        f"{where}: {target_kind} {target_id} belongs to sample {target.sample}")
                end = pos + len(target.seq) - 1
                if pos < 1 or end > len(ref.seq):
                    raise DataError(
                        f"{where}: placement {pos}..{end} outside reference {ref.name} "
                        f"(length {len(ref.seq)})")
                out.append(Alignment(next_id, sample, target_id, ref.ref_id, pos,
                                     Strand(strand), target_kind))
                next_id += 1
            staged["alignments"] = out
            self._commit(staged)
            return len(out)

    def store_gene_expression(self, rows: Iterable[GeneExpression]) -> int:
        with self._lock:
            rows = list(rows)
            existing = {(g.gene_id, g.sample) for g in self.gene_expression}
            for g in rows:
                if (g.gene_id, g.sample) in existing:
                    raise DataError(f"expression of gene {g.gene_id} for {g.sample} already stored")
                self.reference(g.gene_id)
            self._commit({"gene_expression": rows})
            return len(rows)

    # -- queries -------------------------------------------------------------

    def reads_for_sample(self, sample: SampleKey) -> Iterator[ShortRead]:
        return (r for r in self.reads if r.sample == sample)

    def tags_for_sample(self, sample: SampleKey) -> list[Tag]:
        return [t for t in self.tags if t.sample == sample]

    def alignments_for_sample(self, sample: SampleKey, target_kind: str | None = None) -> list[Alignment]:
        return [a for a in self.alignments
                if a.sample == sample and (target_kind is None or a.target_kind == target_kind)]

    def row_counts(self) -> dict[str, int]:
        return {name: len(getattr(self, name)) for name in CATALOGS}

    def check_integrity(self) -> list[str]:
        """Full scan of foreign references and id density; returns problems found."""
        problems = []
        for name in ("flowcells", "lane_runs", "reads", "references", "tags",
                     "alignments"):
            ids = [getattr(r, _ID_FIELDS[name]) for r in getattr(self, name)]
            if ids != list(range(1, len(ids) + 1)):
                problems.append(f"{name}: ids are not dense 1..{len(ids)}")
        for s in self.samples:
            if s.experiment_id not in self.experiments:
                problems.append(f"sample {s}: unknown experiment")
            if (s.experiment_id, s.sample_group_id) not in self.sample_groups:
                problems.append(f"sample {s}: unknown sample group")
        expected = 1
        for run in self.lane_runs:
            if run.sample not in self.samples:
                problems.append(f"lane run {run.lane_run_id}: unknown sample {run.sample}")
            if not 1 <= run.flowcell_id <= len(self.flowcells):
                problems.append(f"lane run {run.lane_run_id}: unknown flowcell {run.flowcell_id}")
            if run.first_read_id != expected:
                problems.append(f"lane run {run.lane_run_id}: read range not contiguous")
            expected = run.first_read_id + run.read_count
        if expected != len(self.reads) + 1:
            problems.append("lane runs do not cover all reads")
        for rows in (self.tags, self.alignments, self.gene_expression):
            for r in rows:
                if r.sample not in self.samples:
                    problems.append(f"{type(r).__name__} {r}: unknown sample")
        for a in self.alignments:
            kind_rows = self.tags if a.target_kind == "tag" else self.reads
            if not 1 <= a.target_id <= len(kind_rows):
                problems.append(f"alignment {a.alignment_id}: dangling {a.target_kind} {a.target_id}")
            if not 1 <= a.gene_id <= len(self.references):
                problems.append(f"alignment {a.alignment_id}: dangling reference {a.gene_id}")
        for g in self.gene_expression:
            if not 1 <= g.gene_id <= len(self.references):
                problems.append(f"expression row: dangling gene {g.gene_id}")
        for b in self.blobs.values():
            if b.sample not in self.samples:
                problems.append(f"blob {b.guid}: unknown sample")
        return problems


_ID_FIELDS = {
    "flowcells": "flowcell_id", "lane_runs": "lane_run_id", "reads": "read_id",
    "references": "ref_id", "tags": "tag_id", "alignments": "alignment_id",
}


def _check_lane(lane):
    if not 1 <= lane <= MAX_LANE:
        raise DataError(f"lane {lane} outside 1..{MAX_LANE}")


def _parse_guid(text):
    try:
        return uuid.UUID(str(text))
    except ValueError:
        raise ReferentialError(f"{text!r} is not a blob guid") from None


def read_alignment_tsv(path) -> Iterator[tuple]:
    """Parse ``read_or_tag_id, ref_name, pos, strand`` lines.

    Yields (line_no, target_id, ref_name, pos, strand).  A header line
    whose first field is not numeric is skipped; blank lines are ignored.
    """
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if line_no == 1 and not fields[0].strip().isdigit():
                continue
            if len(fields) != 4:
                raise DataError(f"line {line_no}: expected 4 tab-separated fields, got {len(fields)}")
            target, ref_name, pos, strand = (f.strip() for f in fields)
            if strand not in ("+", "-"):
                raise DataError(f"line {line_no}: strand must be '+' or '-', got {strand!r}")
            try:
                target, pos = int(target), int(pos)
            except ValueError:
                raise DataError(f"line {line_no}: id and position must be integers") from None
            yield line_no, target, ref_name, pos, strand
