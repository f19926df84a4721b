"""Byte accounting of one corpus under several storage representations.

A corpus is a directory of input files described by ``corpus.json``::

    {"kind": "dge", "sample": "1/1/1",
     "reads": [["reads_L1.fastq", 1], ["reads_L2.fastq", 2]],
     "reference": "genes.fasta", "alignments": "alignments.tsv",
     "target": "tag"}

Without a manifest every ``*.fastq`` file is read as lane 1, 2, ... in
name order, and ``reference.fasta`` / ``alignments.tsv`` are picked up if
present.

Representations, each broken down by logical table:

raw_files
    the input files as they lie on disk
blob_registry
    content bytes of registered files (the registry rows themselves are
    reported apart as ``registry_overhead``)
import_1to1
    every row as length-prefixed text columns, names kept verbatim
normalized_plain / normalized_packed / normalized_blockdict
    surrogate-keyed rows with sequence columns as text, as packed 2-bit
    values, or factored out into per-table block dictionaries
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import fastx
from ..errors import DataError, SourceIOError
from ..genqueries import bin_unique_reads, gene_expression
from ..seqcore import GeneExpression, SampleKey
from . import layout
from .codecs import encode_blockdict, encode_sequence
from .store import Store, read_alignment_tsv

TABLES = ("samples", "reads", "references", "tags", "alignments", "gene_expression")
REPRESENTATIONS = ("raw_files", "blob_registry", "import_1to1",
                   "normalized_plain", "normalized_blockdict", "normalized_packed")


@dataclass
class Corpus:
    root: Path
    sample: SampleKey
    reads: list[tuple[str, int]]
    reference: str | None = None
    alignments: str | None = None
    target: str = "tag"
    kind: str = "reads"

    def path(self, name: str) -> Path:
        return self.root / name

    def files(self) -> list[tuple[str, str]]:
        """(table, relative path) of every input file."""
        out = [("reads", name) for name, _ in self.reads]
        if self.reference:
            out.append(("references", self.reference))
        if self.alignments:
            out.append(("alignments", self.alignments))
        return out


def load_corpus(root) -> Corpus:
    root = Path(root)
    if not root.is_dir():
        raise SourceIOError(f"corpus directory {str(root)!r} does not exist")
    manifest = root / "corpus.json"
    if manifest.exists():
        try:
            meta = json.loads(manifest.read_text(encoding="utf-8"))
            return Corpus(root, SampleKey.parse(meta.get("sample", "1/1/1")),
                          [(str(n), int(lane)) for n, lane in meta["reads"]],
                          meta.get("reference"), meta.get("alignments"),
                          meta.get("target", "tag"), meta.get("kind", "reads"))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{manifest}: malformed manifest ({exc})") from None
    fastqs = sorted(p.name for p in root.glob("*.fastq"))
    if not fastqs:
        raise DataError(f"corpus {str(root)!r} holds no .fastq files")
    ref = "reference.fasta" if (root / "reference.fasta").exists() else None
    aln = "alignments.tsv" if (root / "alignments.tsv").exists() else None
    return Corpus(root, SampleKey(1, 1, 1), [(n, i) for i, n in enumerate(fastqs, 1)], ref, aln)


def write_manifest(corpus: Corpus) -> None:
    meta = {"kind": corpus.kind, "sample": str(corpus.sample),
            "reads": [[n, lane] for n, lane in corpus.reads],
            "reference": corpus.reference, "alignments": corpus.alignments,
            "target": corpus.target}
    (corpus.root / "corpus.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def import_corpus(corpus: Corpus, store: Store | None = None, *, one_to_one: bool = True,
                  register: bool = True, buffer_size: int = fastx.DEFAULT_BUFFER_SIZE,
                  workers: int = 1) -> Store:
    """Load a corpus into ``store`` under every representation.

    For tag corpora the reads are binned into tags first, so alignment ids
    in the TSV refer to tag ranks; for read corpora they are read ids in
    file order.  Both assume a store that was empty before.
    """
    store = store if store is not None else Store()
    sample = corpus.sample
    for name, lane in corpus.reads:
        store.import_fastq_normalized(corpus.path(name), sample, lane, buffer_size)
        if one_to_one:
            store.import_fastq_1to1(corpus.path(name), sample, lane, buffer_size)
        if register:
            store.register_blob(corpus.path(name), sample, lane, "FastQ")
    if corpus.reference:
        store.add_references(fastx.iter_fasta(corpus.path(corpus.reference), buffer_size))
        if register:
            store.register_blob(corpus.path(corpus.reference), sample, 1, "Fasta")
    if corpus.target == "tag":
        store.store_tags(sample, bin_unique_reads(store.reads_for_sample(sample), None, workers))
    if corpus.alignments:
        store.add_alignments(read_alignment_tsv(corpus.path(corpus.alignments)), sample,
                             corpus.target)
        if register:
            store.register_blob(corpus.path(corpus.alignments), sample, 1, "other")
        if corpus.target == "tag":
            rows = gene_expression(store.alignments, store.tags, sample, workers)
            store.store_gene_expression(_as_expression(rows))
    return store


def _as_expression(rows):
    return [GeneExpression(r.gene_id, r.sample, r.total_frequency, r.tag_count) for r in rows]


@dataclass
class StorageReport:
    bytes: dict[str, dict[str, int]]
    row_counts: dict[str, int]
    seq_text_bytes: dict[str, int]
    packed_payload_bytes: dict[str, int]
    registry_overhead: int = 0
    notes: list[str] = field(default_factory=list)

    def total(self, representation: str) -> int:
        return sum(self.bytes[representation].values())

    def ratio(self, num: str, den: str, table: str | None = None) -> float:
        if table is None:
            a, b = self.total(num), self.total(den)
        else:
            a, b = self.bytes[num][table], self.bytes[den][table]
        return a / b if b else float("nan")

    def packed_ratio(self, table: str = "reads") -> float:
        text = self.seq_text_bytes[table]
        return self.packed_payload_bytes[table] / text if text else float("nan")

    def format(self) -> str:
        head = ["table"] + list(REPRESENTATIONS) + ["rows"]
        lines = ["\t".join(head)]
        for t in TABLES:
            cells = [str(self.bytes[r][t]) for r in REPRESENTATIONS]
            lines.append("\t".join([t] + cells + [str(self.row_counts.get(t, 0))]))
        lines.append("\t".join(["total"] + [str(self.total(r)) for r in REPRESENTATIONS] + [""]))
        lines.append("")
        lines.append(f"registry_overhead\t{self.registry_overhead}")
        lines.append(f"ratio blob_registry/raw_files\t{_fmt(self.ratio('blob_registry', 'raw_files'))}")
        for table in ("reads", None):
            label = table or "all"
            for rep in ("normalized_plain", "normalized_packed", "normalized_blockdict"):
                lines.append(f"ratio {rep}/import_1to1 [{label}]\t"
                             f"{_fmt(self.ratio(rep, 'import_1to1', table))}")
        lines.append(f"ratio packed_payload/seq_text [reads]\t{_fmt(self.packed_ratio('reads'))}")
        lines.extend(f"note\t{n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return "n/a" if x != x else f"{x:.4f}"


def _zero():
    return dict.fromkeys(TABLES, 0)


def storage_report(store: Store, corpus: Corpus | None = None) -> StorageReport:
    """Exact byte totals of the store's content under every representation."""
    b = {rep: _zero() for rep in REPRESENTATIONS}

    if corpus is not None:
        for table, name in corpus.files():
            path = corpus.path(name)
            try:
                b["raw_files"][table] += path.stat().st_size
            except OSError as exc:
                raise SourceIOError(f"cannot stat {str(path)!r}: {exc}") from None
    by_format = {"FastQ": "reads", "Fasta": "references", "other": "alignments"}
    overhead = 0
    for entry in store.blobs.values():
        b["blob_registry"][by_format[entry.format_tag]] += entry.byte_length
        overhead += len(layout.encode_blob(entry))

    # samples: same rows in every stored representation
    plain_samples = (sum(len(layout.encode_experiment(e)) for e in store.experiments)
                     + sum(len(layout.encode_sample_group(g)) for g in store.sample_groups)
                     + sum(len(layout.encode_sample(s)) for s in store.samples))
    for rep in ("normalized_plain", "normalized_packed", "normalized_blockdict"):
        b[rep]["samples"] = plain_samples
    b["import_1to1"]["samples"] = sum(layout.text_row_size((str(s),)) for s in store.samples)

    seq_text, packed_payload = _zero(), _zero()
    sources = {
        "reads": (store.reads, layout.encode_read),
        "references": (store.references, layout.encode_reference),
        "tags": (store.tags, layout.encode_tag),
    }
    for table, (rows, encode) in sources.items():
        plain = packed = bare = 0
        seqs = []
        for row in rows:
            enc = encode_sequence(row.seq)
            plain += len(encode(row))
            packed += len(encode(row, enc.serialize()))
            bare += len(encode(row, b""))
            seqs.append(row.seq)
            seq_text[table] += len(row.seq)
            packed_payload[table] += len(enc.payload)
        b["normalized_plain"][table] = plain
        b["normalized_packed"][table] = packed
        b["normalized_blockdict"][table] = bare + (len(encode_blockdict(seqs)) if seqs else 0)

    fc_bytes = (sum(len(layout.encode_flowcell(f)) for f in store.flowcells)
                + sum(len(layout.encode_lane_run(r)) for r in store.lane_runs))
    for rep in ("normalized_plain", "normalized_packed", "normalized_blockdict"):
        b[rep]["reads"] += fc_bytes
        b[rep]["alignments"] = sum(len(layout.encode_alignment(a)) for a in store.alignments)
        b[rep]["gene_expression"] = sum(len(layout.encode_expression(g))
                                        for g in store.gene_expression)

    one = b["import_1to1"]
    one["reads"] = sum(len(layout.encode_raw_read(r)) for r in store.reads_1to1)
    one["references"] = sum(layout.text_row_size((r.name, r.seq)) for r in store.references)
    one["tags"] = sum(layout.text_row_size((str(t.sample), t.seq, str(t.frequency), str(t.rank)))
                      for t in store.tags)
    names = {r.ref_id: r.name for r in store.references}
    one["alignments"] = sum(
        layout.text_row_size((str(a.sample), str(a.target_id), names.get(a.gene_id, ""),
                              str(a.pos), a.strand.value))
        for a in store.alignments)
    one["gene_expression"] = sum(
        layout.text_row_size((str(g.sample), names.get(g.gene_id, ""), str(g.total_frequency),
                              str(g.tag_count)))
        for g in store.gene_expression)

    counts = {
        "samples": len(store.samples),
        "reads": len(store.reads),
        "references": len(store.references),
        "tags": len(store.tags),
        "alignments": len(store.alignments),
        "gene_expression": len(store.gene_expression),
    }
    notes = []
    if store.reads and not store.reads_1to1:
        notes.append("import_1to1 is empty: the corpus was not imported one-to-one")
    if corpus is None:
        notes.append("raw_files is empty: no corpus directory given")
    return StorageReport(b, counts, seq_text, packed_payload, overhead, notes)
