"""Seeded synthetic corpora shaped like published short-read datasets.

Two twins are produced, both scaled by a factor in (0, 1]:

* ``dge``: a digital gene expression run of 5,028,052 reads collapsing into
  565,526 distinct N-free tags, 563,985 tag alignments and 24,951 genes.
* ``reseq``: a re-sequencing run of 6,271,727 reads aligned to 25
  chromosomes whose lengths follow the human karyotype, shrunk so that
  coverage stays around 8x.

Reads carry old Solexa pipeline names (``HWI-EAS209_0006_FC706VJ:5:58:5894:21141``)
and repeat the name on the ``+`` line, as the pipeline did at the time.
Everything is a deterministic function of ``(scale, seed)``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .genstore.report import Corpus, write_manifest
from .seqcore import SampleKey

DGE_READS = 5_028_052
DGE_TAGS = 565_526
DGE_ALIGNMENTS = 563_985
DGE_GENES = 24_951
RESEQ_READS = 6_271_727

READ_LENGTH = 36
INSTRUMENT = "HWI-EAS209_0006"
FLOWCELL = "FC706VJ"
TILES_PER_LANE = 300

# GRCh37 chromosome lengths in Mb, used only for proportions
_KARYOTYPE = [
    ("chr1", 249.3), ("chr2", 243.2), ("chr3", 198.0), ("chr4", 191.2), ("chr5", 180.9),
    ("chr6", 171.1), ("chr7", 159.1), ("chr8", 146.4), ("chr9", 141.2), ("chr10", 135.5),
    ("chr11", 135.0), ("chr12", 133.9), ("chr13", 115.2), ("chr14", 107.3), ("chr15", 102.5),
    ("chr16", 90.4), ("chr17", 81.2), ("chr18", 78.1), ("chr19", 59.1), ("chr20", 63.0),
    ("chr21", 48.1), ("chr22", 51.3), ("chrX", 155.3), ("chrY", 59.4), ("chrM", 0.0166),
]

_LETTERS = np.frombuffer(b"ACGT", dtype=np.uint8)
_COMP = np.zeros(256, dtype=np.uint8)
for _a, _b in zip(b"ACGTN", b"TGCAN"):
    _COMP[_a] = _b


def scaled(count: int, scale: float) -> int:
    if not 0 < scale <= 1:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    return max(1, round(count * scale))


def random_bases(rng: np.random.Generator, n: int, length: int) -> np.ndarray:
    """``(n, length)`` uint8 matrix of ASCII A/C/G/T."""
    return _LETTERS[rng.integers(0, 4, size=(n, length))]


def _rows_to_str(mat: np.ndarray) -> list[str]:
    if mat.shape[1] == 0:
        return [""] * mat.shape[0]
    flat = mat.tobytes().decode("ascii")
    w = mat.shape[1]
    return [flat[i:i + w] for i in range(0, len(flat), w)]


def distinct_sequences(rng: np.random.Generator, n: int, length: int) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    while len(out) < n:
        for s in _rows_to_str(random_bases(rng, n - len(out), length)):
            if s not in seen:
                seen.add(s)
                out.append(s)
    return out


def quality_strings(rng: np.random.Generator, n: int, length: int) -> list[str]:
    """Phred+33 strings with scores 2..40, decaying toward the read end."""
    base = rng.integers(20, 41, size=(n, 1))
    decay = (np.arange(length) * 0.3).astype(np.int64)
    noise = rng.integers(-5, 6, size=(n, length))
    scores = np.clip(base - decay + noise, 2, 40).astype(np.uint8)
    return _rows_to_str(scores + 33)


def _coordinates(rng: np.random.Generator, n: int):
    """Unique (tile, x, y) triples for ``n`` reads of one lane."""
    per_tile = max(1, -(-n // TILES_PER_LANE))
    tiles, xs, ys = [], [], []
    left = n
    tile = 1
    while left:
        m = min(per_tile, left)
        cells = rng.choice(2048 * 2048, size=m, replace=False)
        tiles.extend([tile] * m)
        xs.extend((cells // 2048).tolist())
        ys.extend((cells % 2048).tolist())
        left -= m
        tile += 1
    return tiles, xs, ys


def write_reads_fastq(path, seqs: list[str], rng: np.random.Generator, lane: int,
                      repeat_name: bool = True) -> int:
    """Write reads of one lane with Solexa names; returns bytes written."""
    quals = quality_strings(rng, len(seqs), max((len(s) for s in seqs), default=0))
    tiles, xs, ys = _coordinates(rng, len(seqs))
    written = 0
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for start in range(0, len(seqs), 100_000):
            parts = []
            for i in range(start, min(start + 100_000, len(seqs))):
                name = f"{INSTRUMENT}_{FLOWCELL}:{lane}:{tiles[i]}:{xs[i]}:{ys[i]}"
                s = seqs[i]
                parts.append(f"@{name}\n{s}\n+{name if repeat_name else ''}\n{quals[i][:len(s)]}\n")
            block = "".join(parts)
            fh.write(block)
            written += len(block)
    return written


def _split_lanes(seqs: list[str], lanes: int) -> list[list[str]]:
    n = len(seqs)
    return [seqs[i * n // lanes:(i + 1) * n // lanes] for i in range(lanes)]


def _write_reference(path, names: list[str], seqs: list[str], width: int = 60):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for name, seq in zip(names, seqs):
            fh.write(f">{name}\n")
            fh.write("".join(seq[i:i + width] + "\n" for i in range(0, len(seq), width)))


def generate_dge(out_dir, scale: float = 0.01, seed: int = 0, lanes: int = 2,
                 n_fraction: float = 0.01, sample: SampleKey = SampleKey(1, 1, 1)) -> Corpus:
    """Digital gene expression twin: reads, gene reference and tag alignments.

    Alignment ids are tag ranks, which are the tag ids a fresh store assigns
    after binning the reads of the sample.
    """
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_reads = scaled(DGE_READS, scale)
    n_tags = scaled(DGE_TAGS, scale)
    n_align = scaled(DGE_ALIGNMENTS, scale)
    n_genes = scaled(DGE_GENES, scale)
    n_with_n = round(n_reads * n_fraction)
    if n_reads - n_with_n < n_tags:
        raise ValueError("scale too small for the tag cardinality")

    tags = distinct_sequences(rng, n_tags, READ_LENGTH)
    weights = 1.0 / np.arange(1, n_tags + 1) ** 1.1
    weights = weights[rng.permutation(n_tags)]
    counts = 1 + rng.multinomial(n_reads - n_with_n - n_tags, weights / weights.sum())

    noisy = random_bases(rng, n_with_n, READ_LENGTH)
    if n_with_n:
        k = rng.integers(1, 4, size=n_with_n)
        for row, hits in enumerate(k):
            noisy[row, rng.choice(READ_LENGTH, size=hits, replace=False)] = ord("N")
    reads = np.repeat(np.array(tags, dtype=object), counts).tolist() + _rows_to_str(noisy)
    reads = [reads[i] for i in rng.permutation(len(reads))]

    read_files = []
    for lane, lane_reads in enumerate(_split_lanes(reads, lanes), 1):
        name = f"reads_L{lane}.fastq"
        write_reads_fastq(out / name, lane_reads, rng, lane)
        read_files.append((name, lane))

    gene_lengths = rng.integers(300, 3001, size=n_genes)
    gene_names = [f"gene{i:05d}" for i in range(1, n_genes + 1)]
    gene_seqs = [random_bases(rng, 1, int(L))[0].tobytes().decode("ascii") for L in gene_lengths]
    _write_reference(out / "genes.fasta", gene_names, gene_seqs)

    # a tag's id is its rank, so any rank in 1..n_tags is a valid target
    picked = np.sort(rng.choice(n_tags, size=n_align, replace=n_align > n_tags))
    genes = rng.integers(0, n_genes, size=n_align)
    strands = rng.integers(0, 2, size=n_align)
    with open(out / "alignments.tsv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("target_id\tref_name\tpos\tstrand\n")
        for rank0, g, st in zip(picked.tolist(), genes.tolist(), strands.tolist()):
            pos = int(rng.integers(1, int(gene_lengths[g]) - READ_LENGTH + 2))
            fh.write(f"{rank0 + 1}\t{gene_names[g]}\t{pos}\t{'+-'[st]}\n")

    corpus = Corpus(out, sample, read_files, "genes.fasta", "alignments.tsv", "tag", "dge")
    write_manifest(corpus)
    return corpus


def reference_lengths(total: int) -> list[tuple[str, int]]:
    weight = sum(mb for _, mb in _KARYOTYPE)
    return [(name, max(READ_LENGTH * 2, round(total * mb / weight))) for name, mb in _KARYOTYPE]


def generate_reseq(out_dir, scale: float = 0.01, seed: int = 0, lanes: int = 2,
                   coverage: float = 8.0, error_rate: float = 0.01,
                   sample: SampleKey = SampleKey(1, 1, 2)) -> Corpus:
    """Re-sequencing twin: N-free reads sampled from a random reference, with alignments.

    Alignment ids are read ids in file order (lane 1 first), which is the
    order a fresh store assigns them.
    """
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_reads = scaled(RESEQ_READS, scale)
    lengths = reference_lengths(int(n_reads * READ_LENGTH / coverage))
    names = [n for n, _ in lengths]
    genome = [random_bases(rng, 1, L)[0] for _, L in lengths]
    _write_reference(out / "reference.fasta", names, [g.tobytes().decode("ascii") for g in genome])

    sizes = np.array([L for _, L in lengths], dtype=np.float64)
    chrom = rng.choice(len(lengths), size=n_reads, p=sizes / sizes.sum())
    strands = rng.integers(0, 2, size=n_reads)
    span = np.array([L - READ_LENGTH + 1 for _, L in lengths])
    starts = (rng.random(n_reads) * span[chrom]).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes.astype(np.int64))[:-1]])
    flat = np.concatenate(genome)
    mat = flat[(offsets[chrom] + starts)[:, None] + np.arange(READ_LENGTH)]
    errors = rng.random(size=mat.shape) < error_rate
    mat[errors] = _LETTERS[rng.integers(0, 4, size=int(errors.sum()))]
    rev = strands == 1
    mat[rev] = _COMP[mat[rev][:, ::-1]]
    reads = _rows_to_str(mat)

    read_files = []
    for lane, lane_reads in enumerate(_split_lanes(reads, lanes), 1):
        name = f"reads_L{lane}.fastq"
        write_reads_fastq(out / name, lane_reads, rng, lane)
        read_files.append((name, lane))

    order = np.lexsort((starts, chrom))
    with open(out / "alignments.tsv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("target_id\tref_name\tpos\tstrand\n")
        fh.write("".join(f"{i + 1}\t{names[chrom[i]]}\t{starts[i] + 1}\t{'+-'[strands[i]]}\n"
                         for i in order.tolist()))

    corpus = Corpus(out, sample, read_files, "reference.fasta", "alignments.tsv", "read", "reseq")
    write_manifest(corpus)
    return corpus


def write_count_fasta(path, n: int, seed: int = 0, length: int = READ_LENGTH,
                      batch: int = 250_000) -> int:
    """A FASTA of ``n`` single-line reads for scan benchmarks; returns bytes written."""
    rng = np.random.default_rng(seed)
    written = 0
    with open(path, "wb") as fh:
        for start in range(0, n, batch):
            m = min(batch, n - start)
            seqs = _rows_to_str(random_bases(rng, m, length))
            block = "".join(f">r{start + i + 1}\n{s}\n" for i, s in enumerate(seqs)).encode("ascii")
            fh.write(block)
            written += len(block)
    return written
