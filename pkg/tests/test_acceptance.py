"""Acceptance criteria 1-10.

Each test appends one ``criterion N: PASS|FAIL`` line that is printed in
the pytest terminal summary.  Run alone with::

    pytest tests/test_acceptance.py -v
"""

import hashlib
import io
import math
import os
import random
import subprocess
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, NAME_PREFIX
from genodb import fastx
from genodb.consensus import (
    AlignedRead,
    consensus_partitioned,
    consensus_pivot,
    consensus_sliding,
    partition_alignments,
)
from genodb.errors import CapacityError
from genodb.genqueries import bin_sequences, gene_expression
from genodb.genstore import (
    decode_blockdict,
    decode_sequence,
    encode_blockdict,
    encode_packed2bit,
    encode_sequence,
    encode_text,
    import_corpus,
    storage_report,
)
from genodb.genstore.codecs import EncodedSequence, decode_packed2bit
from genodb.parexec import Timings, run_parallel_ordered
from genodb.seqcore import Alignment, ReferenceSequence, SampleKey, Strand, Tag
from genodb.synthetic import generate_dge, generate_reseq, write_count_fasta
from oracles import (
    bin_oracle,
    consensus_tally,
    expression_oracle_arrays,
    pack_oracle,
    parse_fastq_bytes,
)

pytestmark = pytest.mark.slow

S1 = SampleKey(1, 1, 1)


def verdict(n, ok, elapsed, limit, detail=""):
    within = limit is None or elapsed < limit
    status = "PASS" if ok and within else "FAIL"
    budget = f" / {limit:.0f} s" if limit else ""
    ACCEPTANCE_LINES.append(f"criterion {n}: {status} [{elapsed:.1f} s{budget}] {detail}".rstrip())
    assert ok, detail
    assert within, f"criterion {n} took {elapsed:.1f} s (limit {limit} s)"


def fastq_bytes(n, seed, min_len=20, max_len=100, crlf=False):
    rng = np.random.default_rng(seed)
    lengths = rng.integers(min_len, max_len + 1, n)
    total = int(lengths.sum())
    bases = np.frombuffer(b"ACGTACGTACGTN", dtype=np.uint8)[rng.integers(0, 13, total)].tobytes().decode()
    quals = (rng.integers(0, 42, total) + 33).astype(np.uint8).tobytes().decode()
    nl = "\r\n" if crlf else "\n"
    out, at = [], 0
    for i, length in enumerate(lengths.tolist()):
        name = f"{NAME_PREFIX}:1:{1 + i // 1000}:{i % 1000}:{i % 2048}"
        out.append(f"@{name}{nl}{bases[at:at + length]}{nl}+{nl}{quals[at:at + length]}{nl}")
        at += length
    return "".join(out).encode("ascii")


def as_tuples(records):
    return [(r.name, r.seq, r.qual, r.plus) for r in records]


# -- 1 ------------------------------------------------------------------------

def test_1_chunk_size_invariance():
    started = time.perf_counter()
    data = fastq_bytes(100_000, seed=1)
    want = parse_fastq_bytes(data)
    streams = {}
    for size in (256, 4 * 1024, 64 * 1024, 1024 * 1024):
        streams[size] = as_tuples(fastx.iter_fastq(data, size))
    same = all(s == streams[256] for s in streams.values())
    ok = same and streams[256] == want and len(want) == 100_000
    verdict(1, ok, time.perf_counter() - started, 10,
            f"{len(want)} records, buffers 256 B..1 MiB identical to whole-file oracle")


# -- 2 ------------------------------------------------------------------------

def _adversarial_file(rnd):
    """A few small records with every layout quirk the parser accepts."""
    nl = "\r\n" if rnd.random() < 0.3 else "\n"
    parts, needs = [], 0
    for _ in range(rnd.randint(1, 6)):
        blank = nl * rnd.choice([0, 0, 0, 1, 2])
        name = f"r{rnd.randint(0, 999)}"
        length = rnd.randint(1, 25)  # an empty read would look like blank lines
        seq = "".join(rnd.choice("ACGTNacgtn") for _ in range(length))
        qual = "".join(chr(33 + rnd.randint(0, 41)) for _ in range(length))
        plus = name if rnd.random() < 0.3 else ""
        rec = f"@{name}{nl}{seq}{nl}+{plus}{nl}{qual}{nl}"
        needs = max(needs, len(blank) + len(rec))
        parts.append(blank + rec)
    text = "".join(parts)
    if rnd.random() < 0.2:
        text = text[:-len(nl)]  # last line without a newline
    return text.encode("ascii"), needs


def test_2_adversarial_paging():
    started = time.perf_counter()
    rnd = random.Random(2)
    failures = 0
    parses = 0
    for _ in range(1000):
        data, needs = _adversarial_file(rnd)
        want = parse_fastq_bytes(data)
        # each buffer size puts the first chunk boundary at a different
        # byte, so the sweep straddles every offset of every record
        for size in range(max(1, needs - 8), len(data) + 2):
            parses += 1
            try:
                got = as_tuples(fastx.iter_fastq(data, size))
            except CapacityError:
                failures += size >= needs
                continue
            failures += got != want
            failures += fastx.count_records(data, "fastq", size) != len(want)
    verdict(2, failures == 0, time.perf_counter() - started, 30,
            f"1000 files, {parses} buffer placements, {failures} mismatches")


# -- 3 ------------------------------------------------------------------------

def test_3_binning_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(3)
    pool = np.frombuffer(b"ACGTN", dtype=np.uint8)[rng.choice(5, (50_000, 12), p=[.24] * 4 + [.04])]
    pool = [row.tobytes().decode() for row in pool]
    picks = rng.zipf(1.3, 1_000_000) % len(pool)
    seqs = [pool[i] for i in picks.tolist()]
    want = bin_oracle(seqs)
    ok = [tuple(r) for r in bin_sequences(seqs)] == want
    ok &= sum(r[1] for r in want) == sum("N" not in s for s in seqs)
    shuffled = seqs[:]
    random.Random(3).shuffle(shuffled)
    for k in (1, 2, 4, 8):
        ok &= [tuple(r) for r in bin_sequences(shuffled, workers=k)] == want
    verdict(3, ok, time.perf_counter() - started, 60,
            f"10^6 reads, {len(want)} distinct N-free, k in 1,2,4,8 plus permutation")


# -- 4 ------------------------------------------------------------------------

def test_4_gene_expression_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(4)
    n_tags, n_align, n_genes = 100_000, 100_000, 5_000
    t_sample = rng.integers(1, 3, n_tags)
    t_freq = rng.zipf(1.5, n_tags) % 10_000 + 1
    t_id = np.arange(1, n_tags + 1)
    a_tag = rng.integers(1, n_tags + 1, n_align)
    a_sample = t_sample[a_tag - 1]  # alignments belong to their tag's sample
    a_gene = rng.integers(1, n_genes + 1, n_align)
    samples = {s: SampleKey(1, 1, s) for s in (1, 2)}
    tags = [Tag(int(i), samples[int(s)], "A", int(f), 0) for i, s, f in zip(t_id, t_sample, t_freq)]
    aligns = [Alignment(i + 1, samples[int(s)], int(t), int(g), 1, Strand.FORWARD, "tag")
              for i, (s, t, g) in enumerate(zip(a_sample, a_tag, a_gene))]
    ok = True
    for k in (1, 4):
        got = {(r.gene_id, r.total_frequency, r.tag_count) for r in gene_expression(aligns, tags, S1, k)}
        want = expression_oracle_arrays(a_sample, a_tag, a_gene, t_sample, t_id, t_freq, 1)
        ok &= got == {(g, tot, cnt) for g, (tot, cnt) in want.items()}
    verdict(4, ok, time.perf_counter() - started, 30,
            f"10^5 alignments x 10^5 tags, {len(want)} genes, nested-loop oracle")


# -- 5 ------------------------------------------------------------------------

def random_instance(rng, max_ref=10_000, min_ref=100, max_cov=50.0, read_len=(20, 100), at_max=False):
    sample = S1
    refs, reads = [], []
    for ref_id in range(1, 1 + (rng.random() < 0.25) + 1):
        if at_max:
            length, cov = max_ref, max_cov
        else:
            length = int(math.exp(rng.uniform(math.log(min_ref), math.log(max_ref))))
            cov = rng.uniform(0, max_cov)
        refs.append(ReferenceSequence(ref_id, f"chr{ref_id}", "A" * length))
        n = int(cov * length / (sum(read_len) / 2))
        lens = np.minimum(rng.integers(read_len[0], read_len[1] + 1, n), length)
        starts = (rng.random(n) * (length - lens + 1)).astype(np.int64) + 1
        strands = rng.random(n) < 0.5
        letters = np.frombuffer(b"ACGTACGTACGTN", dtype=np.uint8)[rng.integers(0, 13, int(lens.sum()))]
        quals = rng.integers(0, 42, int(lens.sum())).astype(np.uint8).tobytes()
        text = letters.tobytes().decode()
        at = 0
        for ln, st, rev in zip(lens.tolist(), starts.tolist(), strands.tolist()):
            aid = len(reads) + 1
            a = Alignment(aid, sample, aid, ref_id, st, Strand.REVERSE if rev else Strand.FORWARD, "read")
            reads.append(AlignedRead(a, text[at:at + ln], quals[at:at + ln]))
            at += ln
    reads.sort(key=lambda r: (r.ref_id, r.pos))
    return refs, reads


def tally(refs, reads):
    lengths = {r.ref_id: len(r.seq) for r in refs}
    rows = [(r.ref_id, r.pos, r.alignment.strand is Strand.REVERSE, r.seq, r.qual) for r in reads]
    return consensus_tally(lengths, rows)


def test_5_consensus_triple_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(5)
    mismatches = bases = 0
    for i in range(1000):
        refs, reads = random_instance(rng, at_max=i % 100 == 0)
        bases += sum(len(r.seq) for r in reads)
        sliding = {k: v.seq for k, v in consensus_sliding(reads, refs).items()}
        pivot = {k: v.seq for k, v in consensus_pivot(reads, refs).items()}
        lengths_ok = all(len(sliding[r.ref_id]) == len(r.seq) for r in refs)
        mismatches += not (lengths_ok and sliding == pivot == tally(refs, reads))
    verdict(5, mismatches == 0, time.perf_counter() - started, 300,
            f"1000 instances, {bases} aligned bases, {mismatches} mismatches")


# -- 6 ------------------------------------------------------------------------

def with_straddlers(rng, refs, reads, ks):
    """Add reads across every partition border of every k (and reads that
    end or start exactly at one)."""
    offsets, total = [], 0
    for r in refs:
        offsets.append(total)
        total += len(r.seq)
    extra = []
    for k in ks:
        for i in range(1, k):
            border = i * total // k  # first global 0-based position of partition i
            ri = max(j for j, off in enumerate(offsets) if off <= border)
            local = border - offsets[ri] + 1
            length = len(refs[ri].seq)
            for start, ln in ((local - 10, 20), (local - 20, 20), (local, 20), (local - 1, 2)):
                ln = min(ln, length)
                start = min(max(start, 1), length - ln + 1)
                seq = "".join("ACGT"[x] for x in rng.integers(0, 4, ln))
                qual = bytes(rng.integers(0, 42, ln).astype(np.uint8))
                strand = Strand.REVERSE if rng.random() < 0.5 else Strand.FORWARD
                extra.append((refs[ri].ref_id, start, seq, qual, strand))
    out = list(reads)
    for ref_id, start, seq, qual, strand in extra:
        aid = len(out) + 1
        out.append(AlignedRead(Alignment(aid, S1, aid, ref_id, start, strand, "read"), seq, qual))
    out.sort(key=lambda r: (r.ref_id, r.pos))
    return out


def test_6_partition_invariance():
    started = time.perf_counter()
    rng = np.random.default_rng(6)
    ks = (1, 2, 3, 4, 8)
    bad = straddling = 0
    for i in range(60):
        refs, reads = random_instance(rng, max_ref=4_000, min_ref=30, max_cov=20)
        reads = with_straddlers(rng, refs, reads, ks)
        base = consensus_partitioned(reads, refs, k=1)
        bad += base != consensus_pivot(reads, refs)
        for k in ks[1:]:
            parts = partition_alignments(reads, k, refs)
            seen = Counter(r.alignment.alignment_id for p in parts for r in p.alignments)
            straddling += sum(c > 1 for c in seen.values())
            bad += consensus_partitioned(reads, refs, k=k, workers=4) != base
    verdict(6, bad == 0 and straddling > 0, time.perf_counter() - started, 120,
            f"60 instances, k in 1,2,3,4,8, {straddling} reads routed to several partitions")


# -- 7 ------------------------------------------------------------------------

def test_7_storage_ratios(tmp_path):
    started = time.perf_counter()
    lines, ok = [], True
    for kind, gen in (("dge", generate_dge), ("reseq", generate_reseq)):
        corpus = gen(tmp_path / kind, scale=0.1, seed=7)
        report = storage_report(import_corpus(corpus), corpus)
        blob = report.total("blob_registry") == report.total("raw_files")
        norm = report.ratio("normalized_plain", "import_1to1", "reads")
        packed = report.packed_ratio("reads")
        ok &= blob and norm <= 0.70
        if kind == "reseq":  # the N-free twin
            ok &= packed <= 0.30
        lines.append(f"{kind}: blob/raw={report.total('blob_registry') / report.total('raw_files'):.3f} "
                     f"normalized/1to1={norm:.3f} packed/text={packed:.3f}")
    verdict(7, ok, time.perf_counter() - started, 120, "; ".join(lines))


# -- 8 ------------------------------------------------------------------------

def test_8_codec_roundtrips():
    started = time.perf_counter()
    rng = np.random.default_rng(8)
    lengths = rng.integers(0, 1001, 100_000)
    densities = rng.random(100_000)
    seqs, bad, packed_checked = [], 0, 0
    letters = np.frombuffer(b"ACGT", dtype=np.uint8)
    for ln, dens in zip(lengths.tolist(), densities.tolist()):
        arr = letters[rng.integers(0, 4, ln)]
        arr[rng.random(ln) < dens] = ord("N")
        seqs.append(arr.tobytes().decode())
    for i, seq in enumerate(seqs):
        enc = encode_sequence(seq)
        back, _ = EncodedSequence.deserialize(enc.serialize())
        bad += decode_sequence(back) != seq or decode_sequence(enc) != seq
        if enc.codec == "packed2bit":
            packed_checked += 1
            bad += len(enc.payload) != (len(seq) + 3) // 4
            if i % 50 == 0:
                bad += enc.payload != pack_oracle(seq)
        forced = encode_packed2bit(seq)
        bad += decode_packed2bit(forced) != seq or len(forced.payload) != (len(seq) + 3) // 4
        bad += decode_sequence(encode_text(seq)) != seq
    for i in range(0, len(seqs), 10_000):
        chunk = seqs[i:i + 10_000]
        bad += decode_blockdict(encode_blockdict(chunk)) != chunk
    verdict(8, bad == 0, time.perf_counter() - started, 30,
            f"10^5 sequences x 3 codecs, packed2bit selected for {packed_checked}, {bad} failures")


# -- 9 ------------------------------------------------------------------------

def test_9_count_throughput(tmp_path):
    n = 5_028_052
    path = tmp_path / "reads.fasta"
    write_count_fasta(path, n, seed=9)
    started = time.perf_counter()
    size = os.path.getsize(path)
    timings = Timings()
    rates, counts = {}, set()
    for k in (1, 2, 4, 8):
        t0 = time.perf_counter()
        ranges = [(i * size // k, (i + 1) * size // k) for i in range(k)]
        counts.add(run_parallel_ordered(ranges, lambda r: fastx.count_fasta_range(path, *r), sum,
                                        k, timings, name="count"))
        timings.record("count:total", k, t0)
        rates[k] = n / (time.perf_counter() - t0)
    tsv = io.StringIO()
    timings.to_tsv(tsv)
    fq = tmp_path / "reads.fastq"
    fq.write_bytes(fastq_bytes(200_000, seed=9, min_len=36, max_len=36))
    t0 = time.perf_counter()
    fq_count = fastx.count_records(fq, "fastq")
    fq_rate = fq_count / (time.perf_counter() - t0)
    floor = min(min(rates.values()), fq_rate) >= 2e5
    detail = ("informational; FASTA records/s by k: "
              + ", ".join(f"k={k} {r:,.0f}" for k, r in rates.items())
              + f"; FASTQ k=1 {fq_rate:,.0f}")
    print(tsv.getvalue())
    status = "PASS" if floor and counts == {n} else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion 9: {status} [{time.perf_counter() - started:.1f} s] {detail}")
    # only correctness gates this criterion; speed is reported
    assert counts == {n} and fq_count == 200_000


# -- 10 -----------------------------------------------------------------------

def cli(*args, cwd):
    proc = subprocess.run([sys.executable, "-m", "genodb", *map(str, args)], cwd=cwd,
                          capture_output=True, check=False)
    return proc.returncode, proc.stdout


def digest_tree(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode() + b"\0" + p.read_bytes())
    return h.hexdigest()


def cli_session(work):
    s1, s2 = ["-e", 1, "-g", 1, "-s", 1], ["-e", 1, "-g", 1, "-s", 2]
    steps = [
        ("gen-synthetic", "dge", "--kind", "dge", "--scale", "0.002", "--seed", 10),
        ("gen-synthetic", "reseq", "--kind", "reseq", "--scale", "0.0005", "--seed", 10),
        ("gen-synthetic", "cf.fasta", "--kind", "count-fasta", "--records", 5000, "--seed", 10),
        ("import", "dge/reads_L1.fastq", "--store", "db", *s1, "--lane", 1),
        ("import", "dge/reads_L2.fastq", "--store", "db", *s1, "--lane", 2),
        ("import", "dge/reads_L1.fastq", "--store", "db", *s1, "--lane", 1, "--mode", "1to1"),
        ("import", "dge/reads_L1.fastq", "--store", "db", *s1, "--lane", 1, "--mode", "register"),
        ("load-reference", "dge/genes.fasta", "--store", "db"),
        ("bin", "--store", "db", *s1, "--save", "--workers", 4),
        ("load-alignments", "dge/alignments.tsv", "--store", "db", *s1, "--target", "tag"),
        ("expr", "--store", "db", *s1, "--workers", 3, "--save"),
        ("check", "--store", "db"),
        ("count", "dge/reads_L1.fastq"),
        ("count", "cf.fasta", "--k", 4),
        ("import", "reseq/reads_L1.fastq", "--store", "rdb", *s2, "--lane", 1),
        ("import", "reseq/reads_L2.fastq", "--store", "rdb", *s2, "--lane", 2),
        ("load-reference", "reseq/reference.fasta", "--store", "rdb"),
        ("load-alignments", "reseq/alignments.tsv", "--store", "rdb", *s2, "--target", "read"),
        ("consensus", "--store", "rdb", *s2, "--k", 1),
        ("consensus", "--store", "rdb", *s2, "--k", 4, "-o", "cons.fa"),
        ("storage-report", "dge"),
    ]
    outputs = []
    for step in steps:
        code, out = cli(*step, cwd=work)
        outputs.append((step[0], code, out))
    return outputs, digest_tree(work)


def test_10_cli_determinism(tmp_path):
    import shutil
    started = time.perf_counter()
    work = tmp_path / "run"
    work.mkdir()
    first, tree1 = cli_session(work)
    shutil.rmtree(work)
    work.mkdir()
    second, tree2 = cli_session(work)
    failed = [name for name, code, _ in first if code != 0]
    consensus_same = first[-3][2] == (work / "cons.fa").read_bytes()
    ok = first == second and tree1 == tree2 and not failed and consensus_same
    verdict(10, ok, time.perf_counter() - started, None,
            f"{len(first)} commands run twice; stdout and every written file identical"
            + (f"; non-zero exit: {failed}" if failed else ""))
