"""Reference implementations written independently of the library.

They favour obviousness over speed: whole-input parsing, dictionaries,
nested loops and a dense numpy tally.  None of them imports genodb.
"""

from collections import Counter, defaultdict

import numpy as np

COMPLEMENT = {"A": "T", "C": "G", "G": "C", "T": "A", "N": "N"}


def parse_fastq_bytes(data: bytes):
    """Whole-file FASTQ parse -> [(name, seq, raw scores, plus)]."""
    lines = [ln for ln in data.decode("ascii").splitlines() if ln != ""]
    assert len(lines) % 4 == 0, "oracle expects well-formed input"
    out = []
    for i in range(0, len(lines), 4):
        head, seq, plus, qual = lines[i:i + 4]
        assert head[0] == "@" and plus[0] == "+"
        out.append((head[1:], seq.upper(), bytes(ord(c) - 33 for c in qual), plus[1:]))
    return out


def parse_fasta_bytes(data: bytes):
    out, name, seq = [], None, []
    for line in data.decode("ascii").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            if name is not None:
                out.append((name, "".join(seq).upper()))
            name, seq = line[1:], []
        else:
            seq.append(line)
    if name is not None:
        out.append((name, "".join(seq).upper()))
    return out


def bin_oracle(seqs):
    """[(rank, frequency, seq)] for N-free sequences."""
    counts = Counter(s for s in seqs if "N" not in s)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(i + 1, c, s) for i, (s, c) in enumerate(ordered)]


def expression_oracle(alignments, tags, sample):
    """Nested-loop join of alignments and tags, grouped by gene.

    ``alignments``: (sample, tag_id, gene_id); ``tags``: (sample, tag_id, frequency).
    Returns {gene_id: (total_frequency, tag_count)}.
    """
    result = defaultdict(lambda: [0, 0])
    for a_sample, tag_id, gene in alignments:
        if a_sample != sample:
            continue
        for t_sample, t_id, freq in tags:
            if t_sample == sample and t_id == tag_id:
                result[gene][0] += freq
                result[gene][1] += 1
    return {g: tuple(v) for g, v in result.items()}


def revcomp(seq):
    return "".join(COMPLEMENT[c] for c in reversed(seq))


def consensus_tally(ref_lengths, reads):
    """Dense per-position tally.

    ``ref_lengths``: {ref_id: length}; ``reads``: (ref_id, pos, reverse, seq, scores).
    Returns {ref_id: consensus string}.
    """
    comp = str.maketrans("ACGTN", "TGCAN")
    col = np.full(256, -1, dtype=np.int64)
    col[list(b"ACGT")] = np.arange(4)
    out = {}
    for ref_id, length in ref_lengths.items():
        tally = np.zeros((length, 4), dtype=np.int64)
        mine = [r for r in reads if r[0] == ref_id]
        if mine:
            seqs, scores, starts = [], [], []
            for _, pos, reverse, seq, sc in mine:
                if reverse:
                    seq, sc = seq.translate(comp)[::-1], bytes(sc)[::-1]
                seqs.append(seq)
                scores.append(bytes(sc))
                starts.append(pos - 1)
            lens = np.array([len(x) for x in seqs])
            offsets = np.cumsum(lens) - lens
            where = np.repeat(np.array(starts) - offsets, lens) + np.arange(lens.sum())
            base = col[np.frombuffer("".join(seqs).encode(), dtype=np.uint8)]
            weight = np.frombuffer(b"".join(scores), dtype=np.uint8).astype(np.int64) + 1
            keep = base >= 0
            np.add.at(tally, (where[keep], base[keep]), weight[keep])
        best = tally.argmax(axis=1)  # first maximum wins, so A < C < G < T
        letters = np.frombuffer(b"ACGT", dtype=np.uint8)[best]
        letters[tally.max(axis=1) == 0] = ord("N")
        out[ref_id] = letters.tobytes().decode()
    return out


def pack_oracle(seq):
    """2-bit packing through a bit string."""
    bits = "".join({"A": "00", "C": "01", "G": "10", "T": "11", "N": "00"}[c] for c in seq)
    bits += "0" * (-len(bits) % 8)
    return bytes(int(bits[i:i + 8], 2) for i in range(0, len(bits), 8))


def expression_oracle_arrays(a_sample, a_tag, a_gene, t_sample, t_id, t_freq, sample):
    """The same nested loop with the inner loop vectorized: one pass over
    every alignment per tag.  Inputs are integer numpy arrays."""
    result = defaultdict(lambda: [0, 0])
    in_sample = a_sample == sample
    for ts, tid, freq in zip(t_sample.tolist(), t_id.tolist(), t_freq.tolist()):
        if ts != sample:
            continue
        for gene in a_gene[in_sample & (a_tag == tid)].tolist():
            result[gene][0] += freq
            result[gene][1] += 1
    return {g: tuple(v) for g, v in result.items()}
