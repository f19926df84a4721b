import random

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

NAME_PREFIX = "HWI-EAS209_0006_FC706VJ"


def make_fastq(n, seed=0, min_len=20, max_len=60, n_rate=0.02, lane=1, crlf=False,
               repeat_name=False):
    """Random but well-formed FASTQ bytes with Solexa-style names."""
    rng = random.Random(seed)
    nl = "\r\n" if crlf else "\n"
    parts = []
    for i in range(n):
        length = rng.randint(min_len, max_len)
        seq = "".join("N" if rng.random() < n_rate else rng.choice("ACGT") for _ in range(length))
        qual = "".join(chr(33 + rng.randint(0, 41)) for _ in range(length))
        name = f"{NAME_PREFIX}:{lane}:{1 + i // 1000}:{i % 1000}:{rng.randint(0, 2047)}"
        plus = name if repeat_name else ""
        parts.append(f"@{name}{nl}{seq}{nl}+{plus}{nl}{qual}{nl}")
    return "".join(parts).encode("ascii")


@pytest.fixture
def fastq3():
    return (
        b"@" + NAME_PREFIX.encode() + b":1:1:10:20\nACGTACGT\n+\nIIIIIIII\n"
        b"@" + NAME_PREFIX.encode() + b":1:1:11:20\nACGTACGT\n+\n!!!!!!!!\n"
        b"@" + NAME_PREFIX.encode() + b":1:2:10:20\nGGGGNCCC\n+\n55555555\n"
    )


def consensus_case(rng, max_ref=10_000, n_refs=None, max_cov=50, min_read=20, max_read=100,
                   quals=(0, 41), min_ref=1):
    """A random pileup: references plus sorted AlignedReads on both strands."""
    from genodb.consensus import AlignedRead
    from genodb.seqcore import Alignment, ReferenceSequence, SampleKey, Strand

    sample = SampleKey(1, 1, 1)
    refs = []
    for i in range(n_refs or rng.randint(1, 3)):
        if rng.random() < 0.8:
            length = rng.randint(max(min_ref, max_read), max_ref)
        else:
            length = rng.randint(min_ref, max_ref)
        refs.append(ReferenceSequence(i + 1, f"chr{i + 1}", "A" * length))
    reads = []
    for ref in refs:
        cov = rng.uniform(0, max_cov)
        avg = (min_read + max_read) / 2
        for _ in range(int(cov * len(ref.seq) / avg)):
            length = min(rng.randint(min_read, max_read), len(ref.seq))
            pos = rng.randint(1, len(ref.seq) - length + 1)
            seq = "".join(rng.choice("ACGTACGTACGTN") for _ in range(length))
            qual = bytes(rng.randint(*quals) for _ in range(length))
            strand = Strand.REVERSE if rng.random() < 0.5 else Strand.FORWARD
            a = Alignment(len(reads) + 1, sample, len(reads) + 1, ref.ref_id, pos, strand, "read")
            reads.append(AlignedRead(a, seq, qual))
    reads.sort(key=lambda r: (r.ref_id, r.pos))
    return refs, reads


def tally_inputs(refs, reads):
    lengths = {r.ref_id: len(r.seq) for r in refs}
    rows = [(r.ref_id, r.pos, r.alignment.strand.value == "-", r.seq, r.qual) for r in reads]
    return lengths, rows


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda ln: int(ln.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
