# %% [markdown]
# Consensus three ways: pivot + group, sliding window, partitioned.
#
#     python3 demos/consensus_walkthrough.py

# %%
from genodb.consensus import (
    AlignedRead,
    consensus_partitioned,
    consensus_pivot,
    consensus_sliding,
    pileup_columns,
)
from genodb.seqcore import Alignment, ReferenceSequence, SampleKey, Strand

s = SampleKey(1, 1, 1)
ref = ReferenceSequence(1, "chrT", "ACGTACGTACGTACGT")


def read(i, pos, seq, qual, strand=Strand.FORWARD):
    return AlignedRead(Alignment(i, s, i, 1, pos, strand, "read"), seq, bytes(qual))


reads = [
    read(1, 1, "ACGTAC", [30] * 6),
    read(2, 4, "TACCTA", [20, 20, 20, 5, 20, 20]),
    read(3, 5, "GGTACG", [35] * 6, Strand.REVERSE),  # stored as sequenced
    read(4, 12, "TACGT", [10] * 5),
]

# %%
for col in pileup_columns(reads, [ref]):
    print(col.pos, col.entries)

# %%
print(consensus_pivot(reads, [ref])[1].seq)
print(consensus_sliding(reads, [ref])[1].seq)
print(consensus_partitioned(reads, [ref], k=3)[1].seq)

# %% [markdown]
# Read 3 is on the reverse strand, so its bases enter the pileup reverse
# complemented (GGTACG -> CGTACC) with qualities reversed.  At position 7
# C scores 6 and T scores 36.  Nothing covers position 11: N.
