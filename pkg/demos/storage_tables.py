# %% [markdown]
# Bytes per representation for the two synthetic twins.
#
#     python3 demos/storage_tables.py [scale]

# %%
import sys
import tempfile
import time
from pathlib import Path

from genodb.genstore import import_corpus, storage_report
from genodb.synthetic import generate_dge, generate_reseq

scale = float(sys.argv[1]) if len(sys.argv) > 1 else 0.01
work = Path(tempfile.mkdtemp(prefix="genodb-storage-"))

# %%
for kind, gen in (("dge", generate_dge), ("reseq", generate_reseq)):
    t0 = time.perf_counter()
    corpus = gen(work / kind, scale=scale, seed=1)
    report = storage_report(import_corpus(corpus), corpus)
    print(f"== {kind} @ {scale:g} ({time.perf_counter() - t0:.1f} s)")
    print(report.format())
