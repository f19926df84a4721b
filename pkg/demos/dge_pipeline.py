# %% [markdown]
# Tag counting on a small synthetic DGE run: import, bin, align, count per gene.
#
#     python3 demos/dge_pipeline.py

# %%
import tempfile
from pathlib import Path

from genodb import fastx
from genodb.genqueries import bin_unique_reads, gene_expression
from genodb.genstore import Store, read_alignment_tsv
from genodb.synthetic import generate_dge

work = Path(tempfile.mkdtemp(prefix="genodb-dge-"))
corpus = generate_dge(work / "corpus", scale=0.002, seed=42)
print(sorted(p.name for p in corpus.root.iterdir()))

# %%
store = Store(work / "db")
for name, lane in corpus.reads:
    n = store.import_fastq_normalized(corpus.path(name), corpus.sample, lane)
    print(name, n, "reads")
store.add_references(fastx.iter_fasta(corpus.path(corpus.reference)))

# %%
# distinct N-free sequences, most frequent first
tags = bin_unique_reads(store.reads_for_sample(corpus.sample), workers=4)
for row in tags[:5]:
    print(row)
print(len(tags), "tags")
store.store_tags(corpus.sample, tags)

# %%
store.add_alignments(read_alignment_tsv(corpus.path(corpus.alignments)), corpus.sample, "tag")
expr = gene_expression(store.alignments, store.tags, corpus.sample)
top = sorted(expr, key=lambda r: -r.total_frequency)[:5]
for r in top:
    print(store.references[r.gene_id - 1].name, r.total_frequency, r.tag_count)

# %%
store.close()
