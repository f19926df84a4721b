"""Unique-read binning and digital gene-expression aggregation.

Both queries are exposed as plain functions and as aggregate contracts so
they can run through :mod:`genodb.parexec` with any partition count.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping, NamedTuple, TextIO

from .errors import DataError, ReferentialError
from .parexec import AggregateContract, PartitionPlan, Timings, hash_splitter, run_parallel
from .seqcore import SampleKey, Tag


class BinnedTagRow(NamedTuple):
    rank: int
    frequency: int
    seq: str


class ExpressionRow(NamedTuple):
    gene_id: int
    sample: SampleKey
    total_frequency: int
    tag_count: int


def _order_key(item):
    seq, count = item
    return -count, seq


def rank_rows(counts) -> list[BinnedTagRow]:
    """Dense ranks under (frequency descending, sequence ascending)."""
    items = counts.items() if isinstance(counts, Mapping) else counts
    ordered = sorted(items, key=_order_key)
    return [BinnedTagRow(i, count, seq) for i, (seq, count) in enumerate(ordered, 1)]


def _count_many(state: Counter, seqs: list) -> Counter:
    state.update(s for s in seqs if "N" not in s)
    return state


def _count_one(state: Counter, seq: str) -> Counter:
    if "N" not in seq:
        state[seq] += 1
    return state


def _merge_counts(a: Counter, b: Counter) -> Counter:
    merged = Counter(a)
    merged.update(b)
    return merged


def binning_contract() -> AggregateContract:
    """Rows are sequences; N-containing sequences are ignored."""
    return AggregateContract(
        init=Counter,
        accumulate=_count_one,
        merge=_merge_counts,
        terminate=rank_rows,
        name="bin",
        accumulate_many=_count_many,
    )


def bin_sequences(seqs: Iterable[str], workers: int = 1,
                  timings: Timings | None = None) -> list[BinnedTagRow]:
    """Group identical N-free sequences and rank them by frequency."""
    if workers <= 1:
        return rank_rows(_count_many(Counter(), seqs if isinstance(seqs, list) else list(seqs)))
    plan = PartitionPlan(k=workers, splitter=hash_splitter(lambda s: s))
    return run_parallel(seqs, binning_contract(), plan, timings)


def bin_unique_reads(reads: Iterable, sample: SampleKey | None = None, workers: int = 1,
                     timings: Timings | None = None) -> list[BinnedTagRow]:
    """Rank the distinct N-free read sequences of ``sample`` by frequency.

    ``reads`` are objects with ``seq`` and ``sample`` attributes
    (:class:`~genodb.seqcore.ShortRead`); with ``sample=None`` every read counts.
    """
    if sample is None:
        seqs = [r.seq for r in reads]
    else:
        seqs = [r.seq for r in reads if r.sample == sample]
    return bin_sequences(seqs, workers, timings)


def _tag_index(tags, sample) -> dict[int, Tag]:
    if isinstance(tags, Mapping):
        tags = tags.values()
    return {t.tag_id: t for t in tags if t.sample == sample}


def expression_contract(tags: Mapping[int, Tag], sample: SampleKey) -> AggregateContract:
    """Rows are alignments already filtered to ``sample``; state maps gene -> (sum, count)."""

    def accumulate(state, a):
        tag = tags.get(a.target_id)
        if tag is None:
            raise ReferentialError(
                f"alignment {a.alignment_id} refers to tag {a.target_id}, "
                f"which is not a tag of sample {sample}")
        total, count = state.get(a.gene_id, (0, 0))
        state[a.gene_id] = (total + tag.frequency, count + 1)
        return state

    def merge(a, b):
        merged = dict(a)
        for gene, (total, count) in b.items():
            t0, c0 = merged.get(gene, (0, 0))
            merged[gene] = (t0 + total, c0 + count)
        return merged

    def terminate(state):
        return [ExpressionRow(g, sample, total, count) for g, (total, count) in sorted(state.items())]

    return AggregateContract(dict, accumulate, merge, terminate, name="expr")


def gene_expression(alignments: Iterable, tags, sample: SampleKey, workers: int = 1,
                    timings: Timings | None = None) -> list[ExpressionRow]:
    """Per gene: summed frequency of aligned tags and number of alignments.

    A tag aligned twice to the same gene counts twice, as a join followed
    by GROUP BY would.  Rows come back ordered by gene id.
    """
    index = _tag_index(tags, sample)
    rows = [a for a in alignments if a.sample == sample and a.target_kind == "tag"]
    contract = expression_contract(index, sample)
    if workers <= 1:
        return contract.terminate(contract.fold(rows))
    return run_parallel(rows, contract, PartitionPlan(k=workers), timings)


# -- TSV ------------------------------------------------------------------------

BIN_HEADER = "rank\tfrequency\tsequence"
EXPR_HEADER = "gene_id\ttotal_frequency\ttag_count"


def write_binned_tsv(rows: Iterable[BinnedTagRow], sink: TextIO) -> None:
    sink.write(BIN_HEADER + "\n")
    for r in rows:
        sink.write(f"{r.rank}\t{r.frequency}\t{r.seq}\n")


def write_expression_tsv(rows: Iterable[ExpressionRow], sink: TextIO) -> None:
    sink.write(EXPR_HEADER + "\n")
    for r in rows:
        sink.write(f"{r.gene_id}\t{r.total_frequency}\t{r.tag_count}\n")


def _read_tsv(source: TextIO, header: str):
    first = source.readline().rstrip("\n")
    if first != header:
        raise DataError(f"expected header {header!r}, got {first!r}")
    for line_no, line in enumerate(source, 2):
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 3:
            raise DataError(f"line {line_no}: expected 3 fields")
        yield line_no, fields


def read_binned_tsv(source: TextIO) -> list[BinnedTagRow]:
    return [BinnedTagRow(int(a), int(b), c) for _, (a, b, c) in _read_tsv(source, BIN_HEADER)]


def read_expression_tsv(source: TextIO, sample: SampleKey) -> list[ExpressionRow]:
    return [ExpressionRow(int(a), sample, int(b), int(c))
            for _, (a, b, c) in _read_tsv(source, EXPR_HEADER)]
