"""``genodb`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.
Timing figures go to stderr so stdout stays byte-reproducible.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from . import __version__, fastx, synthetic
from .consensus import AlignedRead, consensus_partitioned
from .errors import DataError, GenoDBError, SourceIOError
from .genqueries import bin_unique_reads, gene_expression, write_binned_tsv, write_expression_tsv
from .genstore import Store, import_corpus, load_corpus, read_alignment_tsv, storage_report
from .parexec import Timings, default_workers, run_parallel_ordered
from .seqcore import GeneExpression, SampleKey

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3
MIN_BUFFER = 1024

log = logging.getLogger("genodb")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _buffer_size(text: str) -> int:
    value = int(text)
    if value < MIN_BUFFER:
        raise argparse.ArgumentTypeError(f"buffer size must be at least {MIN_BUFFER} bytes")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _scale(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("scale must lie in (0, 1]")
    return value


def _sample(args) -> SampleKey:
    return SampleKey(args.experiment, args.sample_group, args.sample)


@contextmanager
def _output(path):
    """Binary sink for ``--output`` (stdout when absent or '-')."""
    if path in (None, "-"):
        yield sys.stdout.buffer
        sys.stdout.buffer.flush()
        return
    try:
        fh = open(path, "wb")
    except OSError as exc:
        raise SourceIOError(f"cannot write {path!r}: {exc}") from None
    with fh:
        yield fh


def _write_text(args, render):
    buf = io.StringIO(newline="\n")
    render(buf)
    with _output(args.output) as sink:
        sink.write(buf.getvalue().encode("utf-8"))


def _say(args, line: str):
    _write_text(args, lambda out: out.write(line + "\n"))


def _open_store(args, readonly: bool) -> Store:
    if args.store is None:
        raise DataError("this command needs --store DIR")
    return Store(args.store, readonly=readonly)


def _write_timings(args, timings: Timings):
    if args.timings:
        with open(args.timings, "w", encoding="utf-8", newline="\n") as fh:
            timings.to_tsv(fh)


# -- commands ----------------------------------------------------------------

def cmd_import(args) -> int:
    sample = _sample(args)
    with _open_store(args, readonly=False) as store:
        if args.mode == "normalized":
            n = store.import_fastq_normalized(args.path, sample, args.lane, args.buffer_size)
            _say(args, f"{n} reads imported")
        elif args.mode == "1to1":
            n = store.import_fastq_1to1(args.path, sample, args.lane, args.buffer_size)
            _say(args, f"{n} rows imported")
        else:
            fmt = args.format or {"fastq": "FastQ", "fasta": "Fasta"}[fastx.sniff_format(args.path)]
            guid = store.register_blob(args.path, sample, args.lane, fmt)
            entry = store.blob(guid)
            _say(args, f"registered {guid}\t{entry.format_tag}\t{entry.byte_length} bytes")
    return EXIT_OK


def _resolve_count_source(args):
    path, fmt = args.source, args.format
    if not os.path.exists(path) and args.store is not None:
        with _open_store(args, readonly=True) as store:
            entry = store.blob(path)
        path = entry.path
        if fmt == "auto":
            fmt = {"FastQ": "fastq", "Fasta": "fasta"}.get(entry.format_tag, "auto")
    if not os.path.isfile(path):
        raise SourceIOError(f"no such file or registered blob: {args.source!r}")
    if fmt == "auto":
        fmt = fastx.sniff_format(path)
    return path, fmt


def cmd_count(args) -> int:
    path, fmt = _resolve_count_source(args)
    timings = Timings()
    started = time.perf_counter()
    k = args.k or 1
    if fmt == "fasta" and k > 1:
        if fastx.sniff_format(path) != "fasta":
            raise DataError(f"{path}: not a FASTA file")
        size = os.path.getsize(path)
        ranges = [(i * size // k, (i + 1) * size // k) for i in range(k)]
        n = run_parallel_ordered(
            ranges, lambda r: fastx.count_fasta_range(path, r[0], r[1], args.buffer_size),
            sum, args.workers, timings, name="count")
    else:
        if k > 1:
            log.warning("FASTQ is counted by one worker; --k ignored")
            k = 1
        n = fastx.count_records(path, fmt, args.buffer_size)
    timings.record("count:total", k, started)
    elapsed = time.perf_counter() - started
    _say(args, f"{n} records")
    rate = n / elapsed if elapsed > 0 else float("inf")
    print(f"elapsed_s\t{elapsed:.3f}\nrecords_per_s\t{rate:.0f}", file=sys.stderr)
    _write_timings(args, timings)
    return EXIT_OK


def cmd_load_reference(args) -> int:
    with _open_store(args, readonly=False) as store:
        refs = store.add_references(fastx.iter_fasta(args.path, args.buffer_size))
    _say(args, f"{len(refs)} references loaded")
    return EXIT_OK


def cmd_load_alignments(args) -> int:
    with _open_store(args, readonly=False) as store:
        n = store.add_alignments(read_alignment_tsv(args.path), _sample(args), args.target)
    _say(args, f"{n} alignments loaded")
    return EXIT_OK


def cmd_bin(args) -> int:
    sample = _sample(args)
    timings = Timings()
    with _open_store(args, readonly=not args.save) as store:
        rows = bin_unique_reads(store.reads_for_sample(sample), None, args.workers, timings)
        if args.save:
            store.store_tags(sample, rows)
    _write_text(args, lambda out: write_binned_tsv(rows, out))
    _write_timings(args, timings)
    return EXIT_OK


def cmd_expr(args) -> int:
    sample = _sample(args)
    timings = Timings()
    with _open_store(args, readonly=not args.save) as store:
        rows = gene_expression(store.alignments, store.tags, sample, args.workers, timings)
        if args.save:
            store.store_gene_expression(
                GeneExpression(r.gene_id, r.sample, r.total_frequency, r.tag_count) for r in rows)
    _write_text(args, lambda out: write_expression_tsv(rows, out))
    _write_timings(args, timings)
    return EXIT_OK


def _ensure_references(store: Store, path, buffer_size):
    records = list(fastx.iter_fasta(path, buffer_size))
    if not store.references:
        store.add_references(records)
        return
    names = [r.name.split(None, 1)[0] for r in records]
    if names != [r.name for r in store.references]:
        raise DataError(f"{path}: reference names differ from those already in the store")


def cmd_consensus(args) -> int:
    sample = _sample(args)
    timings = Timings()
    with _open_store(args, readonly=args.reference is None) as store:
        if args.reference is not None:
            _ensure_references(store, args.reference, args.buffer_size)
        if not store.references:
            raise DataError("the store holds no reference sequences; load them first")
        alignments = store.alignments_for_sample(sample, "read")
        if not alignments:
            log.warning("sample %s has no read alignments; consensus is all N", sample)
        aligned = sorted(
            (AlignedRead(a, store.reads[a.target_id - 1].seq, store.reads[a.target_id - 1].qual)
             for a in alignments),
            key=lambda ar: (ar.ref_id, ar.pos, ar.alignment.alignment_id))
        result = consensus_partitioned(aligned, store.references, args.k or args.workers,
                                       args.workers, timings)
        records = [fastx.FastaRecord(ref.name, result[ref.ref_id].seq) for ref in store.references]
    with _output(args.output) as sink:
        fastx.write_fasta(records, sink, args.line_width)
    _write_timings(args, timings)
    return EXIT_OK


def cmd_storage_report(args) -> int:
    corpus = load_corpus(args.corpus)
    store = import_corpus(corpus, buffer_size=args.buffer_size, workers=args.workers)
    report = storage_report(store, corpus)
    _write_text(args, lambda out: out.write(report.format()))
    return EXIT_OK


def cmd_check(args) -> int:
    with _open_store(args, readonly=True) as store:
        problems = store.check_integrity()
        counts = store.row_counts()
    lines = [f"{name}\t{n}" for name, n in counts.items()] + [f"problem\t{p}" for p in problems]
    _write_text(args, lambda out: out.write("\n".join(lines) + "\n"))
    return EXIT_DATA if problems else EXIT_OK


def cmd_gen_synthetic(args) -> int:
    out = Path(args.output_dir)
    if args.kind == "count-fasta":
        out.parent.mkdir(parents=True, exist_ok=True)
        n = args.records or synthetic.scaled(synthetic.DGE_READS, args.scale)
        synthetic.write_count_fasta(out, n, args.seed)
        print(f"{n} records written to {out}")
        return EXIT_OK
    gen = synthetic.generate_dge if args.kind == "dge" else synthetic.generate_reseq
    corpus = gen(out, scale=args.scale, seed=args.seed, lanes=args.lanes)
    for table, name in corpus.files():
        print(f"{table}\t{name}\t{(out / name).stat().st_size}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", help="store directory")
    common.add_argument("--buffer-size", type=_buffer_size, default=fastx.DEFAULT_BUFFER_SIZE,
                        metavar="BYTES", help="parser buffer size (>= 1024)")
    common.add_argument("--workers", type=_positive, default=default_workers(),
                        help="worker threads (default: CPU count)")
    common.add_argument("--output", "-o", help="output file (default stdout)")
    common.add_argument("--timings", metavar="TSV", help="write phase timings here")
    common.add_argument("-v", "--verbose", action="store_true")

    sample = argparse.ArgumentParser(add_help=False)
    sample.add_argument("-e", "--experiment", type=_positive, required=True)
    sample.add_argument("-g", "--sample-group", type=_positive, required=True)
    sample.add_argument("-s", "--sample", type=_positive, required=True)

    p = _Parser(prog="genodb", description="Short-read storage and query operators.")
    p.add_argument("--version", action="version", version=f"genodb {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("import", parents=[common, sample], help="import or register a read file")
    c.add_argument("path")
    c.add_argument("--lane", type=int, default=1)
    c.add_argument("--mode", choices=("normalized", "1to1", "register"), default="normalized")
    c.add_argument("--format", choices=("FastQ", "Fasta", "other"),
                   help="format tag for --mode register (default: sniffed)")
    c.set_defaults(func=cmd_import)

    c = sub.add_parser("count", parents=[common], help="count records of a file or blob")
    c.add_argument("source", help="file path, or blob guid together with --store")
    c.add_argument("--format", choices=("auto", "fastq", "fasta"), default="auto")
    c.add_argument("--k", type=_positive, help="byte ranges counted in parallel (FASTA only)")
    c.set_defaults(func=cmd_count)

    c = sub.add_parser("load-reference", parents=[common], help="load reference FASTA")
    c.add_argument("path")
    c.set_defaults(func=cmd_load_reference)

    c = sub.add_parser("load-alignments", parents=[common, sample], help="load alignment TSV")
    c.add_argument("path")
    c.add_argument("--target", choices=("tag", "read"), default="tag")
    c.set_defaults(func=cmd_load_alignments)

    c = sub.add_parser("bin", parents=[common, sample], help="rank unique N-free reads")
    c.add_argument("--save", action="store_true", help="store the result as the sample's tags")
    c.set_defaults(func=cmd_bin)

    c = sub.add_parser("expr", parents=[common, sample], help="gene expression table")
    c.add_argument("--save", action="store_true", help="store the result in the store")
    c.set_defaults(func=cmd_expr)

    c = sub.add_parser("consensus", parents=[common, sample], help="consensus FASTA")
    c.add_argument("--reference", help="reference FASTA (loaded if the store has none)")
    c.add_argument("--k", type=_positive, help="reference partitions (default: --workers)")
    c.add_argument("--line-width", type=int, default=60)
    c.set_defaults(func=cmd_consensus)

    c = sub.add_parser("storage-report", parents=[common], help="storage accounting of a corpus")
    c.add_argument("corpus", help="corpus directory")
    c.set_defaults(func=cmd_storage_report)

    c = sub.add_parser("check", parents=[common], help="full referential integrity scan")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("gen-synthetic", help="write a seeded synthetic corpus")
    c.add_argument("output_dir", help="corpus directory (or FASTA path for count-fasta)")
    c.add_argument("--kind", choices=("dge", "reseq", "count-fasta"), default="dge")
    c.add_argument("--scale", type=_scale, default=0.01)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--lanes", type=int, default=2)
    c.add_argument("--records", type=_positive, help="record count for count-fasta")
    c.set_defaults(func=cmd_gen_synthetic)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors exit 1
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"genodb: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SourceIOError, OSError) as exc:
        print(f"genodb: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GenoDBError, ValueError) as exc:
        print(f"genodb: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
