import io
import threading
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from genodb.genqueries import binning_contract, expression_contract
from genodb.parexec import (
    PartitionPlan,
    Timings,
    count_contract,
    hash_splitter,
    partition,
    run_parallel,
    run_parallel_ordered,
)
from genodb.seqcore import SampleKey, Tag

S = SampleKey(1, 1, 1)


@pytest.mark.parametrize("k", [1, 4])
def test_count(k):
    assert run_parallel(range(10_000), count_contract(), PartitionPlan(k=k)) == 10_000


def test_empty_input_terminates_init():
    assert run_parallel([], count_contract(), PartitionPlan(k=3)) == 0
    assert run_parallel([], binning_contract(), PartitionPlan(k=2)) == []


def test_plan_validation():
    with pytest.raises(ValueError):
        PartitionPlan(k=0)


@given(st.lists(st.integers(), max_size=100), st.integers(1, 8))
def test_partition_is_total(rows, k):
    for plan in (PartitionPlan(k=k), PartitionPlan(k=k, splitter=hash_splitter(str))):
        parts = partition(rows, plan)
        assert len(parts) == k
        assert Counter(x for p in parts for x in p) == Counter(rows)


@given(st.lists(st.text(alphabet="ACN", max_size=3), max_size=200))
def test_binning_identical_for_every_k(seqs):
    base = run_parallel(seqs, binning_contract(), PartitionPlan(k=1))
    for k in (2, 8):
        assert run_parallel(seqs, binning_contract(), PartitionPlan(k=k)) == base
        plan = PartitionPlan(k=k, splitter=hash_splitter(lambda s: s))
        assert run_parallel(seqs, binning_contract(), plan) == base


def _states(contract, rows_list):
    return [contract.fold(rows) for rows in rows_list]


seq_lists = st.lists(st.text(alphabet="ACGN", max_size=3), max_size=30)


@given(seq_lists, seq_lists, seq_lists)
def test_binning_merge_laws(x, y, z):
    c = binning_contract()
    a, b, d = _states(c, [x, y, z])
    assert c.terminate(c.merge(a, c.merge(b, d))) == c.terminate(c.merge(c.merge(a, b), d))
    assert c.terminate(c.merge(a, b)) == c.terminate(c.merge(b, a))


class _A:
    def __init__(self, aid, tag, gene):
        self.alignment_id, self.target_id, self.gene_id = aid, tag, gene


align_lists = st.lists(st.builds(_A, st.integers(1, 99), st.integers(1, 5), st.integers(1, 4)),
                       max_size=30)


@given(align_lists, align_lists, align_lists)
def test_expression_merge_laws(x, y, z):
    tags = {i: Tag(i, S, "A", i * 3, i) for i in range(1, 6)}
    c = expression_contract(tags, S)
    a, b, d = _states(c, [x, y, z])
    assert c.terminate(c.merge(a, c.merge(b, d))) == c.terminate(c.merge(c.merge(a, b), d))
    assert c.terminate(c.merge(a, b)) == c.terminate(c.merge(b, a))


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_count_merge_laws(x, y, z):
    c = count_contract()
    a, b, d = _states(c, [[0] * x, [0] * y, [0] * z])
    assert c.merge(a, c.merge(b, d)) == c.merge(c.merge(a, b), d)
    assert c.merge(a, b) == c.merge(b, a)


def test_first_error_aborts_run():
    def accumulate(state, row):
        if row == 7:
            raise KeyError("boom")
        return state

    contract = count_contract()
    bad = type(contract)(contract.init, accumulate, contract.merge, contract.terminate)
    with pytest.raises(KeyError):
        run_parallel(range(20), bad, PartitionPlan(k=4))


def test_partitions_run_on_worker_threads():
    seen = set()

    def accumulate(state, row):
        seen.add(threading.get_ident())
        return state + 1

    c = count_contract()
    plain = type(c)(c.init, accumulate, c.merge, c.terminate)
    assert run_parallel(range(1000), plain, PartitionPlan(k=4)) == 1000
    assert seen and threading.get_ident() not in seen


def test_ordered_ranges():
    ranges = [[1, 2], [3], [4, 5, 6]]
    assert run_parallel_ordered(ranges, sum, list) == [3, 3, 15]
    assert run_parallel_ordered(ranges, count_contract(), list, workers=2) == [2, 1, 3]
    assert run_parallel_ordered([], sum, list) == []
    single = run_parallel_ordered([[1, 2, 3]], sum, lambda r: r[0], workers=1)
    assert single == 6


def test_timings_tsv():
    t = Timings()
    run_parallel(range(10), count_contract(), PartitionPlan(k=2), t)
    buf = io.StringIO()
    t.to_tsv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "phase\tk\tmillis"
    assert [ln.split("\t")[0] for ln in lines[1:]] == [
        "count:partition", "count:accumulate", "count:merge", "count:terminate"]
    assert all(ln.split("\t")[1] == "2" for ln in lines[1:])
