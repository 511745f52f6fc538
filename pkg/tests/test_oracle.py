import json
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnas.oracle import (
    AccuracyRangeError,
    BenchmarkError,
    DuplicateKeyError,
    EmptyBenchmarkError,
    GenerationCapError,
    NotFoundError,
    SchemaError,
    canonical_accuracy,
    dump_benchmark,
    load_benchmark,
    parse_benchmark,
    query,
    rank,
    rank_of_value,
    save_benchmark,
    synth_benchmark,
    table_from_values,
    top_k,
)
from gnas.search_space import Architecture, decode

from .conftest import PLANTED_TOP


def brute_rank(table, key, metric="val"):
    attr = "val_accuracy" if metric == "val" else "test_accuracy"
    mine = getattr(table.records[key], attr)
    return 1 + sum(getattr(r, attr) > mine for r in table.records.values())


def test_planted_fixture_top(fixture_table):
    assert len(fixture_table) == 6561
    assert fixture_table.rank_index[0] == PLANTED_TOP
    rec = query(fixture_table, PLANTED_TOP)
    assert (rec.val_accuracy, rec.test_accuracy) == (82.93, 81.11)
    second = fixture_table.records[fixture_table.rank_index[1]].val_accuracy
    assert rec.val_accuracy > second


def test_rank_ties_share_smallest():
    t = table_from_values("d", {
        "space-1|GCN,GCN,GCN,GCN": 80.0,
        "space-1|GAT,GCN,GCN,GCN": 80.0,
        "space-1|GIN,GCN,GCN,GCN": 70.0,
        "space-1|ARMA,GCN,GCN,GCN": 90.0,
    })
    assert rank(t, "space-1|GCN,GCN,GCN,GCN") == 2
    assert rank(t, "space-1|GAT,GCN,GCN,GCN") == 2
    assert rank(t, "space-1|GIN,GCN,GCN,GCN") == 4
    assert rank_of_value(t, 95.0) == 1
    # deterministic index, ties broken by key
    assert t.rank_index[1:3] == ("space-1|GAT,GCN,GCN,GCN", "space-1|GCN,GCN,GCN,GCN")


def test_rank_matches_brute_force(fixture_table):
    rng = np.random.default_rng(9)
    keys = list(fixture_table.records)
    for i in rng.choice(len(keys), 50, replace=False):
        for metric in ("val", "test"):
            assert rank(fixture_table, keys[i], metric) == brute_rank(fixture_table, keys[i], metric)


def test_not_found(fixture_table):
    with pytest.raises(NotFoundError):
        query(fixture_table, "space-2|GCN,GCN,GCN,GCN")
    with pytest.raises(KeyError):
        rank(fixture_table, "space-2|GCN,GCN,GCN,GCN")


def test_top_k(fixture_table):
    top = top_k(fixture_table, 5)
    assert top[0][0].key == PLANTED_TOP
    vals = [r.val_accuracy for _, r in top]
    assert vals == sorted(vals, reverse=True)
    with pytest.raises(ValueError):
        top_k(fixture_table, 0)


@pytest.mark.parametrize(
    "raw,expected",
    [(83.125, 83.13), (83.135, 83.14), ("82.265", 82.27), (Decimal("0.005"), 0.01), (70, 70.0)],
)
def test_canonical_accuracy_half_up(raw, expected):
    assert canonical_accuracy(raw) == expected


@given(st.integers(0, 10000))
def test_canonical_accuracy_idempotent(cents):
    v = cents / 100
    assert canonical_accuracy(v) == v
    assert canonical_accuracy(f"{v:.2f}") == v


def test_dump_load_roundtrip(tmp_path, toy_table):
    p = save_benchmark(toy_table, tmp_path / "toy.gnasbench.json")
    again = load_benchmark(p)
    assert again.records == toy_table.records
    assert dump_benchmark(again) == p.read_text()


def test_regeneration_byte_identical(toy_space, registry):
    a = dump_benchmark(synth_benchmark(toy_space, "x", 11, registry=registry))
    b = dump_benchmark(synth_benchmark(toy_space, "x", 11, registry=registry))
    c = dump_benchmark(synth_benchmark(toy_space, "x", 12, registry=registry))
    assert a == b != c


def test_restrict_and_topology_ids(registry):
    t = table_from_values("d", {"space-1|GCN,GCN,GCN,GCN": 1, "space-2|GCN,GCN,GCN,GCN": 2})
    assert t.topology_ids == ["space-1", "space-2"]
    assert len(t.restrict("space-2")) == 1
    with pytest.raises(BenchmarkError):
        t.restrict("space-3")


def doc(records):
    return {"dataset": "d", "records": records}


def test_schema_errors():
    with pytest.raises(EmptyBenchmarkError):
        parse_benchmark(doc([]))
    with pytest.raises(SchemaError) as err:
        parse_benchmark(doc([{"arch": "space-1|GCN,GCN,GCN,GCN", "val_acc": 1.0}]))
    assert err.value.offset == 0
    with pytest.raises(SchemaError):
        parse_benchmark(doc([{"arch": "space-1|GCN,XX,GCN,GCN", "val_acc": 1, "test_acc": 1}]))
    with pytest.raises(SchemaError):
        parse_benchmark(doc([{"arch": "space-1|GCN,GCN,GCN,GCN", "val_acc": "1", "test_acc": 1}]))
    with pytest.raises(AccuracyRangeError):
        parse_benchmark(doc([{"arch": "space-1|GCN,GCN,GCN,GCN", "val_acc": 101, "test_acc": 1}]))
    rec = {"arch": "space-1|GCN,GCN,GCN,GCN", "val_acc": 1, "test_acc": 1}
    with pytest.raises(DuplicateKeyError):
        parse_benchmark(doc([rec, dict(rec, arch="space-1|gcn,gcn,gcn,gcn")]))


def test_load_normalizes_aliases_and_keeps_optional_fields(tmp_path):
    p = tmp_path / "b.json"
    p.write_text(json.dumps(doc([
        {"arch": "space-1|gcn,sage,skip,fc", "val_acc": 80.125, "test_acc": 79.0, "params": 1200},
    ])))
    t = load_benchmark(p)
    rec = query(t, "space-1|GCN,GraphSAGE,Skip-Connection,Fully-Connected")
    assert rec.val_accuracy == 80.13 and rec.params == 1200


def test_generation_cap(space, registry):
    with pytest.raises(GenerationCapError):
        synth_benchmark(space, cap=100, registry=registry)


def test_bad_planted_pattern(space, registry):
    with pytest.raises(BenchmarkError):
        synth_benchmark(space, planted="GCN,GAT", registry=registry)


@given(st.integers(0, 50))
@settings(max_examples=10, deadline=None)
def test_planted_is_unique_max(seed):
    from gnas.search_space import default_registry

    reg = default_registry()
    sp = reg.space("space-3", ["GCN", "GAT", "GIN", "ARMA"])
    pattern = ["GIN", "ARMA", "GCN", "GAT"]
    t = synth_benchmark(sp, "d", seed, pattern, registry=reg)
    top = t.rank_index[0]
    assert top == "space-3|GIN,ARMA,GCN,GAT"
    assert rank(t, top) == 1
    assert sum(r.val_accuracy == t.records[top].val_accuracy for r in t.records.values()) == 1


def test_values_in_range(fixture_table):
    for r in fixture_table.records.values():
        assert 50 <= r.val_accuracy <= 95 and 50 <= r.test_accuracy <= 95
        assert round(r.val_accuracy, 2) == r.val_accuracy


def test_op_baseline_picks_best_single_op(registry):
    from gnas.oracle import op_baseline

    t = table_from_values("d", {
        "space-1|GCN,GCN,GCN,GCN": 80.0,
        "space-2|GCN,GCN,GCN,GCN": 81.0,
        "space-1|GAT,GCN,GCN,GCN": 90.0,
    })
    rec, vr, tr = op_baseline(t, "gcn")
    assert rec.arch_key == "space-2|GCN,GCN,GCN,GCN" and (vr, tr) == (2, 2)
    with pytest.raises(NotFoundError):
        op_baseline(t, "GIN")
