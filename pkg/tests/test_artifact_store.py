import pytest

from artifact_store import MissingArtifactError
from fsearch import SearchResult, SearchStatus
from lpbound import f_upper_bound
from zcore import ZChannelError, code_from_strings, vt_code, write_code


def test_require_lists_missing_files(store) -> None:
    with pytest.raises(MissingArtifactError) as info:
        store.require(['tradeoff_n5.tsv', 'cw_cache.tsv'])
    assert info.value.artifacts == ['cw_cache.tsv', 'tradeoff_n5.tsv']


def test_load_tradeoff_without_file(store) -> None:
    assert not store.has_tradeoff(5)
    with pytest.raises(MissingArtifactError):
        store.load_tradeoff(5)


def test_saved_table_has_witness_files(store, table_n4) -> None:
    store.save_tradeoff(table_n4)
    names = store.listing()
    assert 'tradeoff_n4.tsv' in names
    assert {f"tradeoff_n4_M{M}.zcode" for M in table_n4.sizes()} <= set(names)
    assert store.tradeoff_tables(range(1, 6)).keys() == {4}


def test_tampered_witness_is_rejected(store, table_n4) -> None:
    store.save_tradeoff(table_n4)
    write_code(code_from_strings(['0000', '1111']), store.path(store.witness_name(4, 2)))
    with pytest.raises(ZChannelError):
        store.load_tradeoff(4)


def test_heuristic_cache_keeps_the_larger_code(store) -> None:
    big = vt_code(6, 0)
    small = code_from_strings(['000000', '111111'])
    store.save_heuristic(SearchResult(6, big.size, SearchStatus.HEURISTIC, big))
    store.save_heuristic(SearchResult(6, small.size, SearchStatus.HEURISTIC, small))
    assert store.load_heuristic(6) == big
    assert store.load_heuristic(7) is None


def test_bounds_round_trip(store) -> None:
    result = f_upper_bound(6, 12)
    store.save_bound(result)
    cached = store.load_bounds(6)[12]
    assert cached.value == 16
    assert cached.optimal_distributions == result.optimal_distributions


def test_scheme_round_trip(store, example_one_scheme) -> None:
    path = store.save_scheme(example_one_scheme, 'example-one')
    assert path.name == 'scheme_example-one.json'
    assert store.load_scheme('example-one').codes == example_one_scheme.codes
    with pytest.raises(MissingArtifactError):
        store.load_scheme('absent')


def test_table_file_keeps_three_columns_and_statuses_beside_it(store, table_n4) -> None:
    store.save_tradeoff(table_n4)
    header = store.path(store.tradeoff_name(4)).read_text().splitlines()[0]
    assert header.split('\t') == ['M', 'F', 'witness']
    loaded = store.load_tradeoff(4)
    assert {row.status for row in loaded.rows.values()} == {SearchStatus.OPTIMAL}

    store.path(store.status_name(4)).unlink()
    unproved = store.load_tradeoff(4)
    assert {row.status for row in unproved.rows.values()} == {SearchStatus.INCOMPLETE}
    assert unproved.F(3) == 9
