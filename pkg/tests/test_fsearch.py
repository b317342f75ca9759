import pytest

from config import Budget
from fsearch import (NestedFamily, SearchStatus, TradeoffRow, TradeoffTable, exact_search, extend_code,
                     heuristic_search, naive_tradeoff, nested_family, tradeoff_table)
from zcore import ZChannelError, code_from_strings, free_point_count, validate_code, vt_code


def test_naive_table_n4(table_n4) -> None:
    assert {M: table_n4.F(M) for M in (2, 3, 4)} == {2: 12, 3: 9, 4: 4}
    assert table_n4.max_size == 4
    assert table_n4.witness_errors() == []


def test_naive_table_n2(table_n2) -> None:
    assert [table_n2.F(M) for M in table_n2.sizes()] == [4, 3, 0]


def test_naive_enumeration_is_limited() -> None:
    with pytest.raises(ZChannelError):
        naive_tradeoff(5)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_exact_search_agrees_with_enumeration(n: int) -> None:
    table = naive_tradeoff(n)
    for M in range(1, table.max_size + 1):
        result = exact_search(n, M)
        assert result.status is SearchStatus.OPTIMAL
        assert result.free_points == table.F(M)
        assert validate_code(result.code).valid
    assert exact_search(n, table.max_size + 1).status is SearchStatus.INFEASIBLE


def test_exact_search_examples() -> None:
    two = exact_search(4, 2)
    assert two.free_points == 12
    assert two.code.size == 2

    twelve = exact_search(6, 12)
    assert twelve.status is SearchStatus.OPTIMAL
    assert twelve.free_points == 16
    assert free_point_count(twelve.code) == 16


def test_exact_search_empty_code() -> None:
    result = exact_search(5, 0)
    assert result.free_points == 32


def test_extend_code_keeps_fixed_words() -> None:
    base = code_from_strings(['1111'])
    result = extend_code(base, 3)
    assert result.found
    assert base.words[0] in result.code.words
    assert validate_code(result.code).valid


@pytest.mark.slow
@pytest.mark.parametrize("n, M, expected", [
    (7, 18, 48),
    (8, 36, 76),
])
def test_exact_search_larger_lengths(n: int, M: int, expected: int) -> None:
    result = exact_search(n, M, budget=Budget(seconds=3600.0))
    assert result.status is SearchStatus.OPTIMAL
    assert result.free_points == expected


def test_nested_family_n6() -> None:
    family = nested_family(6)
    assert family.max_size == 12
    assert family.free_points()[7:] == [38, 33, 28, 23, 16]
    for smaller, larger in zip(family.chain, family.chain[1:]):
        assert set(smaller.words) < set(larger.words)
    assert sorted(family.exact) == list(range(1, 13))
    assert family.shortfalls() == {}
    assert family.table().witness_errors() == []


def test_nested_family_reports_prefixes_below_direct_search() -> None:
    chain = [code_from_strings(['0000']), code_from_strings(['0000', '1111'])]
    family = NestedFamily(4, chain, exact={M: exact_search(4, M) for M in (1, 2)})
    assert family.shortfalls() == {2: (10, 12)}
    table = family.table()
    assert table.F(2) == 12
    assert table.rows[2].status is SearchStatus.OPTIMAL
    assert table.witness_errors() == []


def test_nested_family_without_exact_check_has_no_shortfalls() -> None:
    family = nested_family(5, compare_exact=False)
    assert family.exact == {}
    assert family.shortfalls() == {}
    assert family.free_points()[0] == 31


@pytest.mark.slow
def test_nested_family_n7_flags_sizes_no_chain_reaches() -> None:
    family = nested_family(7, budget=Budget(seconds=3600.0))
    assert family.max_size == 18
    assert family.free_points()[-1] == 48
    short = family.shortfalls()
    assert short
    for M, (F, exact_F) in short.items():
        assert F == free_point_count(family.prefix(M)) < exact_F == family.exact[M].free_points
    table = family.table()
    assert all(table.F(M) == family.exact[M].free_points for M in range(1, 19))
    assert table.witness_errors() == []


def test_heuristic_search_reaches_target_and_is_reproducible() -> None:
    first = heuristic_search(6, target=12, budget=Budget(nodes=20_000), seed=11)
    again = heuristic_search(6, target=12, budget=Budget(nodes=20_000), seed=11)
    assert first.status is SearchStatus.HEURISTIC
    assert first.code.size == 12
    assert first.code == again.code
    assert validate_code(first.code).valid


def test_heuristic_search_improves_on_vt_start() -> None:
    result = heuristic_search(7, budget=Budget(nodes=2_000), seed=3)
    assert result.code.size >= vt_code(7, 0).size


@pytest.mark.slow
def test_heuristic_search_n10() -> None:
    result = heuristic_search(10, target=108, seed=1)
    assert result.code.size >= 108


def test_table_checks_flag_bad_rows(table_n4) -> None:
    table = TradeoffTable(4, rows=dict(table_n4.rows))
    assert table.monotonicity_violations() == []
    table.add(TradeoffRow(3, 12, SearchStatus.OPTIMAL, table_n4.witness(3)))
    assert table.monotonicity_violations() == [2]
    assert table.witness_errors() == ["M=3: witness has 9 free points, row says 12"]
    with pytest.raises(ZChannelError):
        table.witness(7)


def test_from_codes_keeps_best_witness() -> None:
    worse = code_from_strings(['0000', '1111'])
    better = code_from_strings(['0000', '0011'])
    table = TradeoffTable.from_codes(4, [worse, better], SearchStatus.HEURISTIC)
    assert table.F(0) == 16
    assert table.F(2) == 12
    assert table.witness(2) == better


def test_tradeoff_table_round_trips_through_store(store) -> None:
    built = tradeoff_table(4, method='naive', store=store)
    assert store.has_tradeoff(4)
    loaded = tradeoff_table(4, store=store)
    assert loaded.sizes() == built.sizes()
    assert [loaded.F(M) for M in loaded.sizes()] == [built.F(M) for M in built.sizes()]
    assert loaded.witness(4) == built.witness(4)


def test_tradeoff_table_exact_matches_naive() -> None:
    exact = tradeoff_table(4, method='exact', jobs=1)
    naive = naive_tradeoff(4)
    assert [exact.F(M) for M in exact.sizes()] == [naive.F(M) for M in naive.sizes()]


def test_tradeoff_table_rejects_unknown_method() -> None:
    with pytest.raises(ZChannelError):
        tradeoff_table(3, method='guess')
