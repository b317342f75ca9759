import pytest

from fsearch import naive_tradeoff
from twostage import (FeedbackError, MissingTableError, SchemeConstraintError, SymmetricProfile, TwoStageScheme,
                      build_scheme, build_symmetric, count_messages, decode, dp_optimize, encode, general_optimize,
                      load_scheme, neighbors, save_scheme, verify_exhaustive)
from zcore import Word, ZChannelError, free_points, word_to_string


def W(text: str) -> Word:
    return Word.parse(text)


@pytest.fixture(scope='module')
def small_tables():
    return {n2: naive_tradeoff(n2) for n2 in range(1, 5)}


def test_degradation_neighbors() -> None:
    assert neighbors(W('11011'), 'in') == {W('11111')}
    assert neighbors(W('11011'), 'out') == {W('01011'), W('10011'), W('11001'), W('11010')}
    assert neighbors(W('00000'), 'out') == set()
    with pytest.raises(ZChannelError):
        neighbors(W('00000'), 'up')


def test_example_one_profile(table_n4, example_one_scheme) -> None:
    profile = SymmetricProfile.from_sizes(5, 4, (2, 2, 3, 3, 4, 4), table_n4)
    assert profile.chain_violations() == []
    assert profile.message_count() == 96
    assert count_messages(example_one_scheme) == 96
    assert {example_one_scheme.free_count(v) for v in (0b00000, 0b00111, 0b11110)} == {12, 9, 4}
    assert example_one_scheme.constraint_violations() == []


def test_example_one_labeling(example_one_scheme) -> None:
    v = 0b11011
    assert example_one_scheme.codes[v].as_strings() == ['0000', '0011', '1100', '1111']
    labels = example_one_scheme.labeling[v]
    assert sorted(word_to_string(p, 4) for p in labels) == ['0101', '0110', '1001', '1010']
    assert set(labels.values()) == {0b11111}


def test_profile_chain_violation_names_the_weight(table_n4) -> None:
    profile = SymmetricProfile.from_sizes(5, 4, (2, 3, 3, 3, 4, 4), table_n4)
    assert profile.chain_violations()[0] == 0
    with pytest.raises(SchemeConstraintError, match='weight 0'):
        build_symmetric(profile, table_n4)


def test_empty_profile_carries_no_messages(table_n4) -> None:
    profile = SymmetricProfile.from_sizes(5, 4, (0,) * 6, table_n4)
    assert profile.message_count() == 0
    assert count_messages(build_symmetric(profile, table_n4)) == 0


def test_profile_rejects_unknown_size(table_n4) -> None:
    with pytest.raises(SchemeConstraintError):
        SymmetricProfile.from_sizes(5, 4, (2, 2, 3, 3, 4, 5), table_n4)


def test_encode_examples(example_one_scheme) -> None:
    m = example_one_scheme.message_number(0b11111, 2)
    assert example_one_scheme.message(m) == (0b11111, 2)

    first, second = encode(example_one_scheme, m, W('11111'))
    assert (first, second) == (W('11111'), W('1100'))

    first, second = encode(example_one_scheme, m, W('11011'))
    assert first == W('11111')
    assert second == W('1001')

    with pytest.raises(FeedbackError):
        encode(example_one_scheme, m, W('00111'))


def test_decode_examples(example_one_scheme) -> None:
    from_free_point = decode(example_one_scheme, W('110110101'))
    assert example_one_scheme.message(from_free_point) == (0b11111, 0)

    from_shadow = decode(example_one_scheme, W('110110011'))
    assert example_one_scheme.message(from_shadow) == (0b11011, 1)
    assert decode(example_one_scheme, W('110110001')) == from_shadow


def test_error_free_round_trip(example_one_scheme) -> None:
    scheme = example_one_scheme
    decoded = set()
    for m in range(1, count_messages(scheme) + 1):
        u, _ = scheme.message(m)
        first, second = encode(scheme, m, Word(scheme.n1, u))
        received = Word(scheme.n, (first.bits << scheme.n2) | second.bits)
        assert decode(scheme, received) == m
        decoded.add(m)
    assert len(decoded) == 96


def test_message_out_of_range(example_one_scheme) -> None:
    with pytest.raises(ZChannelError):
        example_one_scheme.message(97)
    with pytest.raises(ZChannelError):
        example_one_scheme.message(0)


def test_verify_example_one(example_one_scheme) -> None:
    report = verify_exhaustive(example_one_scheme)
    assert report.passed
    assert report.first_failure is None
    # one error-free case per message plus one per 1 in either stage
    assert report.cases > 96


def test_verify_example_two(example_two_scheme) -> None:
    assert count_messages(example_two_scheme) == 53
    assert example_two_scheme.constraint_violations() == []
    report = verify_exhaustive(example_two_scheme, jobs=2, chunk=16)
    assert report.passed


def test_verify_catches_a_mislabeled_point(example_one_scheme) -> None:
    labeling = {v: dict(points) for v, points in example_one_scheme.labeling.items()}
    # 0001 sits in the shadow of 0011, so the decoder reads it as a different message
    labeling[0b11011] = {0b0001: 0b11111, 0b0110: 0b11111, 0b1001: 0b11111, 0b1010: 0b11111}
    broken = TwoStageScheme(5, 4, dict(example_one_scheme.codes), labeling)
    report = verify_exhaustive(broken)
    assert not report.passed
    assert report.first_failure.startswith('message ')


def test_build_scheme_reports_overloaded_vertex(table_n4) -> None:
    sizes = {v: 0 for v in range(1 << 5)}
    sizes[0] = 2
    for k in range(5):
        sizes[1 << k] = 3
    with pytest.raises(SchemeConstraintError, match='vertex 00000'):
        build_scheme(5, 4, sizes, table_n4)


def test_build_scheme_needs_matching_table(table_n2) -> None:
    with pytest.raises(MissingTableError):
        build_scheme(5, 4, {}, table_n2)


def test_dp_small_length(small_tables) -> None:
    result = dp_optimize(5, tables=small_tables)
    assert result.messages == 9
    assert result.missing == []
    assert result.profile.message_count() == 9


def test_dp_example_one_length(small_tables) -> None:
    result = dp_optimize(9, tables=small_tables)
    assert result.messages == 96
    assert (result.n1, result.n2) == (5, 4)
    assert result.missing == [5, 6, 7, 8]
    assert result.per_split[1] is None


def test_dp_without_tables_raises() -> None:
    with pytest.raises(MissingTableError) as info:
        dp_optimize(5, tables={})
    assert info.value.lengths == [1, 2, 3, 4]


def test_general_optimize_never_loses_to_symmetric(small_tables) -> None:
    scheme = general_optimize(6, tables=small_tables, seed=5, method='local')
    assert count_messages(scheme) >= dp_optimize(6, tables=small_tables).messages
    assert verify_exhaustive(scheme).passed


def test_general_optimize_rejects_unknown_method(small_tables) -> None:
    with pytest.raises(ZChannelError):
        general_optimize(6, tables=small_tables, method='anneal')


@pytest.mark.slow
def test_general_optimize_n8(small_tables) -> None:
    scheme = general_optimize(8, tables=small_tables, seed=1)
    assert count_messages(scheme) >= 53
    assert verify_exhaustive(scheme).passed


def test_scheme_file_round_trip(tmp_path, example_one_scheme) -> None:
    path = tmp_path / 'example_one.json'
    save_scheme(example_one_scheme, path)
    loaded = load_scheme(path)
    assert loaded.codes == example_one_scheme.codes
    assert loaded.labeling == example_one_scheme.labeling
    assert count_messages(loaded) == 96


def test_free_points_of_labeled_code(example_one_scheme) -> None:
    v = 0b00000
    points = free_points(example_one_scheme.codes[v]).count
    assert points == 12
    assert len(example_one_scheme.labeling[v]) == 10
