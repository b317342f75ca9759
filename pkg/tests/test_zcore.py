from itertools import product

import numpy as np
import pytest

from conftest import SIX_TWELVE
from zcore import (Code, CodeFormatError, InvalidCodeError, LengthMismatchError, WeightDistribution, Word,
                   code_from_strings, conflict, downward_shadow, free_point_count, free_point_count_from_distribution,
                   free_points, parse_code_text, read_code, validate_code, vt_code, weight, weight_distribution,
                   write_code, z_distance, z_metrics, ZChannelError)


def W(text: str) -> Word:
    return Word.parse(text)


@pytest.mark.parametrize("a, b, expected", [
    ('0101', '0011', (1, 1, 1, 2)),
    ('0110', '0110', (0, 0, 0, 0)),
    ('1111', '1100', (0, 2, 2, 2)),
])
def test_z_metrics_examples(a: str, b: str, expected) -> None:
    m = z_metrics(W(a), W(b))
    assert (m.n_ab, m.n_ba, m.d_z, m.d_h) == expected


def test_z_metrics_rejects_length_mismatch() -> None:
    with pytest.raises(LengthMismatchError):
        z_metrics(W('01'), W('011'))


def test_metric_properties_exhaustive_small_lengths() -> None:
    for n in range(1, 5):
        words = range(1 << n)
        for a, b in product(words, repeat=2):
            m = z_metrics(Word(n, a), Word(n, b))
            assert m.d_h == m.n_ab + m.n_ba
            assert m.d_z == z_distance(b, a)
            assert (m.d_z == 0) == (a == b)
            for c in words:
                assert z_distance(a, c) <= z_distance(a, b) + z_distance(b, c)


def test_metric_properties_random_pairs() -> None:
    rng = np.random.default_rng(7)
    for _ in range(100_000):
        n = int(rng.integers(1, 13))
        a, b, c = (int(x) for x in rng.integers(0, 1 << n, size=3))
        m = z_metrics(Word(n, a), Word(n, b))
        assert m.d_h == weight(a ^ b)
        assert m.d_h == m.n_ab + m.n_ba
        assert z_distance(a, c) <= z_distance(a, b) + z_distance(b, c)


def test_downward_shadow_examples() -> None:
    assert downward_shadow(W('0011'), 1) == {W('0011'), W('0001'), W('0010')}
    assert downward_shadow(W('0000'), 1) == {W('0000')}
    assert len(downward_shadow(W('1111'), 1)) == 5


def test_shadow_size_is_weight_plus_one() -> None:
    for n in range(1, 7):
        for v in range(1 << n):
            assert len(downward_shadow(Word(n, v), 1)) == weight(v) + 1


def test_validate_code_examples() -> None:
    assert validate_code(code_from_strings(['0000', '0011', '1100', '1111'])).valid
    assert validate_code(code_from_strings(['0110'])).valid

    report = validate_code(code_from_strings(['00', '01']))
    assert not report.valid
    assert report.violating_pair == (0b00, 0b01)
    assert report.violating_distance == 1
    assert report.shadows_disjoint is False


def test_distance_and_shadow_criteria_agree() -> None:
    for n in range(1, 5):
        for a, b in product(range(1 << n), repeat=2):
            if a == b:
                continue
            overlap = set(downward_shadow(Word(n, a), 1)) & set(downward_shadow(Word(n, b), 1))
            assert bool(overlap) == conflict(a, b)


def test_free_points_examples() -> None:
    assert free_points(code_from_strings(['0000', '0011'])).count == 12
    assert free_points(code_from_strings(['00', '11'])).count == 0
    assert free_points(code_from_strings([], n=2)).count == 4

    fp = free_points(code_from_strings(['0000', '0011', '1100', '1111']))
    assert [format(p, '04b') for p in fp.sorted_points()] == ['0101', '0110', '1001', '1010']


def test_free_points_rejects_invalid_code() -> None:
    with pytest.raises(InvalidCodeError):
        free_points(code_from_strings(['00', '01']))


def test_weight_distribution_examples() -> None:
    six = code_from_strings(SIX_TWELVE)
    assert weight_distribution(six).z == (1, 0, 3, 4, 3, 0, 1)
    assert free_point_count(six) == 16
    assert weight_distribution(code_from_strings([], n=4)).z == (0, 0, 0, 0, 0)
    assert weight_distribution(code_from_strings(['0000', '0011', '1100', '1111'])).z == (1, 0, 2, 0, 1)


def test_distribution_arithmetic() -> None:
    assert free_point_count_from_distribution(WeightDistribution.parse('1+0+3+5+6+1+1+0')) == 55
    assert free_point_count_from_distribution(WeightDistribution.parse('1,0,4,9,17,17,11,2,1,0')) == 174


def test_vt_code_examples() -> None:
    assert vt_code(4, 0).as_strings() == ['0000', '0110', '1001', '1111']
    assert vt_code(2, 0).as_strings() == ['00', '11']
    assert validate_code(vt_code(6, 0)).valid


@pytest.mark.parametrize("n", range(1, 13))
def test_vt_codes_are_valid_for_every_residue(n: int) -> None:
    sizes = []
    for a in range(n + 1):
        code = vt_code(n, a)
        assert validate_code(code).valid, f"VT_{a}({n})"
        sizes.append(code.size)
    assert sum(sizes) == 1 << n


def random_valid_code(rng, n: int) -> Code:
    limit = int(rng.integers(1, 1 << n))
    words = []
    for v in rng.permutation(1 << n):
        if len(words) == limit:
            break
        if all(not conflict(int(v), c) for c in words):
            words.append(int(v))
    return Code(n, 1, tuple(words))


def test_free_point_formula_on_random_codes() -> None:
    rng = np.random.default_rng(23)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        code = random_valid_code(rng, n)
        assert validate_code(code).valid
        counted = free_points(code).count
        assert counted == free_point_count(code)
        assert counted == free_point_count_from_distribution(weight_distribution(code))


def test_weight_counts_ones() -> None:
    assert [weight(v) for v in range(8)] == [0, 1, 1, 2, 1, 2, 2, 3]
    assert weight((1 << 40) - 1) == 40
    assert weight(1 << 63) == 1


def test_code_rejects_duplicates() -> None:
    with pytest.raises(ZChannelError):
        Code(4, 1, (3, 3))


def test_code_file_round_trip(tmp_path) -> None:
    code = code_from_strings(SIX_TWELVE)
    path = tmp_path / 'six.zcode'
    write_code(code, path)
    assert path.read_text().splitlines()[:2] == ['# zcode v1', 'n=6 t=1 M=12']
    assert read_code(path) == code


@pytest.mark.parametrize("body, line", [
    ('n=4 t=1 M=1\n0102\n', 3),
    ('n=4 t=1 M=2\n0011\n011\n', 4),
    ('n=4 t=1 M=2\n0011\n0011\n', 4),
    ('n=4 t=1 M=3\n0011\n1100\n', 2),
    ('n=4 M=1\n0011\n', 2),
])
def test_code_file_errors_name_the_line(body: str, line: int) -> None:
    with pytest.raises(CodeFormatError) as info:
        parse_code_text('# zcode v1\n' + body)
    assert info.value.line_number == line


def test_code_file_requires_header() -> None:
    with pytest.raises(CodeFormatError) as info:
        parse_code_text('n=4 t=1 M=0\n')
    assert info.value.line_number == 1
