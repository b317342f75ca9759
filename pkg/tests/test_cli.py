import json

import pytest

from cli import main
from twostage import save_scheme
from zcore import code_from_strings, write_code


@pytest.fixture
def cache_args(tmp_path):
    return ['--cache-dir', str(tmp_path / 'cache')]


@pytest.fixture
def example_one_file(tmp_path, example_one_scheme):
    path = tmp_path / 'example_one.json'
    save_scheme(example_one_scheme, path)
    return path


def test_validate_good_and_bad_codes(tmp_path, cache_args, capsys) -> None:
    good = tmp_path / 'good.zcode'
    write_code(code_from_strings(['0000', '0011', '1100', '1111']), good)
    assert main(cache_args + ['validate', str(good)]) == 0
    assert '✅' in capsys.readouterr().out

    bad = tmp_path / 'bad.zcode'
    write_code(code_from_strings(['00', '01']), bad)
    assert main(cache_args + ['--format', 'json', 'validate', str(bad)]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload['valid'] is False
    assert payload['violating_pair'] == ['00', '01']


def test_free_points_lists_points(tmp_path, cache_args, capsys) -> None:
    path = tmp_path / 'four.zcode'
    write_code(code_from_strings(['0000', '0011', '1100', '1111']), path)
    assert main(cache_args + ['--format', 'tsv', 'free-points', str(path)]) == 0
    assert capsys.readouterr().out.split() == ['0101', '0110', '1001', '1010']


def test_bound_json(tmp_path, cache_args, capsys) -> None:
    assert main(cache_args + ['--format', 'json', 'bound', '--n', '6', '--m', '12']) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['F_bar'] == 16
    assert payload['status'] == 'optimal'
    assert (tmp_path / 'cache' / 'bound_n6.joblib').exists()


def test_bound_needs_size(cache_args) -> None:
    assert main(cache_args + ['bound', '--n', '6']) == 2


def test_twostage_verify_and_codec(example_one_file, cache_args, capsys) -> None:
    assert main(cache_args + ['twostage', 'verify', '--scheme', str(example_one_file)]) == 0
    assert '96 messages' in capsys.readouterr().out

    assert main(cache_args + ['twostage', 'encode', '--scheme', str(example_one_file),
                              '--message', '95', '--feedback', '11011']) == 0
    assert capsys.readouterr().out.strip() == 'first 11111, second 1001'

    assert main(cache_args + ['--format', 'tsv', 'twostage', 'decode', '--scheme', str(example_one_file),
                              '--word', '111111100']) == 0
    assert capsys.readouterr().out.strip() == '95'


def test_twostage_build_example_one(tmp_path, cache_args, capsys) -> None:
    out = tmp_path / 'built.json'
    assert main(cache_args + ['twostage', 'build', '--n1', '5', '--n2', '4',
                              '--sizes', '2,2,3,3,4,4', '--out', str(out)]) == 0
    assert out.exists()
    assert '96 messages' in capsys.readouterr().out


def test_twostage_build_requires_options(cache_args) -> None:
    with pytest.raises(SystemExit) as info:
        main(cache_args + ['twostage', 'build', '--n1', '5'])
    assert info.value.code == 2


def test_seeded_commands_refuse_to_run_without_seed(cache_args) -> None:
    assert main(cache_args + ['reproduce', '--tables', 'V']) == 2
    assert main(cache_args + ['search', 'heuristic', '--n', '6']) == 2


def test_reproduce_table_five(cache_args, capsys) -> None:
    assert main(cache_args + ['reproduce', '--tables', 'V', '--seed', '0']) == 0
    assert 'unexpected mismatch' in capsys.readouterr().out


def test_named_scheme_is_found_in_the_cache(cache_args, capsys) -> None:
    assert main(cache_args + ['twostage', 'build', '--n1', '5', '--n2', '4',
                              '--sizes', '2,2,3,3,4,4', '--name', 'example-one']) == 0
    capsys.readouterr()
    assert main(cache_args + ['--format', 'tsv', 'twostage', 'decode', '--scheme', 'example-one',
                              '--word', '111111100']) == 0
    assert capsys.readouterr().out.strip() == '95'


def test_cache_listing_and_cw_build(cache_args, capsys) -> None:
    assert main(cache_args + ['--format', 'json', 'cache', '--build-cw', '5']) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['artifacts'] == ['cw_cache.tsv', 'cw_witnesses.joblib']
