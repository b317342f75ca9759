import pytest

from artifact_store import ArtifactStore
from config import Settings
from fsearch import naive_tradeoff
from twostage import SymmetricProfile, build_scheme, build_symmetric

# first-stage words that carry no message in the 53-message n=8 scheme
EMPTY_VERTICES_N8 = ['111000', '001110', '010101', '100011', '100100', '010010',
                     '001001', '110000', '010100', '001000', '000010', '000001']

SIX_TWELVE = ['000000', '000011', '001100', '110000', '010101', '101001', '100110',
              '011010', '111100', '110011', '001111', '111111']


@pytest.fixture(scope='session')
def table_n2():
    return naive_tradeoff(2)


@pytest.fixture(scope='session')
def table_n4():
    return naive_tradeoff(4)


@pytest.fixture(scope='session')
def example_one_scheme(table_n4):
    profile = SymmetricProfile.from_sizes(5, 4, (2, 2, 3, 3, 4, 4), table_n4)
    return build_symmetric(profile, table_n4)


@pytest.fixture(scope='session')
def example_two_sizes():
    sizes = {v: 1 for v in range(1 << 6)}
    sizes[0b111111] = 2
    for word in EMPTY_VERTICES_N8:
        sizes[int(word, 2)] = 0
    return sizes


@pytest.fixture(scope='session')
def example_two_scheme(table_n2, example_two_sizes):
    return build_scheme(6, 2, example_two_sizes, table_n2)


@pytest.fixture
def store(tmp_path):
    return ArtifactStore(tmp_path / 'cache', Settings(cache_dir=tmp_path / 'cache'))
