"""
Z-Channel Core
Exact Z-metric machinery for single-asymmetric-error-correcting codes:
distances, downward shadows, code validation, free points, Varshamov-Tenengolts
baseline codes and the zcode v1 text format
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import MAX_LENGTH

logger = logging.getLogger(__name__)

CODE_FILE_HEADER = '# zcode v1'


class ZChannelError(Exception):
    """Base class for every error raised by the toolkit"""


class LengthMismatchError(ZChannelError):
    pass


class InvalidCodeError(ZChannelError):
    pass


class CodeFormatError(ZChannelError):
    """Malformed code file; carries the offending line number"""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def weight(bits: int) -> int:
    return bin(bits).count('1')


def word_to_string(bits: int, n: int) -> str:
    return format(bits, f'0{n}b') if n > 0 else ''


def check_length(n: int):
    if not 1 <= n <= MAX_LENGTH:
        raise ZChannelError(f"word length {n} outside 1..{MAX_LENGTH}")


@dataclass(frozen=True)
class Word:
    """Binary word of length n; position 1 is the most significant bit"""
    length: int
    bits: int

    def __post_init__(self):
        check_length(self.length)
        if self.bits < 0 or self.bits >> self.length:
            raise ZChannelError(f"value {self.bits} does not fit in {self.length} bits")

    @property
    def weight(self) -> int:
        return weight(self.bits)

    @classmethod
    def parse(cls, text: str) -> 'Word':
        if not text or any(ch not in '01' for ch in text):
            raise ZChannelError(f"not a binary word: {text!r}")
        return cls(len(text), int(text, 2))

    def __str__(self) -> str:
        return word_to_string(self.bits, self.length)


@dataclass(frozen=True)
class ZMetrics:
    """N(a,b), N(b,a), Z-distance and Hamming distance of a word pair"""
    n_ab: int
    n_ba: int
    d_z: int
    d_h: int


@dataclass(frozen=True)
class WeightDistribution:
    """Codeword counts z_0..z_n by Hamming weight"""
    n: int
    z: Tuple[int, ...]

    def __post_init__(self):
        if len(self.z) != self.n + 1:
            raise ZChannelError(f"weight distribution of length {len(self.z)} for n={self.n}")
        if any(count < 0 for count in self.z):
            raise ZChannelError("weight distribution has a negative count")

    @property
    def size(self) -> int:
        return sum(self.z)

    @classmethod
    def parse(cls, text: str) -> 'WeightDistribution':
        """Accepts '1+0+3+4+3+0+1' or '1,0,3,4,3,0,1'"""
        parts = [p for p in text.replace('+', ',').split(',') if p.strip()]
        counts = tuple(int(p) for p in parts)
        return cls(len(counts) - 1, counts)

    def __str__(self) -> str:
        return '+'.join(str(c) for c in self.z)


@dataclass(frozen=True)
class Code:
    """A set of words of length n in canonical (ascending) order"""
    n: int
    t: int = 1
    words: Tuple[int, ...] = ()

    def __post_init__(self):
        check_length(self.n)
        canonical = tuple(sorted(set(self.words)))
        if len(canonical) != len(self.words):
            raise ZChannelError("duplicate codeword")
        for w in canonical:
            if w < 0 or w >> self.n:
                raise ZChannelError(f"codeword {w} does not fit in {self.n} bits")
        object.__setattr__(self, 'words', canonical)

    @property
    def size(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    @cached_property
    def word_set(self) -> FrozenSet[int]:
        return frozenset(self.words)

    def __contains__(self, bits: int) -> bool:
        return bits in self.word_set

    def as_words(self) -> List[Word]:
        return [Word(self.n, w) for w in self.words]

    def as_strings(self) -> List[str]:
        return [word_to_string(w, self.n) for w in self.words]

    def with_words(self, words: Iterable[int]) -> 'Code':
        return Code(self.n, self.t, tuple(words))


def code_from_strings(strings: Sequence[str], t: int = 1, n: Optional[int] = None) -> Code:
    """Build a code from '0011'-style strings; n is required when strings is empty"""
    if not strings:
        if n is None:
            raise ZChannelError("length of an empty code must be given")
        return Code(n, t, ())
    words = [Word.parse(s) for s in strings]
    length = words[0].length
    if any(w.length != length for w in words):
        raise LengthMismatchError("codewords of different lengths")
    return Code(length, t, tuple(w.bits for w in words))


def z_metrics(a: Word, b: Word) -> ZMetrics:
    if a.length != b.length:
        raise LengthMismatchError(f"lengths {a.length} and {b.length} differ")
    n_ab = weight(~a.bits & b.bits)
    n_ba = weight(a.bits & ~b.bits)
    return ZMetrics(n_ab=n_ab, n_ba=n_ba, d_z=max(n_ab, n_ba), d_h=n_ab + n_ba)


def z_distance(a: int, b: int) -> int:
    return max(weight(a & ~b), weight(b & ~a))


def conflict(a: int, b: int) -> bool:
    """True when distinct words a, b violate d_Z >= 2 (their 1-shadows meet)"""
    return a != b and z_distance(a, b) <= 1


def downward_shadow(c: Word, t: int) -> FrozenSet[Word]:
    """All words reachable from c by at most t asymmetric (1 -> 0) errors"""
    if t < 0:
        raise ZChannelError("t must be non-negative")
    return frozenset(Word(c.length, y) for y in shadow_bits(c.bits, t))


def shadow_bits(c: int, t: int = 1) -> List[int]:
    ones = [1 << i for i in range(c.bit_length()) if c >> i & 1]
    result = [c]
    for k in range(1, min(t, len(ones)) + 1):
        for erased in combinations(ones, k):
            result.append(c & ~sum(erased))
    return result


@dataclass
class ValidationReport:
    """Outcome of validate_code"""
    valid: bool
    min_distance: Optional[int]
    shadows_disjoint: Optional[bool]
    violating_pair: Optional[Tuple[int, int]] = None
    violating_distance: Optional[int] = None

    def describe(self, n: int) -> str:
        if self.valid:
            return f"valid (min d_Z={self.min_distance})"
        a, b = self.violating_pair
        return (f"invalid: {word_to_string(a, n)} and {word_to_string(b, n)} "
                f"at d_Z={self.violating_distance}")


def validate_code(code: Code) -> ValidationReport:
    """Checks d_Z >= 2t for every pair; at t=1 also checks shadow disjointness"""
    min_distance = None
    worst = None
    for a, b in combinations(code.words, 2):
        d = z_distance(a, b)
        if min_distance is None or d < min_distance:
            min_distance = d
            worst = (a, b)

    valid = min_distance is None or min_distance >= 2 * code.t
    shadows_disjoint = None
    if code.t == 1:
        seen = set()
        shadows_disjoint = True
        for c in code.words:
            for y in shadow_bits(c, 1):
                if y in seen:
                    shadows_disjoint = False
                seen.add(y)
        if shadows_disjoint != valid:
            logger.error(f"Shadow disjointness disagrees with d_Z for n={code.n}")

    if valid:
        return ValidationReport(True, min_distance, shadows_disjoint)
    return ValidationReport(False, min_distance, shadows_disjoint,
                            violating_pair=worst, violating_distance=min_distance)


def covered_mask(code: Code) -> np.ndarray:
    """Boolean vector over {0,1}^n marking words inside some 1-shadow"""
    covered = np.zeros(1 << code.n, dtype=bool)
    for c in code.words:
        covered[shadow_bits(c, 1)] = True
    return covered


@dataclass(frozen=True)
class FreePoints:
    count: int
    points: FrozenSet[int] = field(repr=False)

    def sorted_points(self) -> List[int]:
        return sorted(self.points)


def free_points(code: Code) -> FreePoints:
    """Words of {0,1}^n outside every codeword's downward 1-shadow"""
    if code.t != 1:
        raise InvalidCodeError("free points are defined here for t=1 only")
    report = validate_code(code)
    if not report.valid:
        raise InvalidCodeError(report.describe(code.n))
    covered = covered_mask(code)
    free = np.flatnonzero(~covered)
    count = int(free.size)
    expected = (1 << code.n) - sum(weight(c) + 1 for c in code.words)
    if count != expected:
        raise InvalidCodeError(f"free-point count {count} differs from formula {expected}")
    return FreePoints(count, frozenset(int(p) for p in free))


def free_point_count(code: Code) -> int:
    """Formula count 2^n - sum(weight+1); assumes code is valid"""
    return (1 << code.n) - sum(weight(c) + 1 for c in code.words)


def free_point_count_from_distribution(dist: WeightDistribution) -> int:
    return (1 << dist.n) - sum(count * (i + 1) for i, count in enumerate(dist.z))


def weight_distribution(code: Code) -> WeightDistribution:
    counts = np.bincount([weight(c) for c in code.words], minlength=code.n + 1) if code.words \
        else np.zeros(code.n + 1, dtype=int)
    return WeightDistribution(code.n, tuple(int(c) for c in counts))


def vt_code(n: int, a: int) -> Code:
    """Varshamov-Tenengolts code {x : sum i*x_i = a mod n+1}, positions 1..n left to right"""
    check_length(n)
    if not 0 <= a <= n:
        raise ZChannelError(f"residue {a} outside 0..{n}")
    words = []
    for x in range(1 << n):
        checksum = sum(i for i in range(1, n + 1) if x >> (n - i) & 1)
        if checksum % (n + 1) == a:
            words.append(x)
    return Code(n, 1, tuple(words))


def write_code(code: Code, path: Union[str, Path]):
    path = Path(path)
    lines = [CODE_FILE_HEADER, f"n={code.n} t={code.t} M={code.size}"]
    lines.extend(code.as_strings())
    path.write_text('\n'.join(lines) + '\n')
    logger.debug(f"Wrote {code.size} codewords to {path}")


def read_code(path: Union[str, Path]) -> Code:
    path = Path(path)
    return parse_code_text(path.read_text())


def parse_code_text(text: str) -> Code:
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    if not lines or lines[0].strip() != CODE_FILE_HEADER:
        raise CodeFormatError(1, f"expected header {CODE_FILE_HEADER!r}")
    if len(lines) < 2:
        raise CodeFormatError(2, "missing parameter line")

    params = _parse_params(lines[1])
    n, t, m = params['n'], params['t'], params['M']
    check_length(n)

    words = []
    seen: Dict[int, int] = {}
    for number, line in enumerate(lines[2:], start=3):
        line = line.strip()
        if len(line) != n:
            raise CodeFormatError(number, f"expected {n} characters, found {len(line)}")
        bad = [ch for ch in line if ch not in '01']
        if bad:
            raise CodeFormatError(number, f"invalid bit character {bad[0]!r}")
        value = int(line, 2)
        if value in seen:
            raise CodeFormatError(number, f"duplicate codeword {line} (first on line {seen[value]})")
        seen[value] = number
        words.append(value)

    if len(words) != m:
        raise CodeFormatError(2, f"header declares M={m} but file holds {len(words)} codewords")
    return Code(n, t, tuple(words))


def _parse_params(line: str) -> Dict[str, int]:
    params = {}
    for item in line.split():
        key, _, value = item.partition('=')
        if not value.isdigit():
            raise CodeFormatError(2, f"bad parameter {item!r}")
        params[key] = int(value)
    missing = {'n', 't', 'M'} - params.keys()
    if missing:
        raise CodeFormatError(2, f"missing parameters {sorted(missing)}")
    return params
