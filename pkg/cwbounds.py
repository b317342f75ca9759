"""
Constant-Weight Code Bounds
Exact values and valid upper bounds for A(n, d, w), the largest set of weight-w
binary words with pairwise Hamming distance at least d
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import joblib
import pandas as pd
from ortools.linear_solver import pywraplp

from config import Budget
from zcore import Code, ZChannelError, weight

logger = logging.getLogger(__name__)

CACHE_COLUMNS = ['n', 'd', 'w', 'lower', 'upper', 'exact']


class QueryError(ZChannelError):
    pass


@dataclass(frozen=True)
class CWQuery:
    """Parameters of A(n, d, w)"""
    n: int
    d: int
    w: int

    def __post_init__(self):
        if self.n < 0 or self.d < 1:
            raise QueryError(f"bad constant-weight query {self}")
        if not 0 <= self.w <= self.n:
            raise QueryError(f"weight {self.w} outside 0..{self.n}")

    @property
    def vertex_count(self) -> int:
        return comb(self.n, self.w)


@dataclass
class CWResult:
    """Lower bound with witness, upper bound, and whether they meet"""
    query: CWQuery
    lower: int
    upper: int
    exact: bool
    witness: Tuple[int, ...] = ()

    def witness_code(self) -> Optional[Code]:
        if self.query.n == 0:
            return None
        return Code(self.query.n, 1, self.witness)


def cw_upper(q: CWQuery) -> int:
    """Johnson-style recursive upper bound on A(n, d, w)"""
    return _upper(q.n, q.d, q.w)


@lru_cache(maxsize=None)
def _upper(n: int, d: int, w: int) -> int:
    return min(_johnson(n, d, w), _johnson(n, d, n - w))


@lru_cache(maxsize=None)
def _johnson(n: int, d: int, w: int) -> int:
    if w == 0 or 2 * w < d or 2 * (n - w) < d:
        return 1
    if d <= 2:
        return comb(n, w)
    return min(comb(n, w), (n * _upper(n - 1, d, w - 1)) // w)


def weight_words(n: int, w: int) -> List[int]:
    """All weight-w words of length n, ascending"""
    words = [sum(1 << i for i in support) for support in combinations(range(n), w)]
    return sorted(words)


def lexicode(q: CWQuery) -> Tuple[int, ...]:
    """Greedy witness: scan weight-w words ascending, keep those far from all kept"""
    chosen: List[int] = []
    for x in weight_words(q.n, q.w):
        if all(weight(x ^ y) >= q.d for y in chosen):
            chosen.append(x)
    return tuple(chosen)


def cw_exact(q: CWQuery, budget: Budget = Budget(seconds=60.0)) -> CWResult:
    """Exhaustive maximum clique search (as a 0/1 program) over weight-w words"""
    upper = cw_upper(q)
    greedy = lexicode(q)
    if len(greedy) >= upper:
        return CWResult(q, len(greedy), len(greedy), True, greedy)

    words = weight_words(q.n, q.w)
    solver = pywraplp.Solver.CreateSolver('SCIP') or pywraplp.Solver.CreateSolver('CBC')
    if solver is None:
        logger.error("No MIP backend available; falling back to greedy witness")
        return CWResult(q, len(greedy), upper, False, greedy)

    x = {v: solver.BoolVar(f"x_{v}") for v in words}
    for block in _conflict_cliques(q, words):
        solver.Add(sum(x[v] for v in block) <= 1)
    # any nonempty code can be permuted to contain the smallest word
    solver.Add(x[words[0]] == 1)
    solver.Add(sum(x.values()) <= upper)
    solver.Add(sum(x.values()) >= len(greedy))
    solver.Maximize(sum(x.values()))

    apply_budget(solver, budget)
    status = solver.Solve()

    if status == pywraplp.Solver.OPTIMAL:
        witness = tuple(sorted(v for v in words if x[v].solution_value() > 0.5))
        logger.info(f"A({q.n},{q.d},{q.w}) = {len(witness)} (exact)")
        return CWResult(q, len(witness), len(witness), True, witness)

    best = greedy
    if status == pywraplp.Solver.FEASIBLE:
        found = tuple(sorted(v for v in words if x[v].solution_value() > 0.5))
        if len(found) > len(best):
            best = found
    logger.warning(f"A({q.n},{q.d},{q.w}) search stopped by budget: {len(best)} <= A <= {upper}")
    return CWResult(q, len(best), upper, False, best)


def _conflict_cliques(q: CWQuery, words: List[int]):
    """Cliques of the 'too close' graph whose union covers every conflicting pair"""
    if q.d == 4:
        # two weight-w words at distance 2 share a (w-1)-subset and lie in a (w+1)-superset
        by_subset: Dict[int, List[int]] = {}
        for v in words:
            bits = v
            while bits:
                low = bits & -bits
                by_subset.setdefault(v & ~low, []).append(v)
                bits ^= low
        for block in by_subset.values():
            if len(block) > 1:
                yield block
        full = (1 << q.n) - 1
        by_superset: Dict[int, List[int]] = {}
        for v in words:
            zeros = full & ~v
            while zeros:
                low = zeros & -zeros
                by_superset.setdefault(v | low, []).append(v)
                zeros ^= low
        for block in by_superset.values():
            if len(block) > 1:
                yield block
        return
    for a, b in combinations(words, 2):
        if weight(a ^ b) < q.d:
            yield [a, b]


def apply_budget(solver, budget: Budget):
    if budget.nodes is not None:
        solver.SetSolverSpecificParametersAsString(f"limits/nodes = {budget.nodes}\n")
    millis = budget.solver_millis()
    if millis is not None:
        solver.SetTimeLimit(millis)


class CWOracle:
    """A_l / A_u values for the bound, deterministic and memoized"""

    def __init__(self, vertex_limit: int = 220, budget: Budget = Budget(seconds=60.0),
                 cache: Optional['CWCache'] = None):
        self.vertex_limit = vertex_limit
        self.budget = budget
        self.cache = cache
        self._results: Dict[CWQuery, CWResult] = {}

    def result(self, n: int, d: int, w: int) -> CWResult:
        q = CWQuery(n, d, w)
        if q in self._results:
            return self._results[q]
        res = self.cache.get(q) if self.cache is not None else None
        if res is None:
            if q.vertex_count <= self.vertex_limit:
                res = cw_exact(q, self.budget)
                if not res.exact:
                    # a budget-truncated incumbent is timing dependent
                    greedy = lexicode(q)
                    res = CWResult(q, len(greedy), cw_upper(q), False, greedy)
            else:
                greedy = lexicode(q)
                upper = cw_upper(q)
                res = CWResult(q, len(greedy), upper, len(greedy) == upper, greedy)
            if self.cache is not None:
                self.cache.put(res)
        self._results[q] = res
        return res

    def lower(self, n: int, d: int, w: int) -> int:
        if w < 0 or w > n:
            return 0
        return self.result(n, d, w).lower

    def upper(self, n: int, d: int, w: int) -> int:
        if w < 0 or w > n:
            return 0
        q = CWQuery(n, d, w)
        if q in self._results:
            return self._results[q].upper
        if self.cache is not None:
            cached = self.cache.get(q)
            if cached is not None:
                return cached.upper
        if q.vertex_count <= self.vertex_limit:
            return self.result(n, d, w).upper
        return cw_upper(q)


class CWCache:
    """cw_cache.tsv: rows n d w lower upper exact, witnesses kept in cw_witnesses.joblib"""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.witness_path = self.path.with_name('cw_witnesses.joblib')
        self.rows: Dict[CWQuery, CWResult] = {}
        self.dirty = False
        if self.path.exists():
            self._load()

    def _load(self):
        df = pd.read_csv(self.path, sep='\t')
        witnesses: Dict[Tuple[int, int, int], Tuple[int, ...]] = {}
        if self.witness_path.exists():
            witnesses = joblib.load(self.witness_path)
        else:
            logger.warning(f"No {self.witness_path.name}; cached constant-weight rows carry counts only")
        for rec in df.to_dict('records'):
            q = CWQuery(int(rec['n']), int(rec['d']), int(rec['w']))
            witness = tuple(witnesses.get((q.n, q.d, q.w), ()))
            if len(witness) != int(rec['lower']):
                witness = ()
            self.rows[q] = CWResult(q, int(rec['lower']), int(rec['upper']), bool(int(rec['exact'])), witness)
        logger.info(f"Loaded {len(self.rows)} constant-weight values from {self.path}")

    def get(self, q: CWQuery) -> Optional[CWResult]:
        return self.rows.get(q)

    def put(self, res: CWResult):
        self.rows[res.query] = res
        self.dirty = True

    def save(self):
        records = [
            {'n': q.n, 'd': q.d, 'w': q.w, 'lower': r.lower, 'upper': r.upper, 'exact': int(r.exact)}
            for q, r in sorted(self.rows.items(), key=lambda item: (item[0].n, item[0].d, item[0].w))
        ]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(records, columns=CACHE_COLUMNS).to_csv(self.path, sep='\t', index=False)
        joblib.dump({(q.n, q.d, q.w): r.witness for q, r in self.rows.items() if r.witness}, self.witness_path)
        self.dirty = False
        logger.info(f"Saved {len(records)} constant-weight values to {self.path}")

    def build(self, max_n: int = 14, d: int = 4, oracle: Optional[CWOracle] = None):
        """Single builder pass over every (n, w) with n <= max_n"""
        oracle = oracle or CWOracle(cache=self)
        oracle.cache = self
        for n in range(0, max_n + 1):
            for w in range(0, n + 1):
                oracle.result(n, d, w)
        self.save()
