"""
F-Optimal Code Search
Exact 0/1 search over all 2^n candidate words, nested families obtained by deletion,
seeded local search for large lengths, and the (M -> F) trade-off tables built on them
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from ortools.linear_solver import pywraplp

from config import Budget, load_settings
from cwbounds import CWOracle, apply_budget
from lpbound import BoundStatus, build_constraints, f_upper_bound, feasible_max_size
from zcore import (Code, InvalidCodeError, WeightDistribution, ZChannelError, check_length,
                   conflict, free_point_count, validate_code, vt_code, weight, weight_distribution)

logger = logging.getLogger(__name__)


class SearchStatus(Enum):
    OPTIMAL = "optimal"
    INCOMPLETE = "incomplete"
    INFEASIBLE = "infeasible"
    NESTED = "nested"
    HEURISTIC = "heuristic"


@dataclass
class SearchResult:
    """Outcome of one code search"""
    n: int
    M: int
    status: SearchStatus
    code: Optional[Code] = None
    free_points: Optional[int] = None
    bound: Optional[int] = None
    elapsed: float = 0.0

    @property
    def found(self) -> bool:
        return self.code is not None


@dataclass
class TradeoffRow:
    M: int
    F: int
    status: SearchStatus
    code: Code


@dataclass
class TradeoffTable:
    """Best known free-point count for every size M, with one witness each"""
    n: int
    t: int = 1
    rows: Dict[int, TradeoffRow] = field(default_factory=dict)

    @property
    def max_size(self) -> int:
        return max(self.rows) if self.rows else 0

    def sizes(self) -> List[int]:
        return sorted(self.rows)

    def F(self, M: int) -> Optional[int]:
        row = self.rows.get(M)
        return row.F if row is not None else None

    def witness(self, M: int) -> Code:
        if M not in self.rows:
            raise ZChannelError(f"no size-{M} row in the n={self.n} trade-off table")
        return self.rows[M].code

    def add(self, row: TradeoffRow):
        self.rows[row.M] = row

    def monotonicity_violations(self) -> List[int]:
        """Sizes M>=1 with F(M+1) > F(M) - 1"""
        bad = []
        for M in self.sizes():
            if M >= 1 and M + 1 in self.rows and self.rows[M + 1].F > self.rows[M].F - 1:
                bad.append(M)
        return bad

    def witness_errors(self) -> List[str]:
        errors = []
        for M, row in sorted(self.rows.items()):
            if row.code.size != M:
                errors.append(f"M={M}: witness has {row.code.size} words")
            elif not validate_code(row.code).valid:
                errors.append(f"M={M}: witness is not a valid code")
            elif free_point_count(row.code) != row.F:
                errors.append(f"M={M}: witness has {free_point_count(row.code)} free points, row says {row.F}")
        return errors

    @classmethod
    def from_codes(cls, n: int, codes: Sequence[Code], status: SearchStatus) -> 'TradeoffTable':
        table = cls(n)
        table.add(TradeoffRow(0, 1 << n, SearchStatus.OPTIMAL, Code(n, 1, ())))
        for code in codes:
            F = free_point_count(code)
            current = table.rows.get(code.size)
            if current is None or F > current.F:
                table.add(TradeoffRow(code.size, F, status, code))
        return table


@dataclass
class NestedFamily:
    """Chain C_1 < C_2 < ... < C_max, each obtained from the next by deleting one word"""
    n: int
    chain: List[Code]
    status: SearchStatus = SearchStatus.NESTED
    exact: Dict[int, SearchResult] = field(default_factory=dict)

    @property
    def max_size(self) -> int:
        return len(self.chain)

    def free_points(self) -> List[int]:
        return [free_point_count(c) for c in self.chain]

    def prefix(self, M: int) -> Code:
        return self.chain[M - 1]

    def shortfalls(self) -> Dict[int, Tuple[int, int]]:
        """M -> (prefix F, exact F) for prefixes beaten by a direct search of that size"""
        short = {}
        for M, result in sorted(self.exact.items()):
            F = free_point_count(self.prefix(M))
            if result.free_points is not None and F < result.free_points:
                short[M] = (F, result.free_points)
        return short

    def table(self) -> TradeoffTable:
        """Prefix rows, replaced by the direct search's code wherever that one is better"""
        table = TradeoffTable.from_codes(self.n, self.chain, self.status)
        for M, result in self.exact.items():
            if result.code is None:
                continue
            row = table.rows[M]
            if result.free_points > row.F:
                table.add(TradeoffRow(M, result.free_points, result.status, result.code))
            elif result.free_points == row.F and result.status is SearchStatus.OPTIMAL:
                table.add(TradeoffRow(M, row.F, SearchStatus.OPTIMAL, row.code))
        return table


def _new_solver():
    solver = pywraplp.Solver.CreateSolver('SCIP') or pywraplp.Solver.CreateSolver('CBC')
    if solver is None:
        raise ZChannelError("no MIP backend available in ortools")
    return solver


def _down_set(p: int, n: int) -> List[int]:
    """Words whose 1-shadow contains p: p itself and p with one extra 1"""
    return [p] + [p | (1 << k) for k in range(n) if not p >> k & 1]


class PackingModel:
    """0/1 program: x_v = 1 iff v is a codeword; every point lies in at most one shadow"""

    def __init__(self, n: int, fixed: Sequence[int] = (), contains_zero: bool = True,
                 symmetry: bool = True, distribution: Optional[WeightDistribution] = None,
                 oracle: Optional[CWOracle] = None):
        self.n = n
        self.solver = _new_solver()
        size = 1 << n
        self.x = [self.solver.BoolVar(f"x_{v}") for v in range(size)]
        self.by_weight: List[List[int]] = [[] for _ in range(n + 1)]
        for v in range(size):
            self.by_weight[weight(v)].append(v)

        for p in range(size):
            self.solver.Add(sum(self.x[v] for v in _down_set(p, n)) <= 1)
        for v in fixed:
            self.solver.Add(self.x[v] == 1)

        self.z = [sum(self.x[v] for v in self.by_weight[w]) for w in range(n + 1)]
        if contains_zero:
            self.solver.Add(self.x[0] == 1)
            if n >= 2:
                for c in build_constraints(n, 1, oracle):
                    if not any(c.coeffs):
                        continue
                    self.solver.Add(sum(coef * self.z[w] for w, coef in enumerate(c.coeffs) if coef) <= c.rhs)
                # any code with a weight-2 word can be permuted so that 0..011 is one of them
                if symmetry and not fixed:
                    for v in self.by_weight[2]:
                        if v != 3:
                            self.solver.Add(self.x[3] >= self.x[v])
        if distribution is not None:
            for w, count in enumerate(distribution.z):
                self.solver.Add(self.z[w] == count)

        self.size_expr = sum(self.x)
        self.cost_expr = sum((weight(v) + 1) * self.x[v] for v in range(size))

    def solve(self, budget: Budget) -> Tuple[SearchStatus, Optional[Code]]:
        apply_budget(self.solver, budget)
        status = self.solver.Solve()
        if status == pywraplp.Solver.OPTIMAL:
            return SearchStatus.OPTIMAL, self._code()
        if status == pywraplp.Solver.FEASIBLE:
            return SearchStatus.INCOMPLETE, self._code()
        if status == pywraplp.Solver.INFEASIBLE:
            return SearchStatus.INFEASIBLE, None
        return SearchStatus.INCOMPLETE, None

    def _code(self) -> Code:
        words = tuple(v for v, var in enumerate(self.x) if var.solution_value() > 0.5)
        code = Code(self.n, 1, words)
        report = validate_code(code)
        if not report.valid:
            raise InvalidCodeError(f"solver returned {report.describe(self.n)}")
        return code


def exact_search(n: int, M: int, t: int = 1, budget: Budget = Budget(),
                 oracle: Optional[CWOracle] = None) -> SearchResult:
    """Code of size M with the most free points, proved optimal unless the budget runs out"""
    return extend_code(Code(n, t, ()), M, budget, oracle)


def extend_code(base: Code, M: int, budget: Budget = Budget(),
                oracle: Optional[CWOracle] = None) -> SearchResult:
    """exact_search restricted to codes containing every word of base"""
    n = base.n
    check_length(n)
    if base.t != 1:
        raise ZChannelError("code search is implemented for t=1")
    started = time.monotonic()
    if M < base.size or M > 1 << n:
        return SearchResult(n, M, SearchStatus.INFEASIBLE)
    if M == 0:
        return SearchResult(n, 0, SearchStatus.OPTIMAL, Code(n, 1, ()), 1 << n)
    if not validate_code(base).valid:
        raise InvalidCodeError(f"base code is invalid: {validate_code(base).describe(n)}")

    # with no mandatory words, 0^n can always replace a codeword without losing free points
    free_start = base.size == 0
    bound = None
    if free_start and n >= 2:
        bound_result = f_upper_bound(n, M, 1, oracle)
        if bound_result.status is BoundStatus.INFEASIBLE:
            logger.info(f"No ({n},{M}) code: weight-distribution system is infeasible")
            return SearchResult(n, M, SearchStatus.INFEASIBLE, elapsed=time.monotonic() - started)
        bound = bound_result.value

    model = PackingModel(n, fixed=base.words, contains_zero=free_start, oracle=oracle)
    model.solver.Add(model.size_expr == M)
    if bound is not None:
        model.solver.Add(model.cost_expr >= (1 << n) - bound)
    model.solver.Minimize(model.cost_expr)
    status, code = model.solve(budget)
    elapsed = time.monotonic() - started

    if code is None:
        if status is SearchStatus.INCOMPLETE:
            logger.warning(f"Exact search ({n},{M}) stopped by budget without a code")
        return SearchResult(n, M, status, bound=bound, elapsed=elapsed)
    F = free_point_count(code)
    if status is SearchStatus.INCOMPLETE:
        logger.warning(f"Exact search ({n},{M}) stopped by budget; best F={F} (bound {bound})")
    else:
        logger.info(f"F({n},{M}) = {F} in {elapsed:.1f}s")
    return SearchResult(n, M, status, code, F, bound, elapsed)


def naive_tradeoff(n: int) -> TradeoffTable:
    """Enumerate every valid code outright; only sensible for n <= 4"""
    check_length(n)
    if n > 4:
        raise ZChannelError("naive enumeration is limited to n <= 4")
    size = 1 << n
    best: Dict[int, Tuple[int, Tuple[int, ...]]] = {}

    def visit(start: int, chosen: List[int], cost: int):
        M = len(chosen)
        F = size - cost
        if M not in best or F > best[M][0]:
            best[M] = (F, tuple(chosen))
        for v in range(start, size):
            if all(not conflict(v, c) for c in chosen):
                chosen.append(v)
                visit(v + 1, chosen, cost + weight(v) + 1)
                chosen.pop()

    visit(0, [], 0)
    table = TradeoffTable(n)
    for M, (F, words) in sorted(best.items()):
        table.add(TradeoffRow(M, F, SearchStatus.OPTIMAL, Code(n, 1, words)))
    return table


def max_size_code(n: int, budget: Budget = Budget(),
                  distribution: Optional[WeightDistribution] = None,
                  oracle: Optional[CWOracle] = None) -> SearchResult:
    """Largest code, and among those the one with most free points"""
    check_length(n)
    started = time.monotonic()
    model = PackingModel(n, distribution=distribution, oracle=oracle)
    model.solver.Maximize(((1 << n) + 1) * model.size_expr - model.cost_expr)
    status, code = model.solve(budget)
    if code is None:
        return SearchResult(n, 0, status, elapsed=time.monotonic() - started)
    return SearchResult(n, code.size, status, code, free_point_count(code),
                        elapsed=time.monotonic() - started)


def _deletion_chain(top: Code) -> List[Code]:
    chain = [top]
    words = list(top.words)
    while len(words) > 1:
        # the zero word is the last one standing
        drop = max(words, key=lambda c: (weight(c), c))
        words.remove(drop)
        chain.append(Code(top.n, 1, tuple(words)))
    chain.reverse()
    return chain


def _chain_key(chain: List[Code]) -> Tuple[int, List[int]]:
    # longer chains first, then the better F at the largest sizes
    return len(chain), [free_point_count(c) for c in reversed(chain)]


def nested_family(n: int, t: int = 1, budget: Budget = Budget(),
                  distribution: Optional[WeightDistribution] = None,
                  oracle: Optional[CWOracle] = None,
                  compare_exact: Optional[bool] = None) -> NestedFamily:
    """Best deletion chain over the maximal codes explored

    Without a fixed distribution the explored tops are the solver's maximal code and one
    maximal code per bound-optimal distribution of that size. For n <= exact_search_max_n
    every prefix is also checked against exact_search, and the ones that fall short are
    listed by NestedFamily.shortfalls().
    """
    if t != 1:
        raise ZChannelError("code search is implemented for t=1")
    if n > 9:
        raise ZChannelError("nested families are searched for n <= 9")
    top = max_size_code(n, budget, distribution, oracle)
    if top.code is None:
        raise ZChannelError(f"no maximal code for n={n} within budget")

    tops = [top]
    if distribution is None and n >= 2:
        for dist in f_upper_bound(n, top.M, 1, oracle).optimal_distributions:
            if dist == weight_distribution(top.code):
                continue
            alternative = max_size_code(n, budget, dist, oracle)
            if alternative.code is not None and alternative.M == top.M:
                tops.append(alternative)
    best = max(tops, key=lambda r: _chain_key(_deletion_chain(r.code)))

    status = SearchStatus.NESTED if best.status is SearchStatus.OPTIMAL else SearchStatus.INCOMPLETE
    family = NestedFamily(n, _deletion_chain(best.code), status)
    if compare_exact is None:
        compare_exact = n <= load_settings().exact_search_max_n
    if compare_exact:
        for M in range(1, family.max_size + 1):
            family.exact[M] = exact_search(n, M, 1, budget, oracle)
        for M, (F, exact_F) in family.shortfalls().items():
            logger.warning(f"Nested family n={n}: prefix M={M} has F={F}, a direct search finds {exact_F}")
    logger.info(f"Nested family n={n}: max size {family.max_size} from {len(tops)} top code(s), "
                f"F tail {family.free_points()[-5:]}")
    return family


class ConflictGraph:
    """Words of length n, adjacent iff their 1-shadows meet (d_Z <= 1)"""

    def __init__(self, n: int):
        self.n = n
        self.size = 1 << n
        self.adj: List[np.ndarray] = []
        self.adj_sets: List[frozenset] = []
        for v in range(self.size):
            ones = [1 << k for k in range(n) if v >> k & 1]
            zeros = [1 << k for k in range(n) if not v >> k & 1]
            near = [v ^ (1 << k) for k in range(n)]
            near.extend(v ^ a ^ b for a in ones for b in zeros)
            self.adj.append(np.array(sorted(near), dtype=np.int64))
            self.adj_sets.append(frozenset(near))


class IteratedLocalSearch:
    """Insert / (1,2)-swap / forced-insertion local search for large independent sets"""

    def __init__(self, graph: ConflictGraph, seed: int, perturb_strength: int = 1):
        self.graph = graph
        self.rng = np.random.default_rng(seed)
        self.perturb_strength = perturb_strength
        self.in_sol = np.zeros(graph.size, dtype=bool)
        self.tight = np.zeros(graph.size, dtype=np.int64)

    def add(self, v: int):
        self.in_sol[v] = True
        self.tight[self.graph.adj[v]] += 1

    def remove(self, v: int):
        self.in_sol[v] = False
        self.tight[self.graph.adj[v]] -= 1

    def size(self) -> int:
        return int(self.in_sol.sum())

    def fill(self):
        free = np.flatnonzero(~self.in_sol & (self.tight == 0))
        for v in self.rng.permutation(free):
            if not self.in_sol[v] and self.tight[v] == 0:
                self.add(int(v))

    def two_improvement(self) -> bool:
        for x in self.rng.permutation(np.flatnonzero(self.in_sol)):
            x = int(x)
            candidates = [int(u) for u in self.graph.adj[x] if self.tight[u] == 1]
            for i, u in enumerate(candidates):
                for w in candidates[i + 1:]:
                    if w not in self.graph.adj_sets[u]:
                        self.remove(x)
                        self.add(u)
                        self.add(w)
                        self.fill()
                        return True
        return False

    def local_search(self):
        self.fill()
        while self.two_improvement():
            pass

    def perturb(self):
        outside = np.flatnonzero(~self.in_sol)
        if outside.size == 0:
            return
        count = min(self.perturb_strength, outside.size)
        for v in self.rng.choice(outside, size=count, replace=False):
            v = int(v)
            if self.in_sol[v]:
                continue
            for u in self.graph.adj[v]:
                if self.in_sol[u]:
                    self.remove(int(u))
            self.add(v)

    def run(self, start: Sequence[int], budget: Budget, target: Optional[int] = None) -> Tuple[int, ...]:
        for v in start:
            self.add(v)
        self.local_search()
        best = np.flatnonzero(self.in_sol)
        current_size = best.size
        clock = budget.start()
        while clock.tick():
            if target is not None and best.size >= target:
                break
            saved_sol, saved_tight = self.in_sol.copy(), self.tight.copy()
            self.perturb()
            self.local_search()
            new_size = self.size()
            if new_size > best.size:
                best = np.flatnonzero(self.in_sol)
                logger.info(f"Local search n={self.graph.n}: size {best.size} after {clock.nodes} iterations")
            if new_size >= current_size:
                current_size = new_size
                continue
            gap = current_size - new_size
            if self.rng.random() < 1.0 / (1.0 + gap * (best.size - new_size)):
                current_size = new_size
            else:
                self.in_sol, self.tight = saved_sol, saved_tight
        return tuple(int(v) for v in best)


def heuristic_search(n: int, t: int = 1, target: Optional[int] = None,
                     budget: Budget = Budget(nodes=2_000_000), seed: int = 0) -> SearchResult:
    """Largest valid code found by seeded local search from a VT code"""
    check_length(n)
    if t != 1:
        raise ZChannelError("code search is implemented for t=1")
    started = time.monotonic()
    seed_code = vt_code(n, 0)
    search = IteratedLocalSearch(ConflictGraph(n), seed)
    words = search.run(seed_code.words, budget, target)
    code = Code(n, 1, words)
    report = validate_code(code)
    if not report.valid:
        raise InvalidCodeError(f"local search produced {report.describe(n)}")
    elapsed = time.monotonic() - started
    if target is not None and code.size < target:
        logger.warning(f"Local search n={n} reached {code.size}, short of target {target}")
    logger.info(f"Local search n={n}, seed={seed}: size {code.size} (VT start {seed_code.size}) in {elapsed:.1f}s")
    return SearchResult(n, code.size, SearchStatus.HEURISTIC, code, free_point_count(code), elapsed=elapsed)


def _exact_row(n: int, M: int, budget: Budget) -> SearchResult:
    return exact_search(n, M, 1, budget)


def tradeoff_table(n: int, t: int = 1, budget: Budget = Budget(), method: str = 'auto',
                   jobs: Optional[int] = None, store=None) -> TradeoffTable:
    """Rows M = 0..max size; read from and written to the store when one is given"""
    if t != 1:
        raise ZChannelError("trade-off tables are implemented for t=1")
    if store is not None and store.has_tradeoff(n):
        return store.load_tradeoff(n)
    if method == 'auto':
        method = 'naive' if n <= 4 else 'exact' if n <= load_settings().exact_search_max_n else 'nested'

    if method == 'naive':
        table = naive_tradeoff(n)
    elif method == 'exact':
        jobs = jobs if jobs is not None else load_settings().jobs
        top = feasible_max_size(n) if n >= 2 else 2
        results = Parallel(n_jobs=jobs)(delayed(_exact_row)(n, M, budget) for M in range(1, top + 1))
        table = TradeoffTable(n)
        table.add(TradeoffRow(0, 1 << n, SearchStatus.OPTIMAL, Code(n, 1, ())))
        for res in results:
            if res.code is None:
                if res.status is SearchStatus.INCOMPLETE:
                    logger.warning(f"Row M={res.M} of the n={n} table is missing (budget)")
                break
            table.add(TradeoffRow(res.M, res.free_points, res.status, res.code))
            logger.info(f"Trade-off n={n}: M={res.M} F={res.free_points} ({res.status.value})")
    elif method == 'nested':
        table = nested_family(n, budget=budget).table()
    else:
        raise ZChannelError(f"unknown trade-off method {method!r}")

    bad = table.monotonicity_violations()
    if bad:
        logger.warning(f"Trade-off n={n} is not strictly decreasing at M={bad}")
    if store is not None:
        store.save_tradeoff(table)
    return table
