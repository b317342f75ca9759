"""
Two-Stage Transmission over the Z-Channel
Schemes with one feedback round: the first n1 bits are sent, the received prefix is fed
back, and the last n2 bits are chosen from a code attached to that prefix. Covers
construction, dynamic-programming and general optimization, labeling of free points,
encoding, decoding and exhaustive verification against every single asymmetric error.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from ortools.linear_solver import pywraplp

from config import Budget
from cwbounds import apply_budget
from fsearch import TradeoffTable
from zcore import (Code, Word, ZChannelError, code_from_strings, free_points,
                   shadow_bits, weight, word_to_string)

logger = logging.getLogger(__name__)


class SchemeConstraintError(ZChannelError):
    """A packing constraint fails; names the offending vertex or weight"""


class MissingTableError(ZChannelError):
    def __init__(self, lengths: Sequence[int]):
        super().__init__(f"missing trade-off table for n2={', '.join(str(n2) for n2 in lengths)}")
        self.lengths = list(lengths)


class UnreachableWordError(ZChannelError):
    pass


class FeedbackError(ZChannelError):
    pass


class DegradationGraph:
    """Arcs u -> v whenever v is u with exactly one 1 turned into 0"""

    def __init__(self, n1: int):
        self.n1 = n1

    def vertices(self) -> range:
        return range(1 << self.n1)

    def in_neighbors(self, v: int) -> List[int]:
        return sorted(v | (1 << k) for k in range(self.n1) if not v >> k & 1)

    def out_neighbors(self, u: int) -> List[int]:
        return sorted(u & ~(1 << k) for k in range(self.n1) if u >> k & 1)


def neighbors(v: Word, direction: str) -> Set[Word]:
    """In-neighbors gain one 1, out-neighbors lose one"""
    graph = DegradationGraph(v.length)
    if direction == 'in':
        return {Word(v.length, u) for u in graph.in_neighbors(v.bits)}
    if direction == 'out':
        return {Word(v.length, u) for u in graph.out_neighbors(v.bits)}
    raise ZChannelError(f"direction must be 'in' or 'out', got {direction!r}")


@dataclass(frozen=True)
class SymmetricProfile:
    """Per-weight code sizes M_w and their free-point counts F_w"""
    n1: int
    n2: int
    sizes: Tuple[int, ...]
    free: Tuple[int, ...]

    @classmethod
    def from_sizes(cls, n1: int, n2: int, sizes: Sequence[int], table: TradeoffTable) -> 'SymmetricProfile':
        if len(sizes) != n1 + 1:
            raise ZChannelError(f"profile needs {n1 + 1} sizes, got {len(sizes)}")
        free = []
        for w, m in enumerate(sizes):
            F = table.F(m)
            if F is None:
                raise SchemeConstraintError(f"weight {w}: no size-{m} code in the n2={n2} table")
            free.append(F)
        return cls(n1, n2, tuple(sizes), tuple(free))

    def chain_violations(self) -> List[int]:
        """Weights w with (n1 - w) * M_{w+1} > F_w"""
        return [w for w in range(self.n1)
                if (self.n1 - w) * self.sizes[w + 1] > self.free[w]]

    def message_count(self) -> int:
        return sum(comb(self.n1, w) * m for w, m in enumerate(self.sizes))


@dataclass
class TwoStageScheme:
    """Second-stage code for every first-stage word, plus the free-point labeling"""
    n1: int
    n2: int
    codes: Dict[int, Code]
    labeling: Dict[int, Dict[int, int]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def graph(self) -> DegradationGraph:
        return DegradationGraph(self.n1)

    def size(self, v: int) -> int:
        return self.codes[v].size

    def free_count(self, v: int) -> int:
        return (1 << self.n2) - sum(weight(c) + 1 for c in self.codes[v].words)

    def constraint_violations(self) -> List[int]:
        """Vertices v where the in-neighbors need more free points than C(v) has"""
        return [v for v in self.graph.vertices()
                if sum(self.size(u) for u in self.graph.in_neighbors(v)) > self.free_count(v)]

    @cached_property
    def offsets(self) -> Dict[int, int]:
        """Messages of vertex u are offsets[u] + 1 .. offsets[u] + M(u)"""
        result, total = {}, 0
        for u in self.graph.vertices():
            result[u] = total
            total += self.size(u)
        return result

    @cached_property
    def shadow_index(self) -> Dict[int, Dict[int, int]]:
        """For each vertex: received second part -> index of the codeword whose shadow holds it"""
        index = {}
        for v in self.graph.vertices():
            table = {}
            for i, c in enumerate(self.codes[v].words):
                for y in shadow_bits(c, 1):
                    table[y] = i
            index[v] = table
        return index

    @cached_property
    def quota_blocks(self) -> Dict[int, Dict[int, List[int]]]:
        """For each vertex v: in-neighbor u -> free points labeled u, ascending"""
        blocks = {}
        for v, points in self.labeling.items():
            per_u: Dict[int, List[int]] = {}
            for p in sorted(points):
                per_u.setdefault(points[p], []).append(p)
            blocks[v] = per_u
        return blocks

    def message(self, m: int) -> Tuple[int, int]:
        """Message number (1-based) -> (first-stage word u, codeword index i)"""
        total = count_messages(self)
        if not 1 <= m <= total:
            raise ZChannelError(f"message {m} outside 1..{total}")
        # first vertex whose block ends past m-1; empty blocks never qualify
        u = int(np.searchsorted(self.block_ends, m - 1, side='right'))
        return u, m - 1 - self.offsets[u]

    @cached_property
    def block_ends(self) -> np.ndarray:
        return np.cumsum([self.size(u) for u in self.graph.vertices()])

    def message_number(self, u: int, i: int) -> int:
        return self.offsets[u] + i + 1

    def sizes(self) -> Dict[int, int]:
        return {v: self.size(v) for v in self.graph.vertices()}


def count_messages(scheme: TwoStageScheme) -> int:
    return sum(code.size for code in scheme.codes.values())


def build_labeling(scheme: TwoStageScheme) -> TwoStageScheme:
    """Hand each in-neighbor u of v exactly M(u) free points of C(v), ascending u then ascending p"""
    graph = scheme.graph
    labeling: Dict[int, Dict[int, int]] = {}
    for v in graph.vertices():
        incoming = graph.in_neighbors(v)
        demand = sum(scheme.size(u) for u in incoming)
        if demand > scheme.free_count(v):
            logger.error(f"Vertex {word_to_string(v, scheme.n1)} needs {demand} free points, "
                         f"has {scheme.free_count(v)}")
            raise SchemeConstraintError(
                f"vertex {word_to_string(v, scheme.n1)}: in-neighbors need {demand} free points, "
                f"C(v) has {scheme.free_count(v)}")
        if not incoming or demand == 0:
            labeling[v] = {}
            continue
        points = free_points(scheme.codes[v]).sorted_points()
        assignment = {}
        cursor = 0
        for u in incoming:
            for _ in range(scheme.size(u)):
                assignment[points[cursor]] = u
                cursor += 1
        labeling[v] = assignment
    return TwoStageScheme(scheme.n1, scheme.n2, dict(scheme.codes), labeling)


def build_scheme(n1: int, n2: int, sizes: Dict[int, int], table: TradeoffTable) -> TwoStageScheme:
    """Labeled scheme from a per-vertex size map, codes taken from the n2 trade-off table"""
    if table.n != n2:
        raise MissingTableError([n2])
    codes = {}
    for v in range(1 << n1):
        m = sizes.get(v, 0)
        if table.F(m) is None:
            raise SchemeConstraintError(
                f"vertex {word_to_string(v, n1)}: no size-{m} code in the n2={n2} table")
        codes[v] = table.witness(m)
    return build_labeling(TwoStageScheme(n1, n2, codes))


def build_symmetric(profile: SymmetricProfile, table: TradeoffTable) -> TwoStageScheme:
    """Every weight-w vertex gets the table's size-M_w code"""
    bad = profile.chain_violations()
    if bad:
        w = bad[0]
        raise SchemeConstraintError(
            f"weight {w}: ({profile.n1}-{w})*{profile.sizes[w + 1]} = "
            f"{(profile.n1 - w) * profile.sizes[w + 1]} exceeds F_{w} = {profile.free[w]}")
    sizes = {v: profile.sizes[weight(v)] for v in range(1 << profile.n1)}
    scheme = build_scheme(profile.n1, profile.n2, sizes, table)
    logger.info(f"Symmetric scheme {profile.n1}+{profile.n2}: {count_messages(scheme)} messages")
    return scheme


def encode(scheme: TwoStageScheme, m: int, feedback: Word) -> Tuple[Word, Word]:
    """First-stage word for m, and the second-stage word given the fed-back prefix"""
    u, i = scheme.message(m)
    if feedback.length != scheme.n1:
        raise FeedbackError(f"feedback has length {feedback.length}, expected {scheme.n1}")
    first = Word(scheme.n1, u)
    v = feedback.bits
    if v == u:
        return first, Word(scheme.n2, scheme.codes[u].words[i])
    if v & ~u or weight(u ^ v) != 1:
        raise FeedbackError(f"{feedback} is not {first} with at most one 1 cleared")
    block = scheme.quota_blocks.get(v, {}).get(u, [])
    if i >= len(block):
        raise ZChannelError(f"quota of {first} at {feedback} holds {len(block)} points, rank {i} requested")
    return first, Word(scheme.n2, block[i])


def decode(scheme: TwoStageScheme, y: Word) -> int:
    """Message number for a received n-bit word"""
    if y.length != scheme.n:
        raise ZChannelError(f"received word has length {y.length}, expected {scheme.n}")
    v = y.bits >> scheme.n2
    tail = y.bits & ((1 << scheme.n2) - 1)
    hit = scheme.shadow_index[v].get(tail)
    if hit is not None:
        return scheme.message_number(v, hit)
    u = scheme.labeling.get(v, {}).get(tail)
    if u is None:
        raise UnreachableWordError(
            f"{word_to_string(tail, scheme.n2)} after {word_to_string(v, scheme.n1)} "
            f"is neither in a shadow nor a labeled free point")
    rank = scheme.quota_blocks[v][u].index(tail)
    return scheme.message_number(u, rank)


@dataclass
class VerificationReport:
    cases: int
    failures: int
    first_failure: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> Dict:
        return {'cases': self.cases, 'failures': self.failures, 'first_failure': self.first_failure}


def _channel_cases(scheme: TwoStageScheme, m: int):
    """(description, received word builder) for every admissible error pattern of message m"""
    u, i = scheme.message(m)
    yield 'no error', None, None
    for k in range(scheme.n1):
        if u >> k & 1:
            yield f"first-stage flip at bit {scheme.n1 - k}", u & ~(1 << k), None
    c = scheme.codes[u].words[i]
    for k in range(scheme.n2):
        if c >> k & 1:
            yield f"second-stage flip at bit {scheme.n2 - k}", None, k


def _verify_messages(scheme: TwoStageScheme, messages: Sequence[int]) -> VerificationReport:
    cases = failures = 0
    first_failure = None
    for m in messages:
        u, _ = scheme.message(m)
        for description, feedback, second_flip in _channel_cases(scheme, m):
            cases += 1
            try:
                received_prefix = u if feedback is None else feedback
                _, second = encode(scheme, m, Word(scheme.n1, received_prefix))
                tail = second.bits if second_flip is None else second.bits & ~(1 << second_flip)
                got = decode(scheme, Word(scheme.n, (received_prefix << scheme.n2) | tail))
                ok = got == m
                detail = f"decoded {got}"
            except ZChannelError as e:
                ok = False
                detail = str(e)
            if not ok:
                failures += 1
                if first_failure is None:
                    first_failure = f"message {m}, {description}: {detail}"
    return VerificationReport(cases, failures, first_failure)


def verify_exhaustive(scheme: TwoStageScheme, jobs: int = 1, chunk: int = 256) -> VerificationReport:
    """Every message under no error and every single 1 -> 0 flip in either stage"""
    total = count_messages(scheme)
    messages = list(range(1, total + 1))
    chunks = [messages[s:s + chunk] for s in range(0, total, chunk)]
    if jobs == 1 or len(chunks) <= 1:
        parts = [_verify_messages(scheme, c) for c in chunks]
    else:
        parts = Parallel(n_jobs=jobs)(delayed(_verify_messages)(scheme, c) for c in chunks)
    first = next((p.first_failure for p in parts if p.first_failure is not None), None)
    report = VerificationReport(sum(p.cases for p in parts), sum(p.failures for p in parts), first)
    if report.passed:
        logger.info(f"Verified {total} messages over {report.cases} channel cases")
    else:
        logger.warning(f"Verification failed in {report.failures} of {report.cases} cases: {report.first_failure}")
    return report


@dataclass
class DPResult:
    """Best symmetric split found by dp_optimize"""
    n: int
    n1: int
    n2: int
    profile: SymmetricProfile
    messages: int
    per_split: Dict[int, Optional[int]] = field(default_factory=dict)
    missing: List[int] = field(default_factory=list)


def _chain_dp(n1: int, table: TradeoffTable) -> Tuple[int, Tuple[int, ...]]:
    """max sum binom(n1,w) M_w subject to (n1-w) M_{w+1} <= F(M_w), from w = n1 down to 0"""
    sizes = table.sizes()
    best = {m: comb(n1, n1) * m for m in sizes}
    choice: List[Dict[int, int]] = [dict() for _ in range(n1 + 1)]
    for w in range(n1 - 1, -1, -1):
        nxt = {}
        for m in sizes:
            cap = table.F(m)
            options = [(best[m2], -m2) for m2 in sizes if (n1 - w) * m2 <= cap]
            value, neg = max(options)
            nxt[m] = comb(n1, w) * m + value
            choice[w][m] = -neg
        best = nxt
    top, start = max((value, m) for m, value in best.items())
    profile = [start]
    for w in range(0, n1):
        profile.append(choice[w][profile[-1]])
    return top, tuple(profile)


def dp_optimize(n: int, t: int = 1, tables: Optional[Dict[int, TradeoffTable]] = None) -> DPResult:
    """Best symmetric scheme over all splits n = n1 + n2 with an available n2 table"""
    if t != 1:
        raise ZChannelError("two-stage schemes are implemented for t=1")
    tables = tables or {}
    best: Optional[DPResult] = None
    per_split: Dict[int, Optional[int]] = {}
    missing = []
    for n1 in range(1, n):
        n2 = n - n1
        table = tables.get(n2)
        if table is None:
            per_split[n1] = None
            missing.append(n2)
            continue
        messages, sizes = _chain_dp(n1, table)
        per_split[n1] = messages
        logger.info(f"Split {n1}+{n2}: {messages} messages with per-weight sizes {sizes}")
        if best is None or messages > best.messages:
            profile = SymmetricProfile.from_sizes(n1, n2, sizes, table)
            best = DPResult(n, n1, n2, profile, messages)
    if best is None:
        raise MissingTableError(sorted(set(missing)))
    if missing:
        logger.warning(f"n={n}: splits skipped for lack of tables n2={sorted(set(missing))}")
    best.per_split = per_split
    best.missing = sorted(set(missing))
    return best


class SizeAssignment:
    """Mutable per-vertex sizes for one split, with incremental constraint bookkeeping"""

    def __init__(self, n1: int, table: TradeoffTable, sizes: Dict[int, int]):
        self.graph = DegradationGraph(n1)
        self.table = table
        self.options = table.sizes()
        self.sizes = dict(sizes)
        self.demand = {v: sum(self.sizes[u] for u in self.graph.in_neighbors(v))
                       for v in self.graph.vertices()}

    def total(self) -> int:
        return sum(self.sizes.values())

    def can_set(self, v: int, m: int) -> bool:
        F = self.table.F(m)
        if F is None or self.demand[v] > F:
            return False
        delta = m - self.sizes[v]
        return all(self.demand[w] + delta <= self.table.F(self.sizes[w])
                   for w in self.graph.out_neighbors(v))

    def set(self, v: int, m: int):
        delta = m - self.sizes[v]
        self.sizes[v] = m
        for w in self.graph.out_neighbors(v):
            self.demand[w] += delta

    def raise_all(self, order: Sequence[int]) -> bool:
        changed = False
        for v in order:
            for m in reversed(self.options):
                if m <= self.sizes[v]:
                    break
                if self.can_set(v, m):
                    self.set(v, m)
                    changed = True
                    break
        return changed


def _local_search(n1: int, table: TradeoffTable, start: Dict[int, int], budget: Budget,
                  rng: np.random.Generator) -> Dict[int, int]:
    state = SizeAssignment(n1, table, start)
    vertices = list(state.graph.vertices())
    state.raise_all(vertices)
    best, best_total = dict(state.sizes), state.total()
    clock = budget.start()
    while clock.tick():
        saved = dict(state.sizes), dict(state.demand)
        # lower one vertex and its in-neighbors, then re-raise everything in random order
        v = int(rng.choice(vertices))
        for u in [v] + state.graph.out_neighbors(v):
            smaller = [m for m in state.options if m < state.sizes[u] and state.can_set(u, m)]
            if smaller:
                state.set(u, smaller[-1])
        state.raise_all([int(x) for x in rng.permutation(vertices)])
        if state.total() > best_total:
            best, best_total = dict(state.sizes), state.total()
        elif state.total() < best_total:
            state.sizes, state.demand = saved
    return best


def _mip_polish(n1: int, table: TradeoffTable, start: Dict[int, int], budget: Budget) -> Tuple[Optional[Dict[int, int]], bool]:
    """Exact choice of per-vertex sizes; returns (sizes, proved optimal)"""
    solver = pywraplp.Solver.CreateSolver('SCIP') or pywraplp.Solver.CreateSolver('CBC')
    if solver is None:
        return None, False
    graph = DegradationGraph(n1)
    options = table.sizes()
    y = {(v, m): solver.BoolVar(f"y_{v}_{m}") for v in graph.vertices() for m in options}
    size = {v: sum(m * y[v, m] for m in options) for v in graph.vertices()}
    for v in graph.vertices():
        solver.Add(sum(y[v, m] for m in options) == 1)
        incoming = graph.in_neighbors(v)
        if incoming:
            solver.Add(sum(size[u] for u in incoming) <= sum(table.F(m) * y[v, m] for m in options))
    solver.Add(sum(size.values()) >= sum(start.values()))
    solver.Maximize(sum(size.values()))
    apply_budget(solver, budget)
    status = solver.Solve()
    if status not in (pywraplp.Solver.OPTIMAL, pywraplp.Solver.FEASIBLE):
        return None, False
    sizes = {v: next(m for m in options if y[v, m].solution_value() > 0.5) for v in graph.vertices()}
    return sizes, status == pywraplp.Solver.OPTIMAL


def general_optimize(n: int, t: int = 1, tables: Optional[Dict[int, TradeoffTable]] = None,
                     budget: Budget = Budget(seconds=600.0), seed: int = 0,
                     method: str = 'both', local_iterations: int = 2000) -> TwoStageScheme:
    """Per-vertex sizes free of the weight symmetry, starting from the best symmetric profile"""
    if method not in ('local', 'mip', 'both'):
        raise ZChannelError(f"unknown optimization method {method!r}")
    tables = tables or {}
    dp = dp_optimize(n, t, tables)
    rng = np.random.default_rng(seed)
    started = time.monotonic()
    best_sizes, best_split, best_total = None, None, -1

    for n1 in range(1, n):
        n2 = n - n1
        table = tables.get(n2)
        if table is None:
            continue
        messages, profile = _chain_dp(n1, table)
        start = {v: profile[weight(v)] for v in range(1 << n1)}
        candidates = [start]
        if method in ('local', 'both'):
            candidates.append(_local_search(n1, table, start, Budget(nodes=local_iterations), rng))
        if method in ('mip', 'both'):
            sizes, proved = _mip_polish(n1, table, start, budget)
            if sizes is not None:
                candidates.append(sizes)
                if not proved:
                    logger.warning(f"Split {n1}+{n2}: size assignment not proved optimal within budget")
        for sizes in candidates:
            total = sum(sizes.values())
            if total > best_total:
                best_sizes, best_split, best_total = sizes, (n1, n2), total
        logger.info(f"Split {n1}+{n2}: symmetric {messages}, general {max(sum(s.values()) for s in candidates)}")

    n1, n2 = best_split
    scheme = build_scheme(n1, n2, best_sizes, tables[n2])
    if scheme.constraint_violations():
        raise SchemeConstraintError(f"optimizer produced violations at {scheme.constraint_violations()}")
    logger.info(f"n={n}: {count_messages(scheme)} messages (symmetric {dp.messages}) "
                f"in {time.monotonic() - started:.1f}s")
    return scheme


def save_scheme(scheme: TwoStageScheme, path: Union[str, Path]):
    n1, n2 = scheme.n1, scheme.n2
    data = {
        'n1': n1,
        'n2': n2,
        'vertices': {word_to_string(v, n1): scheme.codes[v].as_strings() for v in scheme.graph.vertices()},
        'labeling': {
            word_to_string(v, n1): {word_to_string(p, n2): word_to_string(u, n1) for p, u in sorted(points.items())}
            for v, points in sorted(scheme.labeling.items())
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)
    logger.info(f"Saved {n1}+{n2} scheme to {path}")


def load_scheme(path: Union[str, Path]) -> TwoStageScheme:
    with open(path) as f:
        data = json.load(f)
    n1, n2 = int(data['n1']), int(data['n2'])
    codes = {int(v, 2): code_from_strings(words, n=n2) for v, words in data['vertices'].items()}
    if set(codes) != set(range(1 << n1)):
        raise ZChannelError(f"scheme file {path} does not list every first-stage word")
    if any(code.n != n2 for code in codes.values()):
        raise ZChannelError(f"scheme file {path} has second-stage words of length other than {n2}")
    labeling = {int(v, 2): {int(p, 2): int(u, 2) for p, u in points.items()}
                for v, points in data.get('labeling', {}).items()}
    scheme = TwoStageScheme(n1, n2, codes, labeling)
    if not labeling:
        scheme = build_labeling(scheme)
    return scheme
