"""
Free-Point Upper Bound
Exact integer maximization of free points over weight distributions that satisfy
the linear-programming constraint families for t-asymmetric-error-correcting codes
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

from config import Budget, BudgetClock
from cwbounds import CWOracle
from zcore import WeightDistribution, ZChannelError

logger = logging.getLogger(__name__)


class LayerRule(Enum):
    SOUND = "sound"
    LITERAL = "literal"


class BoundStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    INCOMPLETE = "incomplete"


def binom(a: int, b: int) -> int:
    """Binomial coefficient, 0 for negative or out-of-range arguments"""
    if a < 0 or b < 0 or b > a:
        return 0
    return comb(a, b)


@dataclass(frozen=True)
class LinearConstraint:
    """sum coeffs[i] * z_i <= rhs"""
    family: str
    params: Tuple[Tuple[str, int], ...]
    coeffs: Tuple[int, ...]
    rhs: int

    def lhs(self, z: Sequence[int]) -> int:
        return sum(c * v for c, v in zip(self.coeffs, z))

    def label(self) -> str:
        inner = ','.join(f"{k}={v}" for k, v in self.params)
        return f"{self.family}({inner})"


@dataclass
class ConstraintViolation:
    family: str
    detail: str
    lhs: int
    rhs: int


@dataclass
class SlackEntry:
    label: str
    lhs: int
    rhs: int

    @property
    def slack(self) -> int:
        return self.rhs - self.lhs


@dataclass
class BoundResult:
    """Maximum free-point count over feasible distributions, with the optima"""
    n: int
    M: int
    t: int
    status: BoundStatus
    value: Optional[int] = None
    optimal_distributions: List[WeightDistribution] = field(default_factory=list)
    constraint_trace: List[SlackEntry] = field(default_factory=list)
    nodes: int = 0

    @property
    def feasible(self) -> bool:
        return self.value is not None

    def to_tsv(self) -> str:
        value = self.value if self.value is not None else 'infeasible'
        lines = [f"{self.n}\t{self.M}\t{self.t}\t{value}\t{len(self.optimal_distributions)}"]
        lines.extend('\t'.join(str(c) for c in dist.z) for dist in self.optimal_distributions)
        return '\n'.join(lines) + '\n'


def build_constraints(n: int, t: int, oracle: Optional[CWOracle] = None,
                      layer_rule: LayerRule = LayerRule.SOUND) -> List[LinearConstraint]:
    """Layer, constant-weight and layer-reach families as explicit linear constraints over z_0..z_n"""
    if n < 2 * t or t < 1:
        raise ZChannelError(f"bound needs n >= 2t >= 2, got n={n}, t={t}")
    oracle = oracle or CWOracle()
    d = 2 * t + 2
    constraints: List[LinearConstraint] = []

    def packing_base(w: int, s: int) -> List[int]:
        coeffs = [0] * (n + 1)
        for i in range(1, s + 1):
            if w - i >= 0:
                coeffs[w - i] += binom(n - w + i, i)
        for j in range(0, t - s + 1):
            if w + j <= n:
                coeffs[w + j] += binom(w + j, j)
        return coeffs

    for s in range(0, t + 1):
        for w in range(t + 1, n - t):
            constraints.append(LinearConstraint('layer', (('s', s), ('w', w)),
                                                tuple(packing_base(w, s)), binom(n, w)))

    for r in range(0, n + 1):
        for s in range(0, r + 1):
            low = [0] * (n + 1)
            high = [0] * (n + 1)
            for j in range(s, r + 1):
                a_l = oracle.lower(r - s, d, r - j)
                low[j] += a_l
                high[n - j] += a_l
            a_u = oracle.upper(n + r - s, d, r)
            constraints.append(LinearConstraint('low_cw', (('s', s), ('r', r)), tuple(low), a_u))
            constraints.append(LinearConstraint('high_cw', (('s', s), ('r', r)), tuple(high), a_u))

    for s in range(0, t + 1):
        for w in range(t + 1, n - t):
            if layer_rule is LayerRule.LITERAL or s == t:
                idx = w + t - s + 1
                coeffs = packing_base(w, s)
                if idx <= n:
                    coeffs[idx] += (binom(w + t - s + 1, w)
                                    - binom(t + 1, t - s + 1) * ((w + t - s + 1) // (t + 1)))
                constraints.append(LinearConstraint('layer_up', (('s', s), ('w', w)),
                                                    tuple(coeffs), binom(n, w)))
            if layer_rule is LayerRule.LITERAL or s == 0:
                idx = w - s - 1
                coeffs = packing_base(w, s)
                if idx >= 0:
                    coeffs[idx] += (binom(n - w + s + 1, s + 1)
                                    - binom(t + 1, t - s) * ((n - w + s + 1) // (t + 1)))
                constraints.append(LinearConstraint('layer_down', (('s', s), ('w', w)),
                                                    tuple(coeffs), binom(n, w)))
    return constraints


def check_constraints(z: WeightDistribution, n: int, M: int, t: int,
                      oracle: Optional[CWOracle] = None,
                      layer_rule: LayerRule = LayerRule.SOUND,
                      constraints: Optional[List[LinearConstraint]] = None) -> List[ConstraintViolation]:
    """Every violated constraint; empty iff z is feasible"""
    if len(z.z) != n + 1:
        raise ZChannelError(f"distribution has {len(z.z)} entries, expected {n + 1}")
    violations = []
    values = z.z
    negative = [i for i, v in enumerate(values) if v < 0 or int(v) != v]
    if negative:
        violations.append(ConstraintViolation('nonnegative', f"negative or fractional z at {negative}", 0, 0))
    if values[0] != 1:
        violations.append(ConstraintViolation('zero_word', "z_0 must be 1", values[0], 1))
    if n >= 1 and values[1] != 0:
        violations.append(ConstraintViolation('zero_word', "z_1 must be 0", values[1], 0))
    for c in constraints if constraints is not None else build_constraints(n, t, oracle, layer_rule):
        lhs = c.lhs(values)
        if lhs > c.rhs:
            violations.append(ConstraintViolation(c.family, c.label(), lhs, c.rhs))
    if sum(values) != M:
        violations.append(ConstraintViolation('size', "sum of z must equal M", sum(values), M))
    return violations


class DistributionSearch:
    """Depth-first enumeration of z_n, z_{n-1}, ..., z_2 with z_0=1, z_1=0"""

    def __init__(self, n: int, t: int, constraints: List[LinearConstraint],
                 budget: Budget = Budget()):
        self.n = n
        self.t = t
        self.constraints = constraints
        self.budget = budget
        self.order = list(range(n, 1, -1))
        self.rhs = [c.rhs for c in constraints]
        self.by_var: Dict[int, List[Tuple[int, int]]] = {w: [] for w in range(n + 1)}
        for k, c in enumerate(constraints):
            for w, coef in enumerate(c.coeffs):
                if coef != 0:
                    self.by_var[w].append((k, coef))
        # constraints with a negative coefficient are only checked on complete assignments
        self.prunable = [all(coef >= 0 for coef in c.coeffs) for c in constraints]
        self.nodes = 0
        self.clock: Optional[BudgetClock] = None
        self.stopped = False

    def _initial_lhs(self) -> List[int]:
        z0 = [1] + [0] * self.n
        return [c.lhs(z0) for c in self.constraints]

    def _cap(self, w: int, lhs: List[int]) -> int:
        """Largest z_w keeping every prunable constraint satisfied, others at their current values"""
        cap = None
        for k, coef in self.by_var[w]:
            if coef > 0 and self.prunable[k]:
                room = (self.rhs[k] - lhs[k]) // coef
                cap = room if cap is None else min(cap, room)
        return cap if cap is not None else 10 ** 9

    def root_capacity(self) -> int:
        """1 + sum of individual caps with only z_0 set; bounds any feasible size"""
        lhs = self._initial_lhs()
        return 1 + sum(max(0, self._cap(w, lhs)) for w in self.order)

    def _fits(self, lhs: List[int]) -> bool:
        return all(l <= r for l, r in zip(lhs, self.rhs))

    def _tick(self) -> bool:
        self.nodes += 1
        if self.clock is not None and not self.clock.tick():
            self.stopped = True
        return not self.stopped

    def minimize_cost(self, M: int) -> Tuple[Optional[int], List[Tuple[int, ...]]]:
        """Smallest sum (w+1) z_w over feasible distributions of size M, all optima"""
        self.clock = self.budget.start()
        lhs = self._initial_lhs()
        if any(l > r for l, r, p in zip(lhs, self.rhs, self.prunable) if p):
            return None, []
        z = [0] * (self.n + 1)
        z[0] = 1
        best = [None]
        optima: List[Tuple[int, ...]] = []

        def remaining_lower_bound(pos: int, left: int, cur_lhs: List[int]) -> Optional[int]:
            # fill cheapest weights first, each capped by its current room
            weights = sorted(self.order[pos:])
            cost = 0
            for w in weights:
                if left == 0:
                    break
                take = min(left, self._cap(w, cur_lhs))
                if take < 0:
                    return None
                cost += take * (w + 1)
                left -= take
            return cost if left == 0 else None

        def visit(pos: int, left: int, cost: int):
            if not self._tick():
                return
            if pos == len(self.order):
                if left != 0:
                    return
                if not self._fits(lhs):
                    return
                if best[0] is None or cost < best[0]:
                    best[0] = cost
                    optima.clear()
                if cost == best[0]:
                    optima.append(tuple(z))
                return
            lb = remaining_lower_bound(pos, left, lhs)
            if lb is None or (best[0] is not None and cost + lb > best[0]):
                return
            w = self.order[pos]
            cap = min(left, self._cap(w, lhs))
            if pos == len(self.order) - 1:
                values = [left] if left <= cap else []
            else:
                values = range(0, cap + 1)
            for value in values:
                if self.stopped:
                    return
                new_cost = cost + value * (w + 1)
                if best[0] is not None and new_cost > best[0]:
                    break
                self._assign(w, value, lhs)
                z[w] = value
                visit(pos + 1, left - value, new_cost)
                z[w] = 0
                self._assign(w, -value, lhs)

        visit(0, M - 1, 1)
        return best[0], optima

    def maximize_size(self) -> Tuple[Optional[int], Optional[Tuple[int, ...]]]:
        """Largest sum z over feasible distributions"""
        self.clock = self.budget.start()
        lhs = self._initial_lhs()
        if any(l > r for l, r, p in zip(lhs, self.rhs, self.prunable) if p):
            return None, None
        z = [0] * (self.n + 1)
        z[0] = 1
        best = [None, None]

        def visit(pos: int, size: int):
            if not self._tick():
                return
            if pos == len(self.order):
                if self._fits(lhs) and (best[0] is None or size > best[0]):
                    best[0], best[1] = size, tuple(z)
                return
            room = sum(max(0, self._cap(w, lhs)) for w in self.order[pos:])
            if best[0] is not None and size + room <= best[0]:
                return
            w = self.order[pos]
            for value in range(self._cap(w, lhs), -1, -1):
                if self.stopped:
                    return
                self._assign(w, value, lhs)
                z[w] = value
                visit(pos + 1, size + value)
                z[w] = 0
                self._assign(w, -value, lhs)

        visit(0, 1)
        return best[0], best[1]

    def _assign(self, w: int, delta: int, lhs: List[int]):
        if delta == 0:
            return
        for k, coef in self.by_var[w]:
            lhs[k] += coef * delta


def f_upper_bound(n: int, M: int, t: int = 1, oracle: Optional[CWOracle] = None,
                  budget: Budget = Budget(), layer_rule: LayerRule = LayerRule.SOUND) -> BoundResult:
    """Upper bound on the free points of any (n, M, t) code"""
    if n < 2 * t or t < 1:
        raise ZChannelError(f"bound needs n >= 2t >= 2, got n={n}, t={t}")
    if M < 1:
        raise ZChannelError("bound needs M >= 1")
    constraints = build_constraints(n, t, oracle, layer_rule)
    search = DistributionSearch(n, t, constraints, budget)
    cost, optima = search.minimize_cost(M)

    if search.stopped:
        logger.warning(f"Bound search for n={n}, M={M} stopped by budget after {search.nodes} nodes")
        result = BoundResult(n, M, t, BoundStatus.INCOMPLETE, nodes=search.nodes)
        if cost is not None:
            result.optimal_distributions = [WeightDistribution(n, z) for z in optima]
        return result
    if cost is None:
        logger.info(f"Bound system infeasible for n={n}, M={M}, t={t}")
        return BoundResult(n, M, t, BoundStatus.INFEASIBLE, nodes=search.nodes)

    dists = [WeightDistribution(n, z) for z in sorted(optima, reverse=True)]
    value = (1 << n) - cost
    trace = [SlackEntry(c.label(), c.lhs(dists[0].z), c.rhs) for c in constraints]
    logger.info(f"F_bar({n},{M},{t}) = {value} with {len(dists)} optimal distribution(s), {search.nodes} nodes")
    return BoundResult(n, M, t, BoundStatus.OPTIMAL, value, dists, trace, search.nodes)


@dataclass
class SizeBound:
    """Outcome of the size maximization; upper is a valid bound either way"""
    n: int
    t: int
    best: Optional[int]
    complete: bool
    fallback: int
    distribution: Optional[Tuple[int, ...]] = None

    @property
    def upper(self) -> int:
        if self.complete and self.best is not None:
            return self.best
        return self.fallback


def size_bound(n: int, t: int = 1, oracle: Optional[CWOracle] = None,
               budget: Budget = Budget(), layer_rule: LayerRule = LayerRule.SOUND) -> SizeBound:
    constraints = build_constraints(n, t, oracle, layer_rule)
    search = DistributionSearch(n, t, constraints, budget)
    fallback = search.root_capacity()
    size, z = search.maximize_size()
    if size is None and not search.stopped:
        raise ZChannelError(f"constraint system for n={n}, t={t} has no solution")
    if search.stopped:
        logger.warning(f"Size search for n={n} stopped by budget at {size}; falling back to {fallback}")
    return SizeBound(n, t, size, not search.stopped, fallback, z)


def feasible_max_size(n: int, t: int = 1, oracle: Optional[CWOracle] = None,
                      budget: Budget = Budget(), layer_rule: LayerRule = LayerRule.SOUND) -> int:
    """Largest M for which the constraint system has a solution (an upper bound on code size)"""
    result = size_bound(n, t, oracle, budget, layer_rule)
    logger.info(f"Largest feasible size for n={n}, t={t}: {result.upper} (distribution {result.distribution})")
    return result.upper
