"""
Runtime settings for the Z-channel toolkit
Budgets, cache location and worker count, overridable through the environment
"""

import os
import time
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)

MAX_LENGTH = 24


@dataclass(frozen=True)
class Budget:
    """Wall-clock limit with a deterministic node-count fallback"""
    seconds: Optional[float] = None
    nodes: Optional[int] = None

    @property
    def deterministic(self) -> bool:
        return self.nodes is not None

    def start(self) -> 'BudgetClock':
        return BudgetClock(self)

    def solver_millis(self) -> Optional[int]:
        """Time limit handed to the MIP backend, None for unlimited"""
        if self.seconds is None:
            return None
        return max(1, int(self.seconds * 1000))

    @classmethod
    def parse(cls, text: Optional[str]) -> 'Budget':
        """Parse '30s', '2m', '1h' (wall clock) or '50000n' (nodes)"""
        if text is None or text == '':
            return cls()
        text = text.strip().lower()
        units = {'s': 1.0, 'm': 60.0, 'h': 3600.0}
        if text.endswith('n'):
            return cls(nodes=int(text[:-1]))
        if text[-1] in units:
            return cls(seconds=float(text[:-1]) * units[text[-1]])
        return cls(seconds=float(text))


class BudgetClock:
    """Tracks consumption of a Budget during one search"""

    def __init__(self, budget: Budget):
        self.budget = budget
        self.started = time.monotonic()
        self.nodes = 0

    def tick(self, count: int = 1) -> bool:
        """Consume nodes; returns True while the budget still allows work"""
        self.nodes += count
        return not self.exhausted()

    def exhausted(self) -> bool:
        if self.budget.nodes is not None:
            return self.nodes >= self.budget.nodes
        if self.budget.seconds is not None:
            return time.monotonic() - self.started >= self.budget.seconds
        return False

    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def remaining_seconds(self) -> Optional[float]:
        if self.budget.seconds is None:
            return None
        return max(0.0, self.budget.seconds - self.elapsed())


@dataclass
class Settings:
    """Toolkit-wide defaults"""
    cache_dir: Path = field(default_factory=lambda: Path(os.environ.get('ZCHAN_CACHE_DIR', 'zchan_cache')))
    jobs: int = field(default_factory=lambda: int(os.environ.get('ZCHAN_JOBS', '1')))

    # exact F-optimal search is attempted up to this length
    exact_search_max_n: int = 8
    # exact constant-weight values are computed only below this many candidate words
    cw_exact_vertex_limit: int = 220
    cw_cache_max_n: int = 14
    # reproduce builds missing trade-off tables up to this length; longer ones must be cached
    table_build_max_n: int = 7

    exact_budget: Budget = Budget(seconds=3600.0)
    nested_budget: Budget = Budget(seconds=1800.0)
    heuristic_budget: Budget = Budget(nodes=2_000_000)
    optimize_budget: Budget = Budget(seconds=600.0)
    cw_budget: Budget = Budget(seconds=60.0)


def load_settings() -> Settings:
    settings = Settings()
    logger.debug(f"Settings: cache_dir={settings.cache_dir}, jobs={settings.jobs}")
    return settings
