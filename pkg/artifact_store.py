"""
Cached artifacts for the Z-channel toolkit
Owns the cache directory: constant-weight values, trade-off tables with their witness
codes, heuristic codes, free-point bounds and two-stage scheme files
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import joblib
import pandas as pd

from config import Settings, load_settings
from cwbounds import CWCache, CWOracle
from fsearch import SearchResult, SearchStatus, TradeoffRow, TradeoffTable
from lpbound import BoundResult
from twostage import TwoStageScheme, load_scheme, save_scheme
from zcore import Code, ZChannelError, free_point_count, read_code, write_code

logger = logging.getLogger(__name__)

TRADEOFF_COLUMNS = ['M', 'F', 'witness']
STATUS_COLUMNS = ['M', 'status']


class MissingArtifactError(ZChannelError):
    """Required cached artifacts are absent and may not be built"""

    def __init__(self, artifacts: Iterable[str]):
        self.artifacts = sorted(artifacts)
        super().__init__(f"missing cached artifacts: {', '.join(self.artifacts)}")


class ArtifactStore:
    """File layout under the cache directory"""

    def __init__(self, root: Optional[Union[str, Path]] = None, settings: Optional[Settings] = None):
        self.settings = settings or load_settings()
        self.root = Path(root) if root is not None else self.settings.cache_dir
        self._cw_cache: Optional[CWCache] = None

    def path(self, name: str) -> Path:
        return self.root / name

    def require(self, names: Iterable[str]):
        missing = [name for name in names if not self.path(name).exists()]
        if missing:
            logger.error(f"Cache {self.root} lacks {missing}")
            raise MissingArtifactError(missing)

    # constant-weight values

    @property
    def cw_cache(self) -> CWCache:
        if self._cw_cache is None:
            self._cw_cache = CWCache(self.path('cw_cache.tsv'))
        return self._cw_cache

    def oracle(self) -> CWOracle:
        return CWOracle(self.settings.cw_exact_vertex_limit, self.settings.cw_budget, self.cw_cache)

    def flush(self):
        if self._cw_cache is not None and self._cw_cache.dirty:
            self._cw_cache.save()

    # trade-off tables

    @staticmethod
    def tradeoff_name(n: int) -> str:
        return f"tradeoff_n{n}.tsv"

    @staticmethod
    def status_name(n: int) -> str:
        return f"tradeoff_n{n}_status.tsv"

    @staticmethod
    def witness_name(n: int, M: int) -> str:
        return f"tradeoff_n{n}_M{M}.zcode"

    def has_tradeoff(self, n: int) -> bool:
        return self.path(self.tradeoff_name(n)).exists()

    def save_tradeoff(self, table: TradeoffTable):
        self.root.mkdir(parents=True, exist_ok=True)
        records = []
        for M in table.sizes():
            row = table.rows[M]
            name = self.witness_name(table.n, M)
            write_code(row.code, self.path(name))
            records.append({'M': M, 'F': row.F, 'witness': name, 'status': row.status.value})
        frame = pd.DataFrame(records, columns=TRADEOFF_COLUMNS + ['status'])
        frame[TRADEOFF_COLUMNS].to_csv(self.path(self.tradeoff_name(table.n)), sep='\t', index=False)
        frame[STATUS_COLUMNS].to_csv(self.path(self.status_name(table.n)), sep='\t', index=False)
        logger.info(f"Saved n={table.n} trade-off table ({len(records)} rows) to {self.root}")

    def load_tradeoff(self, n: int) -> TradeoffTable:
        path = self.path(self.tradeoff_name(n))
        if not path.exists():
            raise MissingArtifactError([path.name])
        df = pd.read_csv(path, sep='\t')
        status_path = self.path(self.status_name(n))
        statuses: Dict[int, str] = {}
        if status_path.exists():
            statuses = {int(r['M']): r['status'] for r in pd.read_csv(status_path, sep='\t').to_dict('records')}
        else:
            logger.warning(f"No {status_path.name}; n={n} rows are treated as unproved")
        table = TradeoffTable(n)
        for rec in df.to_dict('records'):
            code = read_code(self.path(rec['witness']))
            M, F = int(rec['M']), int(rec['F'])
            if code.n != n or code.size != M or free_point_count(code) != F:
                raise ZChannelError(f"witness {rec['witness']} does not match row M={M}, F={F}")
            status = SearchStatus(statuses.get(M, SearchStatus.INCOMPLETE.value))
            table.add(TradeoffRow(M, F, status, code))
        logger.debug(f"Loaded n={n} trade-off table with {len(table.rows)} rows")
        return table

    def tradeoff_tables(self, lengths: Iterable[int]) -> Dict[int, TradeoffTable]:
        """Every cached table among the requested lengths"""
        return {n: self.load_tradeoff(n) for n in lengths if self.has_tradeoff(n)}

    # codes

    def save_heuristic(self, result: SearchResult):
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path(f"heuristic_n{result.n}.zcode")
        if path.exists():
            previous = read_code(path)
            if previous.size >= result.code.size:
                logger.info(f"Kept cached n={result.n} code of size {previous.size}")
                return
        write_code(result.code, path)
        logger.info(f"Cached n={result.n} code of size {result.code.size}")

    def load_heuristic(self, n: int) -> Optional[Code]:
        path = self.path(f"heuristic_n{n}.zcode")
        return read_code(path) if path.exists() else None

    # bounds

    def load_bounds(self, n: int) -> Dict[int, BoundResult]:
        path = self.path(f"bound_n{n}.joblib")
        return joblib.load(path) if path.exists() else {}

    def save_bound(self, result: BoundResult):
        self.root.mkdir(parents=True, exist_ok=True)
        bounds = self.load_bounds(result.n)
        bounds[result.M] = result
        joblib.dump(bounds, self.path(f"bound_n{result.n}.joblib"))

    # schemes

    def scheme_path(self, name: str) -> Path:
        return self.path(f"scheme_{name}.json")

    def save_scheme(self, scheme: TwoStageScheme, name: str) -> Path:
        path = self.scheme_path(name)
        save_scheme(scheme, path)
        return path

    def load_scheme(self, name: str) -> TwoStageScheme:
        path = self.scheme_path(name)
        if not path.exists():
            raise MissingArtifactError([path.name])
        return load_scheme(path)

    def listing(self) -> List[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir())
