"""
Run settings, environment overrides and the reference results the
reproduction is checked against.
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

ENV_OUT_DIR = 'KRONML_OUT_DIR'
ENV_THREADS = 'KRONML_THREADS'
ENV_CACHE_DIR = 'KRONML_CACHE_DIR'

DEFAULT_SEED = 20220401
DEFAULT_OUT_DIR = 'kronml_out'

CLASSIFIERS = ('nearn', 'cnn2', 'cnn3', 'lgbm')

# classifier -> dataset encoding a
ENCODING_FOR = {'nearn': 1, 'lgbm': 1, 'cnn2': 2, 'cnn3': 3}


@dataclass(frozen=True)
class ReferenceRow:
    """Reference accuracies for one n."""
    balanced_per_class: int
    accuracy: Dict[str, float]


REFERENCE_ACCURACY: Dict[int, ReferenceRow] = {
    12: ReferenceRow(126_900, {'nearn': 0.9155, 'cnn2': 0.9529, 'cnn3': 0.9697, 'lgbm': 0.9714}),
    13: ReferenceRow(260_000, {'nearn': 0.9318, 'cnn2': 0.9618, 'cnn3': 0.9773, 'lgbm': 0.9837}),
    14: ReferenceRow(600_000, {'nearn': 0.9364, 'cnn2': 0.9635, 'cnn3': 0.9772, 'lgbm': 0.9845}),
}

REFERENCE_CENSUS = {12: {'total': 456_533, 'passing': 406_919, 'ones': 280_009, 'zeros': 126_910}}
REFERENCE_Q_SIZE = {12: 406_919, 14: 2_258_526}

ACCURACY_TOLERANCE = 0.02
STABILIZATION_TOLERANCE = 0.01
LGBM_FLOOR = 0.97


def _env_int(name: str) -> Optional[int]:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == '':
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"Environment variable {name} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class RunSettings:
    """
    Global settings shared by every subcommand.

    Attributes:
        seed (int): Master seed; every random stream is derived from it
        out_dir (Path): Where datasets, models and reports go
        cache_dir (Path): Where chartab_<n>.csv files live
        threads (int): Parallelism for table construction and labeling
        quiet (bool): Suppress console output
    """
    seed: int = DEFAULT_SEED
    out_dir: Path = field(default_factory=lambda: Path(DEFAULT_OUT_DIR))
    cache_dir: Optional[Path] = None
    threads: int = 1
    quiet: bool = False

    @property
    def table_dir(self) -> Path:
        return self.cache_dir if self.cache_dir is not None else self.out_dir / 'tables'

    @classmethod
    def resolve(cls, seed: Optional[int] = None, out_dir: Optional[str] = None,
                threads: Optional[int] = None, quiet: bool = False,
                cache_dir: Optional[str] = None) -> "RunSettings":
        """
        Combine flags, environment and defaults; flags win.
        """
        env_out = os.environ.get(ENV_OUT_DIR)
        env_cache = os.environ.get(ENV_CACHE_DIR)
        resolved_threads = threads if threads is not None else _env_int(ENV_THREADS)
        if resolved_threads is None:
            resolved_threads = os.cpu_count() or 1
        if resolved_threads < 1:
            raise ValueError(f"threads must be positive, got {resolved_threads}")
        resolved_cache = cache_dir or env_cache
        return cls(
            seed=DEFAULT_SEED if seed is None else seed,
            out_dir=Path(out_dir or env_out or DEFAULT_OUT_DIR),
            cache_dir=Path(resolved_cache) if resolved_cache else None,
            threads=resolved_threads,
            quiet=quiet,
        )
