"""
Character Table Store.
Caches character tables on disk as chartab_<n>.csv and re-verifies them on load.
"""

import hashlib
import logging
from pathlib import Path
from typing import List, Optional, Union

from .characters import CharacterTable, compute_character_table, parse_table, serialize_table
from .errors import CharacterTableError
from .storage import write_text_atomic

logger = logging.getLogger(__name__)


class CharacterTableStore:
    """
    Reads and writes character tables in a cache directory.

    A cached file is trusted only after both orthogonality relations have
    been re-checked; a file that fails is reported, never silently rebuilt.
    """

    def __init__(self, cache_dir: Optional[Union[str, Path]] = None):
        """
        Initialize the store.

        Args:
            cache_dir: Directory holding chartab_<n>.csv files (default: ~/.kronml_cache)
        """
        self.cache_dir = Path(cache_dir) if cache_dir else Path.home() / '.kronml_cache'
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, n: int) -> Path:
        return self.cache_dir / f"chartab_{n}.csv"

    def exists(self, n: int) -> bool:
        return self.path_for(n).is_file()

    def load_from_file(self, file_path: Union[str, Path]) -> CharacterTable:
        """
        Load and verify a table file.

        Raises:
            FileNotFoundError: If the file does not exist
            CharacterTableError: If the file is malformed or fails orthogonality
        """
        path = Path(file_path)
        if not path.is_file():
            raise FileNotFoundError(f"Character table not found: {path}")
        try:
            return parse_table(path.read_text(encoding='utf-8'))
        except CharacterTableError as e:
            raise CharacterTableError(f"{path}: {e}") from e

    def save_to_file(self, table: CharacterTable, file_path: Optional[Union[str, Path]] = None) -> Path:
        path = Path(file_path) if file_path else self.path_for(table.n)
        write_text_atomic(path, serialize_table(table))
        logger.info("Saved character table of S_%d to %s", table.n, path)
        return path

    def load_or_build(self, n: int, workers: int = 1) -> CharacterTable:
        """
        Return the table for n, computing and caching it on first use.

        Args:
            n: Degree
            workers: Processes used if the table must be computed

        Returns:
            Verified CharacterTable

        Raises:
            CharacterTableError: If the cached file is corrupt or holds another degree
        """
        if self.exists(n):
            path = self.path_for(n)
            logger.debug("Loading cached character table %s", path)
            table = self.load_from_file(path)
            if table.n != n:
                raise CharacterTableError(f"{path} holds the character table of S_{table.n}, expected S_{n}")
            return table
        table = compute_character_table(n, workers=workers)
        self.save_to_file(table)
        return table

    def checksum(self, n: int) -> str:
        """SHA-256 of the cached file."""
        return hashlib.sha256(self.path_for(n).read_bytes()).hexdigest()

    def cached_degrees(self) -> List[int]:
        degrees = []
        for path in self.cache_dir.glob('chartab_*.csv'):
            suffix = path.stem.split('_', 1)[1]
            if suffix.isdigit():
                degrees.append(int(suffix))
        return sorted(degrees)

    def __repr__(self) -> str:
        return f"CharacterTableStore(cache_dir='{self.cache_dir}')"
