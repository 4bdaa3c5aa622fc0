"""
Atomic file writes. Output files either appear complete or not at all.
"""

import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator, Union


@contextmanager
def atomic_open(path: Union[str, Path], mode: str = 'w') -> Iterator[IO]:
    """
    Open a temporary sibling of path and move it into place on success.

    Args:
        path: Final destination
        mode: 'w' for text, 'wb' for bytes

    Yields:
        Open file handle
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        encoding = None if 'b' in mode else 'utf-8'
        with os.fdopen(fd, mode, encoding=encoding, newline=None if 'b' in mode else '\n') as handle:
            yield handle
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_text_atomic(path: Union[str, Path], text: str) -> None:
    with atomic_open(path, 'w') as handle:
        handle.write(text)
