"""
csv output with cleanup of partial results
"""

import logging
import os
import tempfile
from pathlib import Path

import pandas as pd

from src.utils.errors import DataError

logger = logging.getLogger(__name__)


class OutputWriter:
    """
    writes csv files into one directory; if the block raises, every file
    written so far is removed again
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.written = []

    def __enter__(self):
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataError(f"cannot create output directory: {exc}", str(self.out_dir)) from exc
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.discard()
        return False

    def discard(self):
        for path in reversed(self.written):
            path.unlink(missing_ok=True)
        if self.written:
            logger.info("removed %d partial output files", len(self.written))
        self.written.clear()

    def _atomic(self, name, write):
        path = self.out_dir / name
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
        os.close(fd)
        try:
            write(tmp)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        self.written.append(path)
        logger.info("wrote %s", path)
        return path

    def write_csv(self, df, name, index=False):
        return self._atomic(name, lambda tmp: df.to_csv(tmp, index=index))

    def write_text(self, text, name):
        return self._atomic(name, lambda tmp: Path(tmp).write_text(text, encoding="utf-8"))


def read_csv(path, **kwargs):
    """read back a csv written by the harness"""
    try:
        return pd.read_csv(path, **kwargs)
    except FileNotFoundError:
        raise DataError("file not found", str(path)) from None
