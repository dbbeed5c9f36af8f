import typing as T
import contextlib
import logging
import os
import pathlib
import shutil
import tempfile
import time
from collections import OrderedDict

DATA_ENV_VAR = "DESCATTER_DATA"

logger = logging.getLogger(__name__)

KT = T.TypeVar("KT")
VT = T.TypeVar("VT")


class CacheDict(OrderedDict[KT, VT]):
    """Dict with a limited length, ejecting LRUs as needed."""

    def __init__(self, *args: T.Any, cache_len: int, **kwargs: T.Any):
        assert cache_len > 0
        self.cache_len = cache_len

        super().__init__(*args, **kwargs)

    def __setitem__(self, key: KT, value: VT) -> None:
        super().__setitem__(key, value)
        super().move_to_end(key)

        while len(self) > self.cache_len:
            oldkey = next(iter(self))
            super().__delitem__(oldkey)

    def __getitem__(self, key: KT) -> VT:
        val = super().__getitem__(key)
        super().move_to_end(key)

        return val


@contextlib.contextmanager
def timed(tag: str, log: logging.Logger | None = None) -> T.Iterator[None]:
    start = time.time()
    yield
    (log or logger).info(f"[{tag}] took {(time.time() - start) * 1_000:.1f} ms")


def resolve_path(path: str | os.PathLike[str]) -> pathlib.Path:
    """relative paths live under $DESCATTER_DATA when it is set"""
    p = pathlib.Path(path)
    if p.is_absolute():
        return p
    if root := os.getenv(DATA_ENV_VAR):
        return pathlib.Path(root) / p
    return p


def atomic_write_bytes(path: pathlib.Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        pathlib.Path(tmp_name).unlink(missing_ok=True)
        raise


def atomic_write_text(path: pathlib.Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@contextlib.contextmanager
def atomic_directory(path: pathlib.Path) -> T.Iterator[pathlib.Path]:
    """yields a scratch directory that replaces `path` only if the block succeeds"""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = pathlib.Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    tmp.chmod(0o755)
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if path.exists():
        shutil.rmtree(path)
    os.replace(tmp, path)


__all__ = [
    "CacheDict",
    "timed",
    "resolve_path",
    "atomic_write_bytes",
    "atomic_write_text",
    "atomic_directory",
    "DATA_ENV_VAR",
]
