import gzip
import hashlib
import locale
import os
import sys
from pathlib import Path

import __main__
import chardet
import numpy as np

from . import __errors as _e

APP_NAME = "idrkit"
VERSION = "1.0.0"
IS_FROZEN = getattr(sys, "frozen", False)
MAIN_PATH = (
    Path(__main__.__file__).parent if hasattr(__main__, "__file__") else Path.cwd()
)
GZIP_MAGIC = b"\x1f\x8b"
SEED_ENV = "IDRKIT_SEED"
FLOAT_FORMAT = "%.17g"
STDIO_PATH = "-"


def getExeRelPath(relPath: str | os.PathLike) -> Path:
    return Path(sys.executable).parent / relPath if IS_FROZEN else MAIN_PATH / relPath


def readBytes(path: str | os.PathLike) -> bytes:
    """Raw file content, transparently gunzipped; `-` reads stdin."""
    if str(path) == STDIO_PATH:
        raw = sys.stdin.buffer.read()
    else:
        try:
            raw = Path(path).read_bytes()
        except OSError as e:
            raise _e.DataError(f"cannot read {path}: {e.strerror or e}") from e
    if raw[:2] == GZIP_MAGIC:
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as e:
            raise _e.DataError(f"corrupt gzip stream in {path}: {e}") from e
    return raw


def decodeText(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        pass
    detected_encoding = chardet.detect(raw)["encoding"]
    encoding = detected_encoding or locale.getpreferredencoding(False) or "latin-1"
    return raw.decode(encoding, errors="replace")


def readText(path: str | os.PathLike) -> str:
    return decodeText(readBytes(path))


def fileDigest(path: str | os.PathLike) -> str:
    if str(path) == STDIO_PATH:
        return "stdin"
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return f"sha256:{h.hexdigest()}"


def childRng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the unit of work identified by `keys` under `seed`.

    Depends only on (seed, keys), never on scheduling order.
    """
    if seed < 0 or any(k < 0 for k in keys):
        raise _e.DomainError(f"seeds must be non-negative, got {seed} {keys}")
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def envSeed() -> int | None:
    value = os.environ.get(SEED_ENV)
    if value is None or value.strip() == "":
        return None
    try:
        seed = int(value)
    except ValueError as e:
        raise _e.UsageError(f"{SEED_ENV} must be an integer, got {value!r}") from e
    if seed < 0:
        raise _e.UsageError(f"{SEED_ENV} must be non-negative, got {seed}")
    return seed


def formatFloat(x: float) -> str:
    return FLOAT_FORMAT % x
