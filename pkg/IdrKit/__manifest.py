import json as _json
import os
from pathlib import Path
from typing import Any, Iterable

from pydantic import BaseModel, Field

from . import __errors as _e
from . import __log as _l
from . import __utils as _u

MANIFEST_SUFFIX = ".manifest.json"


class RunManifest(BaseModel):
    """Everything a subcommand's output depends on, written beside that output."""

    subcommand: str = Field(..., description="Subcommand name")
    flags: dict[str, Any] = Field(default_factory=dict, description="Resolved flag values")
    rngSeed: int = Field(0, description="Seed in effect")
    inputs: dict[str, str] = Field(default_factory=dict, description="Input path to content digest")
    version: str = Field(_u.VERSION, description="Tool version")
    notes: dict[str, Any] = Field(default_factory=dict, description="Run facts such as convergence or retention")

    class Config:
        extra = "forbid"

    def addInput(self, path: str | os.PathLike) -> None:
        self.inputs[str(path)] = _u.fileDigest(path)

    def write(self, path: str | os.PathLike) -> None:
        try:
            with Path(path).open("w", encoding="utf-8") as f:
                _json.dump(self.model_dump(mode="json"), f, ensure_ascii=False, indent=4, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise _e.DataError(f"cannot write run manifest {path}: {e.strerror or e}") from e
        _l.debug(f"wrote run manifest {path}")


def manifestPath(
    output: str | os.PathLike | None,
    explicit: str | os.PathLike | None = None,
    subcommand: str = _u.APP_NAME,
    inputs: Iterable[str | os.PathLike] = (),
) -> Path:
    """--manifest wins, then `<output>.manifest.json`.

    Output on stdout puts `<input>.<subcommand>.manifest.json` beside the
    first input file, or `idrkit.<subcommand>.manifest.json` in the working
    directory when there is none.
    """
    if explicit is not None:
        return Path(explicit)
    if output is not None and str(output) != _u.STDIO_PATH:
        return Path(f"{output}{MANIFEST_SUFFIX}")
    files = [p for p in inputs if str(p) != _u.STDIO_PATH]
    if files:
        return Path(f"{files[0]}.{subcommand}{MANIFEST_SUFFIX}")
    return Path(f"{_u.APP_NAME}.{subcommand}{MANIFEST_SUFFIX}")
