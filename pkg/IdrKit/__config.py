import json as _json
import os
from pathlib import Path

from pydantic import BaseModel, Field, ValidationError

from . import __copula as _cm
from . import __curve as _cv
from . import __errors as _e
from . import __idr as _i
from . import __log as _l
from . import __lrt as _lrt
from . import __peaks as _pk
from . import __simulate as _s
from . import __utils as _u

CONFIG_ENV = "IDRKIT_CONFIG"
DEFAULT_FILE = _u.getExeRelPath("idrkit.json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class CurveSettings(BaseModel):
    gridSize: int = Field(_cv.DEFAULT_GRID_SIZE, ge=_cv.MIN_GRID_SIZE, description="Points on the t grid")
    splineDf: float = Field(_cv.DEFAULT_SPLINE_DF, ge=2.0, description="Smoothing spline degrees of freedom")

    class Config:
        extra = "forbid"


class PeakSettings(BaseModel):
    width: int = Field(_pk.DEFAULT_WIDTH, gt=0, description="Truncation width in bp")
    format: _pk.PeakFormat = Field("narrowPeak", description="Input peak file format")
    scoreColumn: _pk.ScoreColumn = Field(_pk.DEFAULT_SCORE_COLUMN, description="narrowPeak column used as score")
    scoreDirection: _pk.ScoreDirection = Field("high-is-better", description="Orientation of the score column")

    class Config:
        extra = "forbid"


class SimulateSettings(BaseModel):
    n: int = Field(_s.DEFAULT_N, ge=2, description="Signals per dataset")
    reps: int = Field(_s.DEFAULT_REPS, ge=1, description="Datasets per scenario")
    levels: list[float] = Field(list(_s.DEFAULT_LEVELS), description="Nominal levels of the calibration grid")
    budgets: list[int] = Field(list(_s.DEFAULT_BUDGETS), description="Incorrect-call budgets of the trade-off table")

    class Config:
        extra = "forbid"


class SelectSettings(BaseModel):
    idrThreshold: float = Field(_i.DEFAULT_IDR_THRESHOLD, gt=0.0, lt=1.0, description="Target global IDR")

    class Config:
        extra = "forbid"


class LrtSettings(BaseModel):
    bootstrap: int = Field(_lrt.DEFAULT_BOOTSTRAP, ge=1, description="Parametric bootstrap draws")

    class Config:
        extra = "forbid"


class LogSettings(BaseModel):
    level: str = Field("WARNING", description="stderr log level")
    file: str | None = Field(None, description="Rotating log file, off when unset")

    class Config:
        extra = "forbid"


class Settings(BaseModel):
    seed: int | None = Field(None, ge=0, description="Seed when neither --seed nor IDRKIT_SEED is given")
    threads: int = Field(1, ge=1, description="Worker threads for starts, replicates and bootstrap draws")
    fit: _cm.FitConfig = Field(default_factory=_cm.FitConfig)
    curve: CurveSettings = Field(default_factory=CurveSettings)
    peaks: PeakSettings = Field(default_factory=PeakSettings)
    simulate: SimulateSettings = Field(default_factory=SimulateSettings)
    select: SelectSettings = Field(default_factory=SelectSettings)
    lrt: LrtSettings = Field(default_factory=LrtSettings)
    log: LogSettings = Field(default_factory=LogSettings)

    class Config:
        extra = "forbid"


def resolvePath(path: str | os.PathLike | None = None) -> tuple[Path | None, bool]:
    """(settings file to read, whether it was asked for explicitly)."""
    if path is not None:
        return Path(path), True
    if env := os.environ.get(CONFIG_ENV):
        return Path(env), True
    if DEFAULT_FILE.exists():
        return DEFAULT_FILE, False
    return None, False


def load(path: str | os.PathLike | None = None) -> Settings:
    file, explicit = resolvePath(path)
    if file is None:
        return Settings()
    if explicit and not file.exists():
        raise _e.ConfigError(f"config file {file} does not exist")
    try:
        settings = Settings.model_validate(_json.loads(_u.readText(file)))
    except (ValueError, ValidationError) as e:
        if not explicit:
            _l.warning(f"ignoring invalid config file {file}: {e}")
            return Settings()
        raise _e.ConfigError(f"invalid config file {file}: {e}") from e
    if settings.log.level.upper() not in LOG_LEVELS:
        raise _e.ConfigError(f"log level must be one of {', '.join(LOG_LEVELS)}, got {settings.log.level!r}")
    _l.info(f"loaded config file {file}")
    return settings


def save(path: str | os.PathLike, settings: Settings | None = None) -> None:
    settings = settings or Settings()
    text = _json.dumps(settings.model_dump(), ensure_ascii=False, indent=4)
    if str(path) == _u.STDIO_PATH:
        print(text)
        return
    with Path(path).open("w", encoding="utf-8") as f:
        f.write(text + "\n")
    _l.info(f"saved config file {path}")


def resolveSeed(flag: int | None, settings: Settings) -> int:
    """--seed, then IDRKIT_SEED, then the settings file, then 0."""
    if flag is not None:
        if flag < 0:
            raise _e.UsageError(f"--seed must be non-negative, got {flag}")
        return flag
    if (env := _u.envSeed()) is not None:
        return env
    return settings.seed if settings.seed is not None else 0
