"""`idrkit` subcommands. Every subcommand is a pure function of its flags,
input files and seed; numbers are written with 17 significant digits."""

import argparse
import io
import json as _json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, NoReturn

import numpy as np
import pandas as pd
from pydantic import ValidationError

from . import __config as _cfg
from . import __copula as _cm
from . import __curve as _cv
from . import __errors as _e
from . import __idr as _i
from . import __log as _l
from . import __lrt as _lrt
from . import __manifest as _mf
from . import __peaks as _pk
from . import __simulate as _s
from . import __utils as _u
from .__rank import RankedPairSet, ScoredPairSet, rankScores

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3
SUBCOMMANDS = ("pair", "fit", "curve", "select", "simulate", "compare", "lrt", "config")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise _e.UsageError(message)


class _Context:
    """Resolved settings shared by one invocation."""

    def __init__(self, args: argparse.Namespace, settings: _cfg.Settings):
        self.args = args
        self.settings = settings
        self.seed = _cfg.resolveSeed(args.seed, settings)
        self.threads = args.threads if args.threads is not None else settings.threads
        if self.threads < 1:
            raise _e.UsageError(f"--threads must be at least 1, got {self.threads}")
        self.manifest = _mf.RunManifest(
            subcommand=args.command,
            flags={k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "handler"},
            rngSeed=self.seed,
        )
        self.converged = True

    def option(self, flag: Any, default: Any) -> Any:
        return default if flag is None else flag

    def fitConfig(self) -> _cm.FitConfig:
        update: dict[str, Any] = {"rngSeed": self.seed}
        if getattr(self.args, "inits", None) is not None:
            update["nInits"] = self.args.inits
        return _cm.FitConfig.model_validate({**self.settings.fit.model_dump(), **update})

    def finish(self, output: str | os.PathLike | None) -> None:
        self.manifest.flags["resolvedSeed"] = self.seed
        self.manifest.flags["resolvedThreads"] = self.threads
        self.manifest.write(
            _mf.manifestPath(output, self.args.manifest, self.manifest.subcommand, self.manifest.inputs)
        )


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    return value


def _writeFrame(frame: pd.DataFrame, output: str | os.PathLike | None, sep: str) -> None:
    target = sys.stdout if output is None or str(output) == _u.STDIO_PATH else output
    frame.to_csv(target, sep=sep, index=False, float_format=_u.FLOAT_FORMAT, lineterminator="\n")


def _writeJson(payload: dict, output: str | os.PathLike | None) -> None:
    text = _json.dumps(payload, ensure_ascii=False, indent=4, sort_keys=True) + "\n"
    if output is None or str(output) == _u.STDIO_PATH:
        sys.stdout.write(text)
        return
    with Path(output).open("w", encoding="utf-8") as f:
        f.write(text)


def readTable(path: str | os.PathLike, required: tuple[str, ...]) -> pd.DataFrame:
    """Tab-separated table with a header row holding at least `required`."""
    text = _u.readText(path)
    if not text.strip():
        raise _e.EmptyFile(f"{path} is empty")
    try:
        frame = pd.read_csv(io.StringIO(text), sep="\t")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise _e.DataError(f"cannot parse {path}: {e}") from e
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise _e.DataError(f"{path} lacks column(s) {', '.join(missing)}")
    for column in required:
        if not pd.api.types.is_numeric_dtype(frame[column]):
            raise _e.DataError(f"column {column} of {path} is not numeric")
    return frame


def readPairs(path: str | os.PathLike) -> ScoredPairSet:
    frame = readTable(path, ("score1", "score2"))
    return ScoredPairSet.fromScores(frame["score1"].to_numpy(), frame["score2"].to_numpy())


def cmdPair(ctx: _Context) -> None:
    a, cfg = ctx.args, ctx.settings.peaks
    fmt = ctx.option(a.format, cfg.format)
    column = ctx.option(a.score_column, cfg.scoreColumn)
    width = ctx.option(a.width, cfg.width)
    direction = ctx.option(a.score_direction, cfg.scoreDirection)
    rep1 = _pk.truncateToWidth(_pk.parsePeakFile(a.rep1, fmt, column), width)
    rep2 = _pk.truncateToWidth(_pk.parsePeakFile(a.rep2, fmt, column), width)
    paired = _pk.pairPeaks(rep1, rep2, ctx.threads)
    score1, score2 = paired.scoreColumns(direction)
    frame = pd.DataFrame(
        {
            "chrom": [m.chrom for m in paired.matches],
            "start1": [m.start1 for m in paired.matches],
            "end1": [m.end1 for m in paired.matches],
            "start2": [m.start2 for m in paired.matches],
            "end2": [m.end2 for m in paired.matches],
            "score1": score1,
            "score2": score2,
        }
    )
    _writeFrame(frame, a.output, "\t")
    ctx.manifest.addInput(a.rep1)
    ctx.manifest.addInput(a.rep2)
    ctx.manifest.notes.update(
        {"matched": len(paired.matches), "unmatched1": paired.unmatched1, "unmatched2": paired.unmatched2}
    )
    ctx.finish(a.output)


def _outputPrefix(source: str, suffix: str) -> str:
    """`data/pairs.tsv` -> `data/pairs.<suffix>`; stdin -> `idrkit.<suffix>` in the working directory."""
    if source == _u.STDIO_PATH:
        return f"{_u.APP_NAME}.{suffix}"
    return str(Path(source).with_suffix("")) + f".{suffix}"


def fitTable(frame: pd.DataFrame, result: _cm.FitResult, localIdr: np.ndarray) -> pd.DataFrame:
    """Input rows, columns untouched, with posterior, local_idr, rank_by_idr and cumulative_idr appended."""
    n = len(frame)
    table = _i.idrTableFromLocalIdr(localIdr, frame["score1"].to_numpy(), frame["score2"].to_numpy())
    rankByIdr = np.empty(n, dtype=np.int64)
    rankByIdr[table.index] = table.rankByIdr
    cumulative = np.empty(n)
    cumulative[table.index] = table.cumulativeIdr
    return frame.assign(
        posterior=result.posterior, local_idr=localIdr, rank_by_idr=rankByIdr, cumulative_idr=cumulative
    )


def fitSummary(result: _cm.FitResult, ranked: RankedPairSet) -> dict[str, Any]:
    return {
        "pi1": result.theta.pi1,
        "mu1": result.theta.mu1,
        "sigma1_sq": result.theta.sigma1Sq,
        "rho1": result.theta.rho1,
        "loglik": result.loglik,
        "converged": result.converged,
        "loglik_trace": result.loglikTrace,
        "outer_trace": result.outerTrace,
        "refined": result.refined,
        "n_outer_iters": result.nOuterIters,
        "init_index": result.initIndex,
        "n_converged": result.nConverged,
        "n_discarded": result.nDiscarded,
        "n": ranked.n,
        "tie_count": ranked.tieCount,
    }


def cmdFit(ctx: _Context) -> None:
    a = ctx.args
    frame = readTable(a.input, ("score1", "score2"))
    ranked = rankScores(ScoredPairSet.fromScores(frame["score1"].to_numpy(), frame["score2"].to_numpy()))
    result = _cm.fit(ranked, ctx.fitConfig(), ctx.threads)
    localIdr = _i.localIdr(ranked, result.theta)
    output = a.output or _outputPrefix(a.input, "fit")
    _writeFrame(fitTable(frame, result, localIdr), f"{output}.tsv", "\t")
    _writeJson(fitSummary(result, ranked), f"{output}.json")
    ctx.converged = result.converged
    ctx.manifest.addInput(a.input)
    ctx.manifest.notes.update({"converged": result.converged, "output": output})
    ctx.finish(output)


def cmdCurve(ctx: _Context) -> None:
    a, cfg = ctx.args, ctx.settings.curve
    if (a.input is None) == (a.prototype is None):
        raise _e.UsageError("curve needs exactly one of --input or --prototype")
    if a.prototype is not None:
        pairs = _s.prototypeScores(ctx.option(a.n, ctx.settings.simulate.n), a.prototype, ctx.seed)
    else:
        pairs = readPairs(a.input)
        ctx.manifest.addInput(a.input)
    curve = _cv.correspondenceCurve(rankScores(pairs), ctx.option(a.grid, cfg.gridSize), ctx.option(a.df, cfg.splineDf))
    _writeFrame(pd.DataFrame({"t": curve.tGrid, "psi": curve.psi, "psi_prime": curve.psiPrime}), a.output, ",")
    ctx.manifest.notes.update(
        {"achievedDf": curve.achievedDf, "lambda": curve.lam, "transitionPoint": _cv.transitionPoint(curve)}
    )
    ctx.finish(a.output)


def cmdSelect(ctx: _Context) -> None:
    a = ctx.args
    frame = readTable(a.input, ("score1", "score2"))
    column = "local_idr" if "local_idr" in frame.columns else "posterior"
    if column not in frame.columns or not pd.api.types.is_numeric_dtype(frame[column]):
        raise _e.DataError(f"{a.input} needs a numeric local_idr or posterior column")
    idr = frame[column].to_numpy(dtype=float)
    if column == "posterior":
        idr = 1.0 - idr
    table = _i.idrTableFromLocalIdr(idr, frame["score1"].to_numpy(), frame["score2"].to_numpy())
    threshold = ctx.option(a.idr_threshold, ctx.settings.select.idrThreshold)
    selected = _i.selectAtIdr(table, threshold)
    if a.curve:
        count, idrValues = _i.idrCurve(table)
        out = pd.DataFrame({"n_selected": count, "idr": idrValues})
    else:
        # whole input rows, most reproducible first
        out = frame.iloc[table.index].assign(local_idr=table.localIdr, cumulative_idr=table.cumulativeIdr)
        out = out.iloc[:selected]
    _writeFrame(out, a.output, "\t")
    ctx.manifest.addInput(a.input)
    ctx.manifest.notes.update({"selected": selected, "idrThreshold": threshold})
    ctx.finish(a.output)


def _scenario(ctx: _Context) -> _s.SimScenario:
    a = ctx.args
    n = ctx.option(a.n, ctx.settings.simulate.n)
    if a.scenario in _s.PRESET_NAMES:
        return _s.scenarioPreset(a.scenario, n, ctx.seed)
    if not Path(a.scenario).exists():
        raise _e.UsageError(f"scenario must be one of {', '.join(_s.PRESET_NAMES)} or a JSON file, got {a.scenario!r}")
    ctx.manifest.addInput(a.scenario)
    update: dict[str, Any] = {"seed": ctx.seed}
    if a.n is not None:
        update["n"] = a.n
    return _s.loadScenario(a.scenario).model_copy(update=update)


def cmdSimulate(ctx: _Context) -> None:
    a, cfg = ctx.args, ctx.settings.simulate
    scenario = _scenario(ctx)
    reps = ctx.option(a.reps, cfg.reps)
    if reps < 1:
        raise _e.UsageError(f"--reps must be at least 1, got {reps}")
    output = a.output or _outputPrefix(a.scenario, "simulate")
    outcomes = _s.runReplicates(scenario, reps, ctx.fitConfig(), ctx.threads)
    _writeFrame(_s.calibrationFromOutcomes(outcomes, scenario.label, cfg.levels).toFrame(), f"{output}.calibration.csv", ",")
    _writeFrame(_s.tradeoffFromOutcomes(outcomes, scenario.label, cfg.budgets).toFrame(), f"{output}.tradeoff.csv", ",")
    parameters = pd.DataFrame([r.model_dump() for r in _s.parameterSummary(outcomes, scenario)])
    _writeFrame(parameters, f"{output}.parameters.csv", ",")
    nConverged = sum(o.fit.converged for o in outcomes)
    ctx.converged = nConverged == len(outcomes)
    ctx.manifest.notes.update(
        {"scenario": scenario.model_dump(), "replicatesConverged": nConverged, "output": output}
    )
    ctx.finish(output)


def cmdCompare(ctx: _Context) -> None:
    a, cfg = ctx.args, ctx.settings.simulate
    required = ("p1", "p2") + ((a.truth,) if a.truth else ())
    frame = readTable(a.input, required)
    p1 = frame["p1"].to_numpy(dtype=float)
    p2 = frame["p2"].to_numpy(dtype=float)
    for name, p in (("p1", p1), ("p2", p2)):
        if np.any(~((p > 0.0) & (p <= 1.0))):
            raise _e.DomainError(f"column {name} must hold p-values in (0, 1]")
    ranked = rankScores(ScoredPairSet.fromScores(-p1, -p2))
    result = _cm.fit(ranked, ctx.fitConfig(), ctx.threads)
    localIdr = _i.localIdr(ranked, result.theta)
    qvalues = _s.methodQValues(p1, p2)
    if a.truth:
        isCorrect = frame[a.truth].to_numpy() == _s.REPRODUCIBLE_LABEL
        out = pd.DataFrame([r.model_dump() for r in _s.tradeoffRows(0, localIdr, qvalues, isCorrect, cfg.budgets)])
        out = out.drop(columns="replicate")
    else:
        rows = [
            {"method": method, "nominal": level, "selected": int(mask.sum())}
            for level in cfg.levels
            for method, mask in _s.selectionMasks(localIdr, qvalues, level).items()
        ]
        out = pd.DataFrame(rows).sort_values(["method", "nominal"], kind="stable")
    _writeFrame(out, a.output, ",")
    ctx.converged = result.converged
    ctx.manifest.addInput(a.input)
    ctx.manifest.notes.update({"converged": result.converged, "theta": result.theta.model_dump()})
    ctx.finish(a.output)


def cmdLrt(ctx: _Context) -> None:
    a = ctx.args
    ranked = rankScores(readPairs(a.input))
    nBootstrap = ctx.option(a.bootstrap, ctx.settings.lrt.bootstrap)
    result = _lrt.bootstrapLrt(ranked, nBootstrap, ctx.seed, ctx.fitConfig(), ctx.threads)
    _writeJson(result.model_dump(mode="json"), a.output)
    ctx.manifest.addInput(a.input)
    ctx.finish(a.output)


def cmdConfig(ctx: _Context) -> None:
    _cfg.save(ctx.args.output or _u.STDIO_PATH)
    ctx.finish(ctx.args.output)


def buildParser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="settings JSON (default: $IDRKIT_CONFIG, then idrkit.json beside the program)")
    common.add_argument("--seed", type=int, help="random seed (default: $IDRKIT_SEED, then settings, then 0)")
    common.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    common.add_argument("--log-file", help="also log to this rotating file")
    common.add_argument("--manifest", help="run manifest path (default: <output>.manifest.json, or beside the input when writing to stdout)")
    common.add_argument("--strict", action="store_true", help="exit 3 when a fit does not converge")

    parser = _Parser(prog=_u.APP_NAME, description="Reproducibility of ranked signals from replicate experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_u.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pair", parents=[common], help="pair overlapping peaks of two replicates")
    p.add_argument("--rep1", required=True, help="replicate 1 peak file (plain or gzip)")
    p.add_argument("--rep2", required=True, help="replicate 2 peak file (plain or gzip)")
    p.add_argument("--format", choices=("narrowPeak", "bed-score"))
    p.add_argument("--score-column", choices=tuple(_pk.NARROWPEAK_SCORE_FIELDS))
    p.add_argument("--score-direction", choices=("high-is-better", "low-is-better"))
    p.add_argument("--width", type=int, help=f"truncation width in bp (default {_pk.DEFAULT_WIDTH})")
    p.add_argument("--output", help="paired TSV (default stdout)")
    p.set_defaults(handler=cmdPair)

    p = sub.add_parser("fit", parents=[common], help="fit the copula mixture and score every signal")
    p.add_argument("--input", required=True, help="TSV with score1 and score2 columns")
    p.add_argument("--inits", type=int, help="number of random starts")
    p.add_argument("--output", help="prefix for PREFIX.json and PREFIX.tsv (default: the input path without its suffix, plus .fit)")
    p.set_defaults(handler=cmdFit)

    p = sub.add_parser("curve", parents=[common], help="correspondence curve and its derivative")
    p.add_argument("--input", help="TSV with score1 and score2 columns")
    p.add_argument("--prototype", type=float, metavar="T0", help="synthetic ranks agreeing on the top T0 fraction")
    p.add_argument("--n", type=int, help="signals for --prototype")
    p.add_argument("--grid", type=int, help=f"grid points (default {_cv.DEFAULT_GRID_SIZE})")
    p.add_argument("--df", type=float, help=f"spline degrees of freedom (default {_cv.DEFAULT_SPLINE_DF})")
    p.add_argument("--output", help="CSV (default stdout)")
    p.set_defaults(handler=cmdCurve)

    p = sub.add_parser("select", parents=[common], help="signals passing a global IDR threshold")
    p.add_argument("--input", required=True, help="TSV written by fit")
    p.add_argument("--idr-threshold", type=float, help=f"target IDR (default {_i.DEFAULT_IDR_THRESHOLD})")
    p.add_argument("--curve", action="store_true", help="emit IDR against number selected instead")
    p.add_argument("--output", help="TSV (default stdout)")
    p.set_defaults(handler=cmdSelect)

    p = sub.add_parser("simulate", parents=[common], help="calibration and discrimination experiments")
    p.add_argument("--scenario", required=True, help="S1, S2, S3, S4 or a scenario JSON file")
    p.add_argument("--n", type=int, help="signals per dataset")
    p.add_argument("--reps", type=int, help="datasets")
    p.add_argument("--output", help="prefix for the calibration, tradeoff and parameters CSVs (default: the scenario, plus .simulate)")
    p.set_defaults(handler=cmdSimulate)

    p = sub.add_parser("compare", parents=[common], help="IDR against BH, Fisher and Stouffer on paired p-values")
    p.add_argument("--input", required=True, help="TSV with p1 and p2 columns")
    p.add_argument("--truth", help="column of component labels (1 = reproducible)")
    p.add_argument("--output", help="CSV (default stdout)")
    p.set_defaults(handler=cmdCompare)

    p = sub.add_parser("lrt", parents=[common], help="one- vs two-component bootstrap likelihood-ratio test")
    p.add_argument("--input", required=True, help="TSV with score1 and score2 columns")
    p.add_argument("--bootstrap", type=int, help=f"bootstrap draws (default {_lrt.DEFAULT_BOOTSTRAP})")
    p.add_argument("--output", help="JSON (default stdout)")
    p.set_defaults(handler=cmdLrt)

    p = sub.add_parser("config", parents=[common], help="write the default settings JSON")
    p.add_argument("--output", help="settings file (default stdout)")
    p.set_defaults(handler=cmdConfig)
    return parser


def _setupLogging(args: argparse.Namespace, settings: _cfg.Settings) -> None:
    if args.verbose >= 2:
        level: int | str = logging.DEBUG
    elif args.verbose == 1:
        level = logging.INFO
    else:
        level = settings.log.level.upper()
    _l.setup(level, args.log_file or settings.log.file)


def _validationMessage(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first["loc"])
    return f"invalid value for {where}: {first['msg']}" if where else f"invalid value: {first['msg']}"


def run(argv: list[str] | None = None) -> int:
    """Parse `argv`, run the subcommand and return its exit code."""
    try:
        args = buildParser().parse_args(argv)
        settings = _cfg.load(args.config)
        _setupLogging(args, settings)
        ctx = _Context(args, settings)
        handler: Callable[[_Context], None] = args.handler
        handler(ctx)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except _e.UsageError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"error[{_e.UsageError.code}]: {_validationMessage(e)}", file=sys.stderr)
        return EXIT_USAGE
    except _e.DataError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return EXIT_DATA
    if not ctx.converged:
        _l.warning("fit did not converge")
        if args.strict:
            print("error[NOT_CONVERGED]: fit did not meet the outer tolerance", file=sys.stderr)
            return EXIT_NOT_CONVERGED
    return EXIT_OK
