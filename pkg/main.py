import sys
import traceback
from pathlib import Path

EXIT_INTERNAL = 4
FAILURES_LOG = "failures.log"


def _failuresLogPath() -> Path:
    if getattr(sys, "frozen", False):
        return Path(sys.executable).parent / FAILURES_LOG
    return Path(__file__).resolve().parent / FAILURES_LOG


def main() -> int:
    """Run `idrkit`; an unexpected crash leaves its traceback in failures.log."""
    try:
        import IdrKit

        return IdrKit.run(sys.argv[1:])
    except Exception as e:
        path = _failuresLogPath()
        with path.open("w", encoding="utf-8") as f:
            f.write(f"{e}\n{traceback.format_exc()}")
        print(f"error[INTERNAL]: {e} (traceback in {path})", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
