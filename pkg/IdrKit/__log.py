import logging
import logging.handlers
import os

LOGGER_NAME = "idrkit"
LOG_FORMAT = "%(asctime)s %(levelname)s\t%(message)s"
LOG_MAX_BYTES = 1024 * 1024
LOG_BACKUPS = 5


def debug(msg):
    _logger.debug(msg)


def info(msg):
    _logger.info(msg)


def warning(msg):
    _logger.warning(msg)


def error(msg):
    _logger.error(msg)


def setup(level: int | str = logging.WARNING, logFile: str | os.PathLike | None = None) -> None:
    """Set the stderr level and optionally mirror records into a rotating file."""
    global _rotating_file_handler
    _stream_handler.setLevel(level)
    if _rotating_file_handler is not None:
        _logger.removeHandler(_rotating_file_handler)
        _rotating_file_handler.close()
        _rotating_file_handler = None
    if logFile is not None:
        _rotating_file_handler = logging.handlers.RotatingFileHandler(
            logFile, maxBytes=LOG_MAX_BYTES, backupCount=LOG_BACKUPS, encoding="utf-8"
        )
        _rotating_file_handler.setFormatter(_formatter)
        _rotating_file_handler.setLevel(logging.DEBUG)
        _logger.addHandler(_rotating_file_handler)


_logger = logging.getLogger(LOGGER_NAME)

_formatter = logging.Formatter(LOG_FORMAT)

_stream_handler = logging.StreamHandler()
_stream_handler.setFormatter(_formatter)
_stream_handler.setLevel(logging.WARNING)
_rotating_file_handler: logging.handlers.RotatingFileHandler | None = None
_logger.addHandler(_stream_handler)
_logger.setLevel(logging.DEBUG)
