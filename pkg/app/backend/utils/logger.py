"""Sets up logging for the permtest CLI"""
import copy
import logging
from logging.config import dictConfig


_CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "default": {
            "format": "%(asctime)s %(levelname)s %(name)s | %(message)s",
        },
        "worker": {
            "format": "%(asctime)s %(levelname)s %(name)s [pid %(process)d] | %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "default",
            # stdout is reserved for JSON / CSV payloads
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {
        # package records follow --log-level; third-party records stay at WARNING
        "app.backend": {"level": "INFO"},
        # numpy / scipy RuntimeWarnings, routed through logging.captureWarnings
        "py.warnings": {"level": "WARNING"},
    },
    "root": {
        "level": "WARNING",
        "handlers": ["console"],
    },
}

# set after the first call; later calls (tests, nested main()) are no-ops
_INITIALIZED = False


def setup_logging(level: str = "INFO", with_pid: bool = False) -> None:
    """
    Configure the package logger once and only once.

    ``with_pid`` tags records with the process id, for runs that fan out over
    a process pool.
    """
    global _INITIALIZED
    if _INITIALIZED:
        return
    cfg = copy.deepcopy(_CONFIG)
    cfg["loggers"]["app.backend"]["level"] = level.upper()
    if with_pid:
        cfg["handlers"]["console"]["formatter"] = "worker"
    dictConfig(cfg)
    logging.captureWarnings(True)
    _INITIALIZED = True
