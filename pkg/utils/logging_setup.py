import logging
import os
import sys

LOG = logging.getLogger(__name__)


def configure_logging(level=None, log_file=None):
    """Route every module logger to stdout and, optionally, a log file."""
    level_name = (level or os.environ.get("WORKBENCH_LOG_LEVEL", "INFO")).upper()
    handlers = [logging.StreamHandler(sys.stdout)]
    log_file = log_file or os.environ.get("WORKBENCH_LOG_FILE")
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s [%(name)s] %(levelname)s %(message)s",
        handlers=handlers,
        force=True,
    )
    if log_file:
        LOG.debug("File logging enabled: %s", log_file)
