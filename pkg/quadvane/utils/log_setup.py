import logging
import sys
import os


def setup_logging(log_level_name=None, log_file=None):
    """Configures the root logger for the quadvane tools.

    Records go to stderr so that CSV written to stdout by the CLI stays clean.

    Args:
        log_level_name: Override for the log level (default: uses LOG_LEVEL env var)
        log_file: Optional file path to write logs to (in addition to stderr)
    """
    if log_level_name is None:
        log_level_name = os.getenv("LOG_LEVEL", "INFO")
    log_level = getattr(logging, str(log_level_name).upper(), logging.INFO)
    if not isinstance(log_level, int):
        log_level = logging.INFO

    handlers = [logging.StreamHandler(sys.stderr)]

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )

    return logging.getLogger()

