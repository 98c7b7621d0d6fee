import os
import logging
from pathlib import Path
from typing import Union

from .error_handler import InputFileError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_text(path: PathLike) -> str:
    """Reads a UTF-8 text file, raising InputFileError on any I/O problem."""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        logger.debug(f"Read {len(text)} characters from {path}")
        return text
    except (IOError, OSError, UnicodeDecodeError) as e:
        raise InputFileError(f"cannot read {path}: {e}") from e


def ensure_writable(path: PathLike) -> Path:
    """Checks that the parent directory of an output path exists before any work starts."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise InputFileError(f"output directory does not exist: {parent}")
    if path.is_dir():
        raise InputFileError(f"output path is a directory: {path}")
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Writes text to path through a temporary sibling file and an atomic rename.

    Args:
        path: Destination file
        text: Content to write (UTF-8, newlines untranslated)

    Returns:
        The destination path
    """
    path = ensure_writable(path)
    temp_path = path.with_name(path.name + ".tmp")
    try:
        with open(temp_path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(temp_path, path)
        logger.debug(f"Wrote {len(text)} characters to {path}")
        return path
    except (IOError, OSError) as e:
        if temp_path.exists():
            try:
                os.remove(temp_path)
            except OSError as remove_e:
                logger.error(f"Failed to remove temporary file {temp_path}: {remove_e}")
        raise InputFileError(f"cannot write {path}: {e}") from e
