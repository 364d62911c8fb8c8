"""Parameter archive: dotted names to float64 arrays plus a string header."""

import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np
from safetensors import safe_open
from safetensors.numpy import save_file

from food_vocab_seg.config import ARCHIVE_FORMAT_VERSION
from food_vocab_seg.errors import ArchiveError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def save_archive(
    path: PathLike,
    tensors: Mapping[str, np.ndarray],
    header: Optional[Mapping[str, str]] = None,
) -> None:
    """Write arrays and header fields to ``path``.

    Args:
        path: Destination file
        tensors: Map from dotted parameter names to arrays
        header: Extra string metadata stored next to the format version
    """
    metadata = {"format_version": ARCHIVE_FORMAT_VERSION}
    for key, value in (header or {}).items():
        metadata[str(key)] = str(value)

    payload = {name: np.ascontiguousarray(array, dtype=np.float64) for name, array in tensors.items()}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    save_file(payload, str(path), metadata=metadata)
    logger.info(f"Saved {len(payload)} arrays to {path}")


def load_archive(path: PathLike) -> Tuple[Dict[str, np.ndarray], Dict[str, str]]:
    """Read an archive written by ``save_archive``.

    Returns:
        Tuple of (arrays by name, header)

    Raises:
        ArchiveError: If the file is missing, unreadable or of another format version
    """
    path = Path(path)
    if not path.exists():
        raise ArchiveError(f"Archive not found: {path}")
    try:
        with safe_open(str(path), framework="np") as handle:
            header = dict(handle.metadata() or {})
            arrays = {name: handle.get_tensor(name) for name in handle.keys()}
    except ArchiveError:
        raise
    except Exception as e:
        logger.error(f"Failed to read archive {path}: {e}")
        raise ArchiveError(f"Failed to read archive {path}: {e}") from e

    version = header.get("format_version")
    if version != ARCHIVE_FORMAT_VERSION:
        raise ArchiveError(f"Archive {path} has format version {version!r}, expected {ARCHIVE_FORMAT_VERSION!r}")
    return arrays, header


def with_prefix(state: Mapping[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    """Prepend ``prefix.`` to every name."""
    return {f"{prefix}.{name}": array for name, array in state.items()}


def strip_prefix(state: Mapping[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    """Select names under ``prefix.`` and remove the prefix."""
    marker = f"{prefix}."
    return {name[len(marker):]: array for name, array in state.items() if name.startswith(marker)}
