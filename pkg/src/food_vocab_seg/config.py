"""Configuration settings for the food segmentation pipeline."""

import os
from typing import Final

from dotenv import load_dotenv

load_dotenv()

# Parameter archive
ARCHIVE_FORMAT_VERSION: Final[str] = "1"

# Reserved vocabulary entries, ids 0..3 in this order
PAD_TOKEN: Final[str] = "<pad>"
BOS_TOKEN: Final[str] = "<bos>"
EOS_TOKEN: Final[str] = "<eos>"
UNK_TOKEN: Final[str] = "<unk>"
BACKGROUND_CLASS: Final[str] = "background"

# Runtime
OVFS_THREADS: int = int(os.getenv("OVFS_THREADS", str(min(4, os.cpu_count() or 1))))
LOG_LEVEL: str = os.getenv("OVFS_LOG_LEVEL", "INFO").upper()
DATA_DIR: str = os.getenv("OVFS_DATA_DIR", "data")
OUT_DIR: str = os.getenv("OVFS_OUT_DIR", "runs")

# Numerical tolerances
GRADCHECK_STEP: float = float(os.getenv("OVFS_GRADCHECK_STEP", "1e-6"))
GRADCHECK_TOL: float = float(os.getenv("OVFS_GRADCHECK_TOL", "1e-4"))
