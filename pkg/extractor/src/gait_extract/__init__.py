"""Video/image-folder to 33-landmark gait JSONL extraction."""

from .backends import MediapipeBackend, PoseBackend
from .extract import ExtractionError, ExtractionJob, ExtractionResult, extract, extract_clip

__version__ = "0.1.0"
