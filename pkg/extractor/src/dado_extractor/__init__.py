"""Model-extraction sidecar for the depth-attention discovery pipeline."""

from .backbones import (
    ATTENTION_BACKBONES,
    DEPTH_BACKBONES,
    WeightsUnavailable,
    extract_attention,
    extract_depth,
)
from .extract import ExtractionJob, ExtractionResult, extract_image, run_extraction
from .pfm import read_pfm, write_pfm

__version__ = "0.1.0"
