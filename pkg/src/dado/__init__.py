"""Depth-attention object discovery.

Fuses multi-head ViT attention maps with histogram-layered depth maps into
per-layer object masks, boxes, and scores, and evaluates them with
class-agnostic CorLoc and odAP. Rasters travel as grayscale PFM files.
"""

from .attention import (
    AttentionMap,
    aggregate_heads,
    attention_sparsity,
    build_attention_map,
    normalize_unit,
    resample_bilinear,
)
from .boxes import (
    Detection,
    DetectionSet,
    connected_components,
    extract_detections,
    iou,
    morph_clean,
    score_box,
    soft_nms,
)
from .config import Config
from .depth_layers import (
    DepthHistogram,
    DepthLayer,
    LayerSet,
    build_layers,
    depth_gradient_consistency,
    depth_histogram,
    discard_background,
    find_peaks,
    layer_depth,
    smooth_histogram,
)
from .estimator import DadoDiscovery
from .evaluation import EvalReport, corloc, emit_pr_curve, evaluate, odap
from .fusion import (
    CombinedLayer,
    FusionWeights,
    adaptive_threshold,
    binarize,
    combine,
    compute_weights,
    cross_correlation,
    fuse_image,
)
from .map_store import (
    Box,
    GroundTruth,
    GTObject,
    ImageRecord,
    ManifestEntry,
    load_record,
    parse_voc_xml,
    read_pfm,
    read_predictions,
    scan_manifest,
    serialize_voc_xml,
    write_pfm,
    write_predictions,
)
from .pipeline import discover_record
from .synthgen import PortableRng, SceneObject, SceneSpec, generate_scene, generate_suite
from .validation import ContractError

__version__ = "0.1.0"
