"""Region-based total scene annotation with adaptive bounding-box padding.

Pipeline: segment an image into homogeneous color regions, describe each
region with a joint texture/color histogram computed over its padded
bounding box, fold the histogram into a trained topic model, and tag the
region with the best category when its posterior clears a threshold.  A
per-region classifier picks between original-content and zero padding,
trained from a held-out pre-test of both strategies.
"""

from .annotator import AnnotatorConfig, RegionAnnotation, SceneAnnotation, annotate
from .bundle import ModelBundle, load_bundle, save_bundle
from .corpus import CorpusSpec, build_corpus, default_spec, padding_lab_spec
from .descriptor import DescriptorConfig, FeatureVector, TextureCategory, cedd
from .errors import (
    BundleFormatError,
    ContractViolation,
    DegenerateInputError,
    DegeneratePatchError,
    DegenerateRegionError,
    ManifestError,
    NumericalFailure,
    SceneAnnotateError,
    SceneSpecError,
)
from .evaluation import compare_adaptive, confusion, mask_agreement, prf
from .manifest import DatasetManifest, ManifestEntry, load_manifest, write_manifest
from .padding import (
    PaddingClassifier,
    PaddingStrategy,
    StrategyMap,
    pad,
    pretest,
    select_strategy,
    train_padding_classifier,
)
from .plsa import PlsaModel, TopicRanking, assign_topic_categories, build_term_matrix, fold_in, train
from .raster import (
    Fill,
    Placement,
    RasterImage,
    Region,
    RegionMask,
    SyntheticSceneSpec,
    extract_regions,
    generate_scene,
    read_image,
    read_mask,
    write_image,
    write_mask,
)
from .segmenter import SegmenterConfig, segment

__version__ = "0.1.0"

__all__ = [
    "AnnotatorConfig",
    "BundleFormatError",
    "ContractViolation",
    "CorpusSpec",
    "DatasetManifest",
    "DegenerateInputError",
    "DegeneratePatchError",
    "DegenerateRegionError",
    "DescriptorConfig",
    "FeatureVector",
    "Fill",
    "ManifestEntry",
    "ManifestError",
    "ModelBundle",
    "NumericalFailure",
    "PaddingClassifier",
    "PaddingStrategy",
    "Placement",
    "PlsaModel",
    "RasterImage",
    "Region",
    "RegionAnnotation",
    "RegionMask",
    "SceneAnnotateError",
    "SceneAnnotation",
    "SceneSpecError",
    "SegmenterConfig",
    "StrategyMap",
    "SyntheticSceneSpec",
    "TextureCategory",
    "TopicRanking",
    "annotate",
    "assign_topic_categories",
    "build_corpus",
    "build_term_matrix",
    "cedd",
    "compare_adaptive",
    "confusion",
    "default_spec",
    "extract_regions",
    "fold_in",
    "generate_scene",
    "load_bundle",
    "load_manifest",
    "mask_agreement",
    "pad",
    "padding_lab_spec",
    "prf",
    "pretest",
    "read_image",
    "read_mask",
    "save_bundle",
    "segment",
    "select_strategy",
    "train",
    "train_padding_classifier",
    "write_image",
    "write_manifest",
    "write_mask",
]
