"""Evaluation toolkit for instance segmentation of thin curvilinear objects."""

from .annotation_io import (
    Category,
    DatasetDescriptor,
    GtInstance,
    ImageInfo,
    PolygonGeometry,
    PredInstance,
    RleGeometry,
    SegmentationGeometry,
    load_raster_manifest,
    parse_coco_ground_truth,
    parse_coco_predictions,
    parse_yolo_segmentation,
    rasterize,
    read_mask_png,
    rle_counts_to_string,
    rle_decode,
    rle_encode,
    rle_string_to_counts,
    write_mask_png,
)
from .errors import (
    CurveEvalError,
    DegeneratePathError,
    EmptyMaskError,
    FormatError,
    GeometryError,
    ParseError,
    PlacementError,
    RleCodecError,
    RleLengthError,
    SchemaError,
    ScoreRangeError,
    ShapeMismatchError,
    UnknownIdError,
)
from .mask_ops import (
    BinaryMask,
    PixelBox,
    bounding_box,
    connected_components,
    dilate,
    disc,
    erode,
    fill_holes,
    iou_box,
    iou_mask,
    morphological_close,
)
from .metrics import (
    EvaluationReport,
    MatchConfig,
    MatchingMode,
    MatchRecord,
    PrCurve,
    average_precision,
    evaluate_dataset,
    map_summary,
    mask_nms,
    mask_nms_indices,
    match_lar,
    precision_recall_curve,
)
from .skeleton import (
    GeodesicChain,
    LengthEstimator,
    PixelCount,
    PolylineFit,
    Skeleton,
    longest_fragment_length,
    simplify_polyline,
    skeleton_length,
    skeletonize,
    trace_diameter_path,
)
from .synth import (
    CurveSpec,
    Dilate,
    Drop,
    Duplicate,
    Erode,
    Fracture,
    PerturbationSpec,
    Shift,
    composite_bezier,
    curve_length,
    generate_scene,
    perturb,
    realize,
    render_curve_mask,
)

__version__ = "0.1.0"
