"""Coordinate-grounded segmentation: geometry, parsing, grid overlays, datasets and evaluation."""

from ._coordseg import (
    AnnotatedSample,
    CoordsegError,
    DatasetSlice,
    EvalReport,
    GridConfig,
    ImageDims,
    LoadWarnings,
    MetricTriple,
    NormBox,
    PixelBox,
    apply_grid_overlay,
    box_to_mask,
    ciou,
    decode_mask,
    denormalize_box,
    encode_mask,
    encode_png,
    format_norm_box,
    giou,
    grid_line_anchors,
    ground_truth_of,
    iou,
    load_coco,
    load_voc,
    mask_iou,
    metrics,
    normalize_box,
    parse_coordinate_text,
    prompt_from_category,
    read_image,
    run_mock_eval,
    sample_subset,
    to_raster,
    validate_coordinates,
    write_png,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
