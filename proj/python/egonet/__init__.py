"""Python bindings for the EgoNet C++ core."""

from ._core import (
    DataError,
    EgoNet,
    NumericError,
    ShapeError,
    StereoCalib,
    conv2d,
    default_dataset_spec,
    depth_to_disparity,
    depth_to_height,
    disparity_to_depth,
    encode_dhg,
    generate_dataset,
    max_f_and_ap,
    pr_curve,
    render_frame,
    run_cli,
    scanline_disparity,
    scanline_dp,
)

__all__ = [
    "DataError",
    "EgoNet",
    "NumericError",
    "ShapeError",
    "StereoCalib",
    "conv2d",
    "default_dataset_spec",
    "depth_to_disparity",
    "depth_to_height",
    "disparity_to_depth",
    "encode_dhg",
    "generate_dataset",
    "max_f_and_ap",
    "pr_curve",
    "render_frame",
    "run_cli",
    "scanline_disparity",
    "scanline_dp",
]
