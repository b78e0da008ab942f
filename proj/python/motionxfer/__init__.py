"""Python access to the torch-free core: pose geometry, pose rasters,
warping, compositing, metrics and the synthetic renderer."""

import json

from ._core import (
    NUM_KEYPOINTS,
    NUM_PARTS,
    Error,
    Pose,
    bilinear_sample,
    composite,
    extract_foreground_mask,
    frame_metrics,
    keypoint_names,
    part_names,
    part_transforms,
    pose_distance,
    pose_volume,
    read_png,
    read_poses,
    recomposite,
    stacked_pose_volume,
    warp,
    write_png,
    write_poses,
)
from ._core import render_video as _render_video

__all__ = [
    "NUM_KEYPOINTS",
    "NUM_PARTS",
    "Error",
    "Pose",
    "bilinear_sample",
    "composite",
    "extract_foreground_mask",
    "frame_metrics",
    "keypoint_names",
    "part_names",
    "part_transforms",
    "pose_distance",
    "pose_volume",
    "read_png",
    "read_poses",
    "recomposite",
    "render_video",
    "stacked_pose_volume",
    "warp",
    "write_png",
    "write_poses",
]


def render_video(config=None, seed=0):
    """Render a synthetic labelled clip. `config` uses the scene-config keys
    accepted by `motionxfer synth-data --config`."""
    return _render_video(json.dumps(config or {}), seed)
