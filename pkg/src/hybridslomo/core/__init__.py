"""Pure, deterministic image and flow math shared by the whole package."""

from .fusion import FUSE_EPS, fuse_warped, mask_visibility
from .homography import apply_homography, estimate_homography
from .resample import downsample_area, resample, resize_flow
from .types import Frame, FlowField, Homography, VisibilityMap, to_array, to_tensor
from .warp import chain_flow_sequence, chain_flows, warp_backward

__all__ = [
    "FUSE_EPS",
    "Frame",
    "FlowField",
    "Homography",
    "VisibilityMap",
    "apply_homography",
    "chain_flow_sequence",
    "chain_flows",
    "downsample_area",
    "estimate_homography",
    "fuse_warped",
    "mask_visibility",
    "resample",
    "resize_flow",
    "to_array",
    "to_tensor",
    "warp_backward",
]
