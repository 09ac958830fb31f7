"""Global projective alignment: DLT estimation and backward-mapped warping."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ContractViolationError, HomographyEstimationError
from .types import Frame, Homography


def _normalization(points: np.ndarray) -> np.ndarray:
    """Similarity transform taking the points to centroid 0, mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    dist = np.sqrt(((points - centroid) ** 2).sum(axis=1)).mean()
    if dist < 1e-12:
        raise HomographyEstimationError("degenerate correspondences (coincident points)")
    scale = np.sqrt(2.0) / dist
    return np.array([[scale, 0.0, -scale * centroid[0]],
                     [0.0, scale, -scale * centroid[1]],
                     [0.0, 0.0, 1.0]])


def estimate_homography(src: np.ndarray, dst: np.ndarray) -> tuple[Homography, float]:
    """Least-squares homography from >=4 xy point pairs via the normalized
    direct linear transform.

    Returns the transform (``dst ~ H @ src``) and the RMS reprojection error
    in pixels.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 2 or src.shape != dst.shape:
        raise HomographyEstimationError(
            f"correspondences must be matching (N, 2) arrays, got {src.shape} / {dst.shape}")
    n = src.shape[0]
    if n < 4:
        raise HomographyEstimationError(f"need at least 4 point pairs, got {n}")

    t_src = _normalization(src)
    t_dst = _normalization(dst)
    src_n = Homography(t_src).apply_points(src)
    dst_n = Homography(t_dst).apply_points(dst)

    rows = []
    for (x, y), (u, v) in zip(src_n, dst_n):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v])
    a = np.asarray(rows)
    _, singular, vt = np.linalg.svd(a)
    if singular[-2] < 1e-10:
        raise HomographyEstimationError("degenerate configuration (rank-deficient system)")
    h_n = vt[-1].reshape(3, 3)
    matrix = np.linalg.inv(t_dst) @ h_n @ t_src
    if abs(np.linalg.det(matrix)) < 1e-12 or abs(matrix[2, 2]) < 1e-12:
        raise HomographyEstimationError("estimated homography is singular")
    homography = Homography(matrix)

    projected = homography.apply_points(src)
    rms = float(np.sqrt(((projected - dst) ** 2).sum(axis=1).mean()))
    return homography, rms


def apply_homography(frame: Frame, homography: Homography,
                     out_h: int | None = None, out_w: int | None = None) -> Frame:
    """Warp a frame so that output(p) samples the input at ``H^-1 p``.

    Uses bilinear interpolation; out-of-view samples replicate the border.
    """
    if out_h is None:
        out_h = frame.height
    if out_w is None:
        out_w = frame.width
    if out_h <= 0 or out_w <= 0:
        raise ContractViolationError(f"output size must be positive, got {out_h}x{out_w}")

    inverse = homography.inverse().matrix
    ys, xs = np.meshgrid(np.arange(out_h, dtype=np.float64),
                         np.arange(out_w, dtype=np.float64), indexing="ij")
    denom = inverse[2, 0] * xs + inverse[2, 1] * ys + inverse[2, 2]
    denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
    src_x = (inverse[0, 0] * xs + inverse[0, 1] * ys + inverse[0, 2]) / denom
    src_y = (inverse[1, 0] * xs + inverse[1, 1] * ys + inverse[1, 2]) / denom

    coords = np.stack([src_y.ravel(), src_x.ravel()])
    out = np.empty((out_h, out_w, 3), dtype=np.float64)
    for c in range(3):
        sampled = ndimage.map_coordinates(frame.data[:, :, c].astype(np.float64),
                                          coords, order=1, mode="nearest")
        out[:, :, c] = sampled.reshape(out_h, out_w)
    return Frame.from_array(out)
