"""Pixel-to-table-surface mapping via a four-point homography.

The bounce position on the table is recovered by fitting a projective map
from 4 pixel/table correspondences (the table corners) and applying it to
the pitch pixel. Four correspondences determine the 8 unknowns of a
scale-normalized 3x3 matrix exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .segmenter import PitchEvent


@dataclass(frozen=True)
class Homography:
    """3x3 projective matrix, scale-normalized so matrix[2, 2] == 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise DomainError(f"homography must be 3x3, got {m.shape}")
        if not np.isfinite(m).all():
            raise DomainError("homography contains non-finite entries")
        if m[2, 2] == 0:
            raise DomainError("homography bottom-right entry must be nonzero")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DomainError("homography is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def fit_homography(pixel_points, table_points) -> Homography:
    """Fit from exactly 4 correspondences (no 3 collinear on either side).

    Solves the standard 8-unknown linear system A h = b with the bottom-right
    entry fixed to 1.
    """
    src = np.asarray(pixel_points, dtype=np.float64)
    dst = np.asarray(table_points, dtype=np.float64)
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise DomainError("homography fit needs exactly 4 point pairs")
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = src[i]
        u, v = dst[i]
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        b[2 * i] = u
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i + 1] = v
    scale = np.abs(a).max()
    if scale == 0 or abs(np.linalg.det(a)) < 1e-9 * scale ** 8:
        raise DomainError("degenerate correspondences (collinear or repeated points)")
    h = np.linalg.solve(a, b)
    matrix = np.array([[h[0], h[1], h[2]],
                       [h[3], h[4], h[5]],
                       [h[6], h[7], 1.0]])
    return Homography(matrix)


def apply_homography(h: Homography, x: float, y: float) -> tuple[float, float]:
    u, v, w = h.matrix @ np.array([x, y, 1.0])
    if abs(w) < 1e-12:
        raise DomainError(f"point ({x}, {y}) maps to infinity (w'={w})")
    return float(u / w), float(v / w)


def pitch_table_position(pitch: PitchEvent, h: Homography) -> tuple[float, float]:
    """Table-surface coordinates (meters) of a detected bounce."""
    return apply_homography(h, pitch.x, pitch.y)


def homography_from_correspondence_file(doc: dict) -> Homography:
    """Build from the JSON sidecar: {"correspondences": [{"pixel": [x,y], "table": [u,v]} x4]}."""
    try:
        pairs = doc["correspondences"]
        src = [p["pixel"] for p in pairs]
        dst = [p["table"] for p in pairs]
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed homography sidecar: {exc}") from None
    if len(pairs) != 4:
        raise DomainError(f"homography sidecar needs 4 correspondences, got {len(pairs)}")
    return fit_homography(src, dst)
