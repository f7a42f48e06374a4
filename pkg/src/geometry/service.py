from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from src.common.custom_exceptions import DomainError, PathConstructionError
from src.common.logger import setup_logger
from src.geometry.schemas import IntersectionPoint, Path, PathPose, PoseArrays

logger = setup_logger(__name__)

DISCRETIZATION_STEP = 0.5      # m
ARCLENGTH_TOLERANCE = 1e-9     # m, slack for float round-off at the path ends
CROSSING_TOLERANCE = 1e-6      # segment parameter slack, catches end-point touches


def build_path(points: Sequence[Sequence[float]], name: str = "path",
               step: float = DISCRETIZATION_STEP) -> Path:
    """
    Builds a Path from an ordered list of (x, y) points in metres.

    Inputs sampled coarser than `step` are resampled to `step` along a cubic
    spline through the points (chord-length parametrisation). Inputs that are
    already at or below the step are used as given.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise PathConstructionError(f"Path '{name}': expected a list of (x, y) pairs.")
    if pts.shape[0] < 3:
        raise PathConstructionError(f"Path '{name}': need at least 3 points, got {pts.shape[0]}.")
    if not np.all(np.isfinite(pts)):
        raise PathConstructionError(f"Path '{name}': non-finite coordinates.")

    seg_len = np.hypot(*np.diff(pts, axis=0).T)
    duplicates = np.flatnonzero(seg_len <= 0.0)
    if duplicates.size:
        raise PathConstructionError(
            f"Path '{name}': duplicate consecutive points at index {int(duplicates[0]) + 1}."
        )

    if seg_len.max() > step * (1.0 + 1e-9):
        pts = _resample(pts, seg_len, step)

    return _from_points(pts, name)


def _resample(pts: np.ndarray, seg_len: np.ndarray, step: float) -> np.ndarray:
    knots = np.concatenate(([0.0], np.cumsum(seg_len)))
    spline = CubicSpline(knots, pts, axis=0)

    # true arclength of the spline on a fine grid
    fine = np.linspace(0.0, knots[-1], max(int(np.ceil(knots[-1] / (step / 10.0))), 10) + 1)
    dense = spline(fine)
    dense_s = np.concatenate(([0.0], np.cumsum(np.hypot(*np.diff(dense, axis=0).T))))

    count = max(int(np.ceil(dense_s[-1] / step)), 2) + 1
    params = np.interp(np.linspace(0.0, dense_s[-1], count), dense_s, fine)
    out = spline(params)
    out[0], out[-1] = pts[0], pts[-1]
    return out


def _from_points(pts: np.ndarray, name: str) -> Path:
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cumulative = np.concatenate(([0.0], np.cumsum(seg_len)))

    seg_heading = np.arctan2(seg[:, 1], seg[:, 0])
    heading = np.concatenate((seg_heading, seg_heading[-1:]))

    # circumscribed circle through consecutive triples
    a, b, c = pts[:-2], pts[1:-1], pts[2:]
    ab, bc = b - a, c - b
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    denom = seg_len[:-1] * seg_len[1:] * np.hypot(*(c - a).T)
    interior = np.divide(2.0 * cross, denom, out=np.zeros_like(cross), where=denom > 0)
    curvature = np.concatenate((interior[:1], interior, interior[-1:]))

    return Path(
        name=name,
        points=pts,
        cumulative_arclength=cumulative,
        curvature=curvature,
        heading=heading,
    )


def _check_range(path: Path, l: float) -> float:
    if not np.isfinite(l) or l < -ARCLENGTH_TOLERANCE or l > path.length + ARCLENGTH_TOLERANCE:
        raise DomainError(
            f"Arclength {l:.3f} m outside path '{path.name}' [0, {path.length:.3f}] m."
        )
    return min(max(float(l), 0.0), path.length)


def _wrap(angle):
    return (np.asarray(angle) + np.pi) % (2.0 * np.pi) - np.pi


def pose_at(path: Path, l: float) -> PathPose:
    """Linear interpolation of position, heading and curvature at arclength l."""
    l = _check_range(path, l)
    arrays = poses_along(path, np.array([l]))
    return PathPose(
        path_id=path.name,
        longitudinal=l,
        world_position=(float(arrays.x[0]), float(arrays.y[0])),
        heading=float(arrays.heading[0]),
        local_curvature=float(arrays.curvature[0]),
    )


def poses_along(path: Path, ls: np.ndarray) -> PoseArrays:
    """
    Vectorised poses for arclengths `ls`. Arclengths before the start or past
    the end continue straight along the first/last heading with zero curvature.
    """
    ls = np.asarray(ls, dtype=float)
    s = path.cumulative_arclength
    inside = np.clip(ls, 0.0, path.length)

    x = np.interp(inside, s, path.points[:, 0])
    y = np.interp(inside, s, path.points[:, 1])
    heading = np.interp(inside, s, path.heading_unwrapped)
    curvature = np.interp(inside, s, path.curvature)

    before = ls < 0.0
    after = ls > path.length
    if before.any():
        h0 = path.heading[0]
        x = np.where(before, path.points[0, 0] + ls * np.cos(h0), x)
        y = np.where(before, path.points[0, 1] + ls * np.sin(h0), y)
        heading = np.where(before, h0, heading)
        curvature = np.where(before, 0.0, curvature)
    if after.any():
        h1 = path.heading[-1]
        extra = ls - path.length
        x = np.where(after, path.points[-1, 0] + extra * np.cos(h1), x)
        y = np.where(after, path.points[-1, 1] + extra * np.sin(h1), y)
        heading = np.where(after, h1, heading)
        curvature = np.where(after, 0.0, curvature)

    return PoseArrays(longitudinal=ls, x=x, y=y, heading=_wrap(heading), curvature=curvature)


def find_intersection(a: Path, b: Path) -> Optional[IntersectionPoint]:
    """First crossing of two polylines, ordered by arclength on `a`."""
    a0, a1 = a.points[:-1], a.points[1:]
    b0, b1 = b.points[:-1], b.points[1:]
    r = (a1 - a0)[:, None, :]
    s = (b1 - b0)[None, :, :]
    qp = b0[None, :, :] - a0[:, None, :]

    denom = r[..., 0] * s[..., 1] - r[..., 1] * s[..., 0]
    parallel = np.abs(denom) < 1e-12
    safe = np.where(parallel, 1.0, denom)
    t = (qp[..., 0] * s[..., 1] - qp[..., 1] * s[..., 0]) / safe
    u = (qp[..., 0] * r[..., 1] - qp[..., 1] * r[..., 0]) / safe

    lo, hi = -CROSSING_TOLERANCE, 1.0 + CROSSING_TOLERANCE
    hits = ~parallel & (t >= lo) & (t <= hi) & (u >= lo) & (u <= hi)
    if not hits.any():
        return None

    ia, ib = np.nonzero(hits)
    seg_a = np.diff(a.cumulative_arclength)
    seg_b = np.diff(b.cumulative_arclength)
    along_a = a.cumulative_arclength[ia] + np.clip(t[ia, ib], 0.0, 1.0) * seg_a[ia]
    along_b = b.cumulative_arclength[ib] + np.clip(u[ia, ib], 0.0, 1.0) * seg_b[ib]

    first = int(np.lexsort((along_b, along_a))[0])
    return IntersectionPoint(
        path_a=a.name,
        path_b=b.name,
        arclength_a=float(along_a[first]),
        arclength_b=float(along_b[first]),
    )


def max_curvature_ahead(path: Path, l: float, kappa_th: float) -> Tuple[float, bool]:
    """
    Scans forward from l for the next segment with |curvature| above kappa_th.
    The segment ends where |curvature| drops below kappa_th again, or at the
    path end. Returns (max |curvature| inside that segment, found).
    """
    l = _check_range(path, l)
    magnitude = np.abs(path.curvature)
    start_index = min(int(np.searchsorted(path.cumulative_arclength, l, side="left")), path.size - 1)

    above = magnitude[start_index:] > kappa_th
    if not above.any():
        return 0.0, False
    seg_start = start_index + int(np.argmax(above))

    below = magnitude[seg_start:] < kappa_th
    seg_end = seg_start + int(np.argmax(below)) if below.any() else path.size
    return float(magnitude[seg_start:seg_end].max()), True


def project_onto(intersection: IntersectionPoint, l_a: float) -> float:
    """
    Longitudinal position on path b of a vehicle at l_a on path a, shifted
    along the distance d_I to the crossing point.
    """
    d_i = intersection.arclength_a - l_a
    return intersection.arclength_b - d_i
