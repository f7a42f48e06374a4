from dataclasses import dataclass, field
from typing import Tuple

import numpy as np


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Path:
    """
    Arc-length parametrised planar polyline.

    All arrays have one entry per point. Arrays are read-only, so a Path can be
    shared between rollouts and worker threads.
    """
    name: str
    points: np.ndarray                 # (N, 2) m
    cumulative_arclength: np.ndarray   # (N,) m, starts at 0, strictly increasing
    curvature: np.ndarray              # (N,) 1/m, signed (left turn > 0)
    heading: np.ndarray                # (N,) rad, wrapped to (-pi, pi]
    heading_unwrapped: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))
        object.__setattr__(self, "cumulative_arclength", _frozen(self.cumulative_arclength))
        object.__setattr__(self, "curvature", _frozen(self.curvature))
        object.__setattr__(self, "heading", _frozen(self.heading))
        unwrapped = self.heading_unwrapped
        if unwrapped is None:
            unwrapped = np.unwrap(self.heading)
        object.__setattr__(self, "heading_unwrapped", _frozen(unwrapped))

    @property
    def length(self) -> float:
        return float(self.cumulative_arclength[-1])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class PathPose:
    path_id: str
    longitudinal: float                  # l, m
    world_position: Tuple[float, float]  # m
    heading: float                       # rad
    local_curvature: float               # 1/m


@dataclass(frozen=True)
class IntersectionPoint:
    path_a: str
    path_b: str
    arclength_a: float
    arclength_b: float

    def swapped(self) -> "IntersectionPoint":
        return IntersectionPoint(self.path_b, self.path_a, self.arclength_b, self.arclength_a)


@dataclass(frozen=True)
class PoseArrays:
    """Vectorised poses for a sequence of arclengths."""
    longitudinal: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    curvature: np.ndarray
