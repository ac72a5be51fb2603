"""RANSAC ground-plane estimation over the lowest points of a cloud."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, DegenerateGeometryError, InsufficientPointsError
from .validation import check_cloud, check_fraction, check_positive

_COLLINEAR_EPS = 1e-9


@dataclass(frozen=True)
class Plane:
    """``{p : normal . p + offset = 0}`` with a unit, upward-facing normal."""

    normal: tuple[float, float, float]
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        norm = float(np.linalg.norm(n))
        if n.shape != (3,) or not math.isfinite(norm) or norm == 0:
            raise ValueError(f"invalid plane normal {self.normal}")
        n = n / norm
        d = float(self.offset) / norm
        if n[2] < 0 or (n[2] == 0 and _first_nonzero(n) < 0):
            n, d = -n, -d
        object.__setattr__(self, "normal", tuple(float(v) for v in n))
        object.__setattr__(self, "offset", d)

    @classmethod
    def horizontal(cls, z):
        """The plane ``z = const``."""
        return cls((0.0, 0.0, 1.0), -float(z))

    def height_at(self, x, y):
        """z of the plane above ``(x, y)``; works elementwise on arrays."""
        nx, ny, nz = self.normal
        if abs(nz) <= 1e-6:
            raise DegenerateGeometryError("plane is near-vertical; not a ground plane")
        if isinstance(x, (list, tuple)) or isinstance(y, (list, tuple)):
            x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
        return -(self.offset + nx * x + ny * y) / nz

    def distance(self, points):
        """Unsigned point-to-plane distances."""
        p = np.asarray(points, dtype=np.float64)[..., :3]
        return np.abs(p @ np.asarray(self.normal) + self.offset)

    def to_text(self):
        return " ".join(f"{v:.10f}" for v in (*self.normal, self.offset)) + "\n"

    @classmethod
    def from_text(cls, text):
        fields = text.split()
        if len(fields) != 4:
            raise ValueError(f"plane line needs 4 numbers, got {len(fields)}")
        nx, ny, nz, d = (float(f) for f in fields)
        return cls((nx, ny, nz), d)


def _first_nonzero(v):
    for value in v:
        if value != 0:
            return value
    return 0.0


def _candidate_indices(z, bottom_fraction):
    k = math.ceil(bottom_fraction * len(z))
    return np.argsort(z, kind="stable")[:k]


def _refine(points):
    centroid = points.mean(axis=0)
    cov = np.cov((points - centroid).T, bias=True)
    _, vecs = np.linalg.eigh(cov)
    normal = vecs[:, 0]
    return Plane(tuple(normal), -float(normal @ centroid))


def fit_ground_plane(
    cloud,
    n_iterations=200,
    inlier_tolerance=0.05,
    bottom_fraction=0.4,
    random_state=0,
    return_details=False,
):
    """Fit the dominant ground plane of ``cloud``.

    Three-point hypotheses are drawn from the lowest ``bottom_fraction`` of the
    points by z. The hypothesis with the most inliers (ties: smaller mean
    inlier distance, then earlier draw) is refined by total least squares over
    its inliers.

    Returns
    -------
    plane : Plane
    n_inliers : int
        Points of the full cloud within ``inlier_tolerance`` of ``plane``.
    details : dict, optional
        Only with ``return_details``: the winning hypothesis plane and its
        inlier indices (into ``cloud``).
    """
    cloud = check_cloud(cloud)
    if int(n_iterations) < 1:
        raise ConfigError("n_iterations must be >= 1")
    tol = check_positive("inlier_tolerance", inlier_tolerance)
    frac = check_fraction("bottom_fraction", bottom_fraction)

    xyz = cloud[:, :3]
    cand_idx = _candidate_indices(xyz[:, 2], frac)
    if len(cand_idx) < 3:
        raise InsufficientPointsError(
            f"need at least 3 candidate points, have {len(cand_idx)}"
        )
    cand = xyz[cand_idx]
    rng = np.random.default_rng(random_state)

    best = None  # (count, mean_dist, normal, offset, mask)
    for _ in range(int(n_iterations)):
        i, j, k = rng.choice(len(cand), size=3, replace=False)
        e1, e2 = cand[j] - cand[i], cand[k] - cand[i]
        cross = np.cross(e1, e2)
        norm = np.linalg.norm(cross)
        if norm <= _COLLINEAR_EPS * np.linalg.norm(e1) * np.linalg.norm(e2) or norm == 0:
            continue
        normal = cross / norm
        offset = -float(normal @ cand[i])
        dist = np.abs(cand @ normal + offset)
        mask = dist <= tol
        count = int(mask.sum())
        mean_dist = float(dist[mask].mean())
        if best is None or count > best[0] or (count == best[0] and mean_dist < best[1]):
            best = (count, mean_dist, normal, offset, mask)

    if best is None:
        raise DegenerateGeometryError("every sampled hypothesis was collinear")

    hypothesis = Plane(tuple(best[2]), best[3])
    inlier_idx = cand_idx[best[4]]
    plane = _refine(xyz[inlier_idx])
    n_inliers = int((plane.distance(xyz) <= tol).sum())
    if return_details:
        return plane, n_inliers, {"hypothesis": hypothesis, "inlier_indices": inlier_idx}
    return plane, n_inliers


class GroundPlaneRANSAC(BaseEstimator):
    """Estimator wrapper around :func:`fit_ground_plane`.

    After ``fit`` the model exposes ``plane_``, ``n_inliers_``,
    ``hypothesis_plane_`` and ``inlier_indices_``; ``predict`` maps ``(x, y)``
    rows to ground height.
    """

    def __init__(self, n_iterations=200, inlier_tolerance=0.05, bottom_fraction=0.4, random_state=0):
        self.n_iterations = n_iterations
        self.inlier_tolerance = inlier_tolerance
        self.bottom_fraction = bottom_fraction
        self.random_state = random_state

    def fit(self, X, y=None):
        plane, n_inliers, details = fit_ground_plane(
            X,
            n_iterations=self.n_iterations,
            inlier_tolerance=self.inlier_tolerance,
            bottom_fraction=self.bottom_fraction,
            random_state=self.random_state,
            return_details=True,
        )
        self.plane_ = plane
        self.n_inliers_ = n_inliers
        self.hypothesis_plane_ = details["hypothesis"]
        self.inlier_indices_ = details["inlier_indices"]
        return self

    def predict(self, X):
        check_is_fitted(self, "plane_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] < 2:
            raise ValueError("predict expects an (N, >=2) array of x, y coordinates")
        return self.plane_.height_at(X[:, 0], X[:, 1])

    def score(self, X, y=None):
        """Fraction of points within tolerance of the fitted plane."""
        check_is_fitted(self, "plane_")
        X = check_cloud(X)
        if len(X) == 0:
            return 0.0
        return float((self.plane_.distance(X) <= self.inlier_tolerance).mean())
