"""Synthetic surface charts, point-cloud samplers, and exact tangent frames.

Three parametrized surfaces are supported: a figure-eight Klein bottle
immersed in R^4, a smoothly distorted sphere in R^3, and the round unit
sphere. Chart maps are vectorized over (u, v); Jacobians are computed by
complex-step differentiation, which is exact to machine precision for
these analytic maps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateJacobian, LavdmError, UnsupportedDensity

logger = logging.getLogger(__name__)

KLEIN = "klein"
DSPHERE = "dsphere"
SPHERE = "sphere"

_KLEIN_DEFAULTS = {"R": 2.0, "P": 1.0, "gamma": 0.1}
_DSPHERE_DEFAULTS = {"a": 1.1, "b": 1.0, "c": 0.9}

# complex-step size; derivatives are exact to O(h^2) with no cancellation
_CSTEP = 1e-30


@dataclass(frozen=True)
class SurfaceChart:
    """A parametrized surface with shape parameters.

    kind is one of "klein", "dsphere", "sphere". Shape parameters default
    to (R=2, P=1, gamma=0.1) for the Klein bottle and (a=1.1, b=1.0,
    c=0.9) for the distorted sphere; the round sphere has none.
    """

    kind: str
    shape: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (KLEIN, DSPHERE, SPHERE):
            raise LavdmError(f"unknown chart kind {self.kind!r}")
        defaults = {
            KLEIN: _KLEIN_DEFAULTS,
            DSPHERE: _DSPHERE_DEFAULTS,
            SPHERE: {},
        }[self.kind]
        merged = dict(defaults)
        for key, val in self.shape.items():
            if key not in defaults:
                raise LavdmError(f"chart {self.kind!r} has no parameter {key!r}")
            merged[key] = float(val)
        if any(v <= 0 for v in merged.values()):
            raise LavdmError("chart shape parameters must be strictly positive")
        object.__setattr__(self, "shape", merged)

    @property
    def ambient_dim(self) -> int:
        return 4 if self.kind == KLEIN else 3

    @property
    def param_ranges(self):
        """(u_max, v_max); u in [0, u_max), v in [0, v_max)."""
        if self.kind == KLEIN:
            return (2 * np.pi, 2 * np.pi)
        return (np.pi, 2 * np.pi)

    def point(self, u, v) -> np.ndarray:
        """Map parameters to ambient coordinates; shape (..., p)."""
        if self.kind == KLEIN:
            return klein_point(u, v, self)
        if self.kind == DSPHERE:
            return distorted_sphere_point(u, v, self)
        return sphere_point(u, v)

    def jacobian(self, u, v) -> np.ndarray:
        """Partial derivatives (d phi/du, d phi/dv); shape (..., p, 2)."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        # canonicalize before stepping; the complex path does not wrap
        if self.kind == KLEIN:
            u = np.mod(u, 2 * np.pi)
        v = np.mod(v, 2 * np.pi)
        du = np.imag(self.point(u + 1j * _CSTEP, v)) / _CSTEP
        dv = np.imag(self.point(u, v + 1j * _CSTEP)) / _CSTEP
        return np.stack([du, dv], axis=-1)

    def area_element(self, u, v) -> np.ndarray:
        """sqrt(det g) of the induced metric, i.e. the surface measure density."""
        J = self.jacobian(u, v)
        g11 = np.sum(J[..., 0] * J[..., 0], axis=-1)
        g22 = np.sum(J[..., 1] * J[..., 1], axis=-1)
        g12 = np.sum(J[..., 0] * J[..., 1], axis=-1)
        det = g11 * g22 - g12 * g12
        return np.sqrt(np.maximum(det, 0.0))


def klein_bottle(**shape) -> SurfaceChart:
    return SurfaceChart(KLEIN, shape)


def distorted_sphere(**shape) -> SurfaceChart:
    return SurfaceChart(DSPHERE, shape)


def sphere() -> SurfaceChart:
    return SurfaceChart(SPHERE)


def klein_point(u, v, chart: SurfaceChart) -> np.ndarray:
    """Figure-eight Klein bottle immersion in R^4.

    Inputs wrap modulo 2*pi. Returns (..., 4).
    """
    R = chart.shape["R"]
    P = chart.shape["P"]
    gamma = chart.shape["gamma"]
    u = np.asarray(u)
    v = np.asarray(v)
    if not np.iscomplexobj(u) and not np.iscomplexobj(v):
        u = np.mod(u, 2 * np.pi)
        v = np.mod(v, 2 * np.pi)
    x = R * (np.cos(u / 2) * np.cos(v) - np.sin(u / 2) * np.sin(2 * v))
    y = R * (np.sin(u / 2) * np.cos(v) - np.cos(u / 2) * np.sin(2 * v))
    z = P * np.cos(u) * (1 + gamma * np.sin(v))
    w = P * np.sin(u) * (1 + gamma * np.sin(v))
    return np.stack([x, y, z, w], axis=-1)


def _pole_cutoff(u):
    """exp(-1 / (u^2.6 (pi-u)^2.2)) * (1/2 + 1/2 cos(2u - pi))^2.2, zero at the poles."""
    u = np.asarray(u)
    if np.iscomplexobj(u):
        bump = np.exp(-1.0 / (u**2.6 * (np.pi - u) ** 2.2))
        return bump * (0.5 + 0.5 * np.cos(2 * u - np.pi)) ** 2.2
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0.0) & (u < np.pi)
    ui = u[inside]
    bump = np.exp(-1.0 / (ui**2.6 * (np.pi - ui) ** 2.2))
    out[inside] = bump * (0.5 + 0.5 * np.cos(2 * ui - np.pi)) ** 2.2
    return out


def _dsphere_rho(u, v):
    return 1.0 + _pole_cutoff(u) * (
        0.2 * np.sin(2 * u + v)
        + 0.15 * np.cos(4 * v + u)
        + 0.1 * np.sin(4 * u) * np.cos(2 * v)
    )


def distorted_sphere_point(u, v, chart: SurfaceChart) -> np.ndarray:
    """Smooth fully asymmetric sphere-like surface in R^3; returns (..., 3).

    u is the colatitude in [0, pi), v the longitude in [0, 2*pi). The
    radial distortion is cut off at the poles (the cutoff tends to 0 as
    u -> 0 or pi, taken as exactly 0 there).
    """
    a = chart.shape["a"]
    b = chart.shape["b"]
    c = chart.shape["c"]
    u = np.asarray(u)
    v = np.asarray(v)
    rho = _dsphere_rho(u, v)
    x = a * rho * np.sin(u) * np.cos(v)
    y = b * rho * np.sin(u) * np.sin(v)
    z = c * rho * np.cos(u)
    return np.stack([x, y, z], axis=-1)


def sphere_point(u, v) -> np.ndarray:
    """Round unit sphere: u is the colatitude, v the longitude; returns (..., 3)."""
    u, v = np.broadcast_arrays(np.asarray(u), np.asarray(v))
    return np.stack(
        [np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)], axis=-1
    )


def ground_truth_frame(chart: SurfaceChart, u, v) -> np.ndarray:
    """Orthonormal tangent frame from the chart Jacobian; shape (..., p, 2).

    Gram-Schmidt on (d phi/du, d phi/dv): the first column is parallel to
    d phi/du. Raises DegenerateJacobian when the Jacobian rank drops below
    2 within tolerance 1e-10.
    """
    J = chart.jacobian(u, v)
    ju = J[..., 0]
    jv = J[..., 1]
    nu = np.linalg.norm(ju, axis=-1, keepdims=True)
    scale = np.maximum(np.linalg.norm(jv, axis=-1, keepdims=True), nu)
    if np.any(nu <= 1e-10 * scale):
        raise DegenerateJacobian("d phi/du vanishes at a requested point")
    q1 = ju / nu
    r = jv - np.sum(jv * q1, axis=-1, keepdims=True) * q1
    nr = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(nr <= 1e-10 * scale):
        raise DegenerateJacobian("chart Jacobian is rank deficient (rank < 2)")
    q2 = r / nr
    return np.stack([q1, q2], axis=-1)


@dataclass(frozen=True)
class PointCloud:
    """Immutable ambient point set with optional chart parameters.

    points: (n, p) ambient coordinates. params: (n, 2) chart coordinates or
    None. When params and chart are both present, chart.point(params)
    reproduces points to 1e-12 (enforced at construction).
    """

    points: np.ndarray
    params: np.ndarray | None = None
    chart: SurfaceChart | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2:
            raise LavdmError("points must be an (n, p) matrix")
        if not np.all(np.isfinite(pts)):
            raise LavdmError("points must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.params is not None:
            par = np.ascontiguousarray(np.asarray(self.params, dtype=float))
            if par.shape != (pts.shape[0], 2):
                raise LavdmError("params must be an (n, 2) matrix")
            par.flags.writeable = False
            object.__setattr__(self, "params", par)
            if self.chart is not None:
                rebuilt = self.chart.point(par[:, 0], par[:, 1])
                err = np.max(np.abs(rebuilt - pts)) if pts.size else 0.0
                if err > 1e-12:
                    raise LavdmError(
                        f"params do not reproduce points through the chart "
                        f"(max error {err:.3e} > 1e-12)"
                    )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def subset(self, indices) -> "PointCloud":
        indices = np.asarray(indices)
        params = self.params[indices] if self.params is not None else None
        return PointCloud(self.points[indices], params, self.chart)


def write_cloud_csv(path, cloud: PointCloud):
    """CSV with header idx,x0..x{p-1}[,u,v], 17 significant digits."""
    cols = [f"x{i}" for i in range(cloud.p)]
    if cloud.params is not None:
        cols += ["u", "v"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("idx," + ",".join(cols) + "\n")
        for i in range(cloud.n):
            vals = list(cloud.points[i])
            if cloud.params is not None:
                vals += list(cloud.params[i])
            fh.write(str(i) + "," + ",".join(f"{v:.17g}" for v in vals) + "\n")


def read_cloud_csv(path, chart: SurfaceChart | None = None) -> PointCloud:
    """Read a cloud written by write_cloud_csv; chart re-attaches params."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not header or header[0] != "idx":
        raise LavdmError(f"{path}: expected an 'idx,x0..' cloud CSV header")
    has_params = header[-2:] == ["u", "v"]
    p = len(header) - 1 - (2 if has_params else 0)
    data = np.array([[float(v) for v in row[1:]] for row in rows])
    points = data[:, :p]
    params = data[:, p : p + 2] if has_params else None
    return PointCloud(points, params, chart if has_params else None)


def _rejection_area_uniform(chart: SurfaceChart, n: int, rng) -> np.ndarray:
    """(u, v) pairs distributed by the surface area measure, via rejection."""
    umax, vmax = chart.param_ranges
    gu = np.linspace(0, umax, 481)[1:-1]
    gv = np.linspace(0, vmax, 481)[:-1]
    grid = chart.area_element(gu[:, None], gv[None, :])
    bound = 1.05 * float(grid.max())
    out = np.empty((0, 2))
    proposed = 0
    while out.shape[0] < n:
        batch = max(2 * (n - out.shape[0]), 256)
        u = rng.uniform(0, umax, size=batch)
        v = rng.uniform(0, vmax, size=batch)
        # keep the area evaluation off the poles where the cutoff is non-analytic
        ueval = np.clip(u, 1e-9, umax - 1e-9)
        accept = rng.uniform(0, bound, size=batch) < chart.area_element(ueval, v)
        proposed += batch
        out = np.vstack([out, np.column_stack([u[accept], v[accept]])])
    logger.debug(
        "area-uniform rejection sampling on %s: acceptance ratio %.3f",
        chart.kind,
        out.shape[0] / max(proposed, 1),
    )
    return out[:n]


def _acg_params(sigma: np.ndarray, n: int, rng) -> np.ndarray:
    """Angular central Gaussian draw on S^2, returned as (colatitude, longitude)."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (3, 3) or not np.allclose(sigma, sigma.T):
        raise LavdmError("ACG sigma must be a symmetric 3x3 matrix")
    try:
        A = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise LavdmError("ACG sigma must be positive definite") from exc
    z = rng.standard_normal((n, 3))
    x = z @ A.T
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    theta = np.arccos(np.clip(x[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
    return np.column_stack([theta, phi])


def sample_surface(
    chart: SurfaceChart,
    n: int,
    density: str = "area",
    seed: int = 0,
    sigma=None,
) -> PointCloud:
    """Draw n points on the chart under the requested sampling density.

    density "area" rejection-samples against the surface area element,
    "param" is uniform on the parameter rectangle, and "acg" draws from an
    angular central Gaussian with covariance sigma (sphere-based charts
    only; sigma defaults to diag(1, 1, 0.8)). Deterministic given seed.
    """
    if n < 1:
        raise LavdmError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if density == "area":
        params = _rejection_area_uniform(chart, n, rng)
    elif density == "param":
        umax, vmax = chart.param_ranges
        params = np.column_stack(
            [rng.uniform(0, umax, size=n), rng.uniform(0, vmax, size=n)]
        )
    elif density == "acg":
        if chart.kind == KLEIN:
            raise UnsupportedDensity(
                "angular central Gaussian sampling is undefined for the Klein bottle"
            )
        if sigma is None:
            sigma = np.diag([1.0, 1.0, 0.8])
        params = _acg_params(np.asarray(sigma), n, rng)
    else:
        raise LavdmError(f"unknown density {density!r}")
    points = chart.point(params[:, 0], params[:, 1])
    return PointCloud(points, params, chart)


def sample_near(
    chart: SurfaceChart,
    centers: np.ndarray,
    radius: float,
    n: int,
    seed: int = 0,
    mode: str = "union",
) -> PointCloud:
    """Area-uniform points restricted to ambient balls around given centers.

    mode "union" keeps points within radius of any center, "intersection"
    within radius of every center. Used for landmark draws around probe
    points.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    rng = np.random.default_rng(seed)
    params = np.empty((0, 2))
    guard = 0
    while params.shape[0] < n:
        cand = _rejection_area_uniform(chart, max(4 * n, 256), rng)
        pts = chart.point(cand[:, 0], cand[:, 1])
        d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=-1)
        keep = (d <= radius).any(axis=1) if mode == "union" else (d <= radius).all(axis=1)
        params = np.vstack([params, cand[keep]])
        guard += 1
        if guard > 200:
            raise LavdmError("sample_near: acceptance region appears to be empty")
    params = params[:n]
    return PointCloud(chart.point(params[:, 0], params[:, 1]), params, chart)
