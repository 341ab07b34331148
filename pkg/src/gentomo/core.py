"""Grids, scalar fields and analytic phantoms shared by every transform.

All containers are immutable after construction and every operation is a
pure function, so concurrent reads are always safe.  Field values are kept
in row-major (C) order with axes in the order they were declared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Invalid grid description."""


class DimensionMismatchError(ValueError):
    """Operands live on different grids or dimensions."""


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular sampling grid in R^n.

    ``axes`` is a tuple of ``(min, max, count)`` triples; spacing on axis i
    is ``(max_i - min_i) / (count_i - 1)`` and grid points are exactly
    ``min_i + k * spacing_i``.
    """

    axes: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        if not self.axes:
            raise GridError("grid needs at least one axis")
        norm = []
        for a in self.axes:
            if len(a) != 3:
                raise GridError(f"axis spec must be (min, max, count), got {a!r}")
            lo, hi, n = float(a[0]), float(a[1]), int(a[2])
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise GridError(f"non-finite axis bounds ({lo}, {hi})")
            if n < 2:
                raise GridError(f"axis count must be >= 2, got {n}")
            if not hi > lo:
                raise GridError(f"axis max must exceed min, got ({lo}, {hi})")
            norm.append((lo, hi, n))
        object.__setattr__(self, "axes", tuple(norm))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n for _, _, n in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_points(self, i: int) -> np.ndarray:
        lo, hi, n = self.axes[i]
        return lo + (hi - lo) / (n - 1) * np.arange(n)

    def points(self) -> np.ndarray:
        """All grid points, shape (size, ndim), row-major in the axis order."""
        mesh = np.meshgrid(*(self.axis_points(i) for i in range(self.ndim)),
                           indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def point(self, index: tuple[int, ...]) -> np.ndarray:
        """Coordinates of one grid point, derived purely from the axis triples."""
        if len(index) != self.ndim:
            raise DimensionMismatchError("index rank does not match grid")
        return np.array([lo + (hi - lo) / (n - 1) * k
                         for (lo, hi, n), k in zip(self.axes, index)])

    def cell_centers(self) -> np.ndarray:
        """Centers of the (count-1)^n cells, shape (prod(count_i - 1), ndim)."""
        axes_c = [self.axis_points(i)[:-1] + 0.5 * self.spacing[i]
                  for i in range(self.ndim)]
        mesh = np.meshgrid(*axes_c, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights (outer product of per-axis trapezoid weights),
        shaped like the grid."""
        w = np.array([1.0])
        for i in range(self.ndim):
            wi = np.full(self.shape[i], self.spacing[i])
            wi[0] *= 0.5
            wi[-1] *= 0.5
            w = np.multiply.outer(w, wi)
        return w.reshape(self.shape)


def make_grid(ndim: int, axes) -> GridSpec:
    """Build a GridSpec, validating the axis count against ``ndim``."""
    axes = tuple(tuple(a) for a in axes)
    if int(ndim) != len(axes):
        raise GridError(f"ndim {ndim} does not match {len(axes)} axis specs")
    return GridSpec(axes)


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values sampled on a GridSpec, stored C-ordered in the axis order."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.size != self.grid.size:
            raise DimensionMismatchError(
                f"{v.size} values for a grid of {self.grid.size} points")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must all be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


def total_mass(f: ScalarField) -> float:
    """Trapezoid-rule integral of the field over its grid."""
    return float(np.sum(f.values * f.grid.trapezoid_weights()))


def l2_rel_error(a: ScalarField, b: ScalarField, mask: np.ndarray | None = None) -> float:
    """Grid-weighted relative L2 distance ||a - b|| / ||b||.

    ``mask`` optionally restricts the norms to a boolean subset of grid
    points (used to exclude margins around singular sets).  Returns 0 when
    both fields vanish and +inf when only the reference does.
    """
    if a.grid != b.grid:
        raise DimensionMismatchError("fields live on different grids")
    w = a.grid.trapezoid_weights()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).reshape(a.grid.shape)
        w = np.where(mask, w, 0.0)
    num = math.sqrt(float(np.sum(w * (a.values - b.values) ** 2)))
    den = math.sqrt(float(np.sum(w * b.values**2)))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


# ---------------------------------------------------------------------------
# phantoms
# ---------------------------------------------------------------------------


class Phantom:
    """Analytic probability density on R^n, evaluable pointwise.

    Subclasses are normalized by construction (total mass 1 over R^n) and
    nonnegative everywhere.  ``pdf`` takes an (N, ndim) array of points;
    ``draw`` produces exact samples for the Monte-Carlo oracle.
    """

    ndim: int

    def pdf(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def _check_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[1] != self.ndim:
            raise DimensionMismatchError(
                f"points have dimension {pts.shape[1]}, phantom is {self.ndim}-d")
        return pts


@dataclass(frozen=True)
class GaussianMixture(Phantom):
    """Convex combination of Gaussian components; weights must sum to 1."""

    weights: tuple[float, ...]
    means: tuple[tuple[float, ...], ...]
    covariances: tuple[tuple[tuple[float, ...], ...], ...]
    _chols: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size == 0 or np.any(w <= 0):
            raise ValueError("component weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()}, expected 1")
        means = [np.asarray(m, dtype=float) for m in self.means]
        covs = [np.asarray(c, dtype=float) for c in self.covariances]
        if not (len(means) == len(covs) == w.size):
            raise ValueError("weights, means and covariances must align")
        nd = means[0].size
        chols = []
        for m, c in zip(means, covs):
            if m.size != nd or c.shape != (nd, nd):
                raise DimensionMismatchError("inconsistent component dimensions")
            if not np.allclose(c, c.T, atol=1e-12 * max(1.0, np.abs(c).max())):
                raise ValueError("covariance must be symmetric")
            try:
                chols.append(np.linalg.cholesky(c))
            except np.linalg.LinAlgError:
                raise ValueError("covariance must be positive-definite") from None
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "means", tuple(tuple(m) for m in means))
        object.__setattr__(self, "covariances",
                           tuple(tuple(tuple(r) for r in c) for c in covs))
        object.__setattr__(self, "_chols", tuple(chols))

    @property
    def ndim(self) -> int:
        return len(self.means[0])

    def pdf(self, points: np.ndarray) -> np.ndarray:
        pts = self._check_points(points)
        out = np.zeros(pts.shape[0])
        for w, m, chol in zip(self.weights, self.means, self._chols):
            # solve L y = (q - m); then |q - m|_Sigma^2 = |y|^2
            d = pts - np.asarray(m)
            y = np.linalg.solve(chol, d.T).T
            quad = np.sum(y * y, axis=1)
            norm = (2 * np.pi) ** (self.ndim / 2) * np.prod(np.diag(chol))
            out += w * np.exp(-0.5 * quad) / norm
        return out

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        z = rng.standard_normal((n, self.ndim))
        out = np.empty((n, self.ndim))
        for k, (m, chol) in enumerate(zip(self.means, self._chols)):
            sel = comp == k
            out[sel] = np.asarray(m) + z[sel] @ chol.T
        return out


def gaussian(mean, covariance) -> GaussianMixture:
    """Single-component Gaussian phantom."""
    mean = tuple(np.asarray(mean, dtype=float))
    cov = tuple(tuple(r) for r in np.asarray(covariance, dtype=float))
    return GaussianMixture(weights=(1.0,), means=(mean,), covariances=(cov,))


def standard_gaussian(ndim: int) -> GaussianMixture:
    """Zero-mean identity-covariance Gaussian in ``ndim`` dimensions."""
    return gaussian(np.zeros(ndim), np.eye(ndim))


@dataclass(frozen=True)
class UniformBall(Phantom):
    """Constant density 1/vol on the closed ball of given center and radius."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center",
                           tuple(float(x) for x in np.asarray(self.center)))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def ndim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        n = self.ndim
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius**n

    def pdf(self, points: np.ndarray) -> np.ndarray:
        pts = self._check_points(points)
        r2 = np.sum((pts - np.asarray(self.center)) ** 2, axis=1)
        return np.where(r2 <= self.radius**2, 1.0 / self.volume, 0.0)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # isotropic direction times U^{1/n}-distributed radius is exact
        z = rng.standard_normal((n, self.ndim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = self.radius * rng.random(n) ** (1.0 / self.ndim)
        return np.asarray(self.center) + z * r[:, None]


@dataclass(frozen=True)
class UniformBox(Phantom):
    """Constant density 1/vol on a closed axis-aligned box."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.size != hi.size:
            raise DimensionMismatchError("box corners differ in dimension")
        if not np.all(hi > lo):
            raise ValueError("box max corner must exceed min corner")
        object.__setattr__(self, "lo", tuple(lo))
        object.__setattr__(self, "hi", tuple(hi))

    @property
    def ndim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def pdf(self, points: np.ndarray) -> np.ndarray:
        pts = self._check_points(points)
        inside = np.all((pts >= np.asarray(self.lo)) & (pts <= np.asarray(self.hi)),
                        axis=1)
        return np.where(inside, 1.0 / self.volume, 0.0)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return lo + (hi - lo) * rng.random((n, self.ndim))


def sample_phantom(phantom: Phantom, grid: GridSpec) -> ScalarField:
    """Evaluate the phantom density at every grid point."""
    if phantom.ndim != grid.ndim:
        raise DimensionMismatchError(
            f"phantom is {phantom.ndim}-d, grid is {grid.ndim}-d")
    return ScalarField(grid, phantom.pdf(grid.points()))


# ---------------------------------------------------------------------------
# tomogram families
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TomogramFamily:
    """Sampled marginal density over an X grid for every parameter point.

    ``values[p, k]`` is the marginal density in the bin centered at the k-th
    X grid point, for the p-th parameter point (row-major order over
    ``param_grid``).  ``overflow[p]`` is the source mass that fell outside
    the X window and was kept out of the bins; ``singular_fraction`` is the
    share of source points skipped because the level function is undefined
    there.  ``warnings`` carries data-quality flags, never errors.
    """

    x_grid: GridSpec
    param_grid: GridSpec
    values: np.ndarray
    family_tag: str
    overflow: np.ndarray = None
    singular_fraction: float = 0.0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.x_grid.ndim != 1:
            raise GridError("x_grid must be one-dimensional")
        v = np.asarray(self.values, dtype=np.float64)
        n_par = self.param_grid.size
        if v.shape != (n_par, self.x_grid.size):
            raise DimensionMismatchError(
                f"values shape {v.shape} != ({n_par}, {self.x_grid.size})")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        ov = (np.zeros(n_par) if self.overflow is None
              else np.asarray(self.overflow, dtype=np.float64).reshape(n_par))
        ov.setflags(write=False)
        object.__setattr__(self, "overflow", ov)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def n_params(self) -> int:
        return self.param_grid.size

    def binned_mass(self) -> np.ndarray:
        """Exact mass captured by the bins, per parameter (sum of value*dX)."""
        return self.values.sum(axis=1) * self.x_grid.spacing[0]
