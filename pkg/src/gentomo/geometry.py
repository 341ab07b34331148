"""Level-set family catalogue: hyperplanes, diffeomorphism-deformed surfaces
(circles through the origin, hyperbolas, hyperboloids) and shifted quadrics.

Every family exposes a level function g(q; params), a Jacobian weight used
by the deformed inversion kernel, and a singular-set predicate.  Singular
points are handled by exclusion: scalar entry points raise, the vectorized
methods let the marginal engine skip offending cells (a measure-zero set).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .core import DimensionMismatchError

# relative spectral threshold below which an eigenvalue counts as zero
ZERO_EIG_RTOL = 1e-10


class SingularPointError(ValueError):
    """The requested point lies on the family's singular set."""


# ---------------------------------------------------------------------------
# diffeomorphisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diffeomorphism:
    """Smooth invertible map of R^n minus a singular set.

    ``map_fn`` and ``jacobian_fn`` are vectorized over an (N, ndim) array of
    points; ``jacobian_fn`` returns the absolute determinant of the map's
    derivative.  ``singular_fn`` flags points where the map is undefined and
    ``singular_distance_fn`` gives the distance to that set (+inf when the
    set is empty), used to carve evaluation margins.
    """

    ndim: int
    name: str
    map_fn: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray]
    singular_fn: Callable[[np.ndarray], np.ndarray]
    singular_distance_fn: Callable[[np.ndarray], np.ndarray]


def identity_map(ndim: int) -> Diffeomorphism:
    return Diffeomorphism(
        ndim=ndim,
        name="identity",
        map_fn=lambda q: np.array(q, dtype=float, copy=True),
        jacobian_fn=lambda q: np.ones(len(q)),
        singular_fn=lambda q: np.zeros(len(q), dtype=bool),
        singular_distance_fn=lambda q: np.full(len(q), np.inf),
    )


def conformal_inversion() -> Diffeomorphism:
    """(q, p) -> (q, p) / (q^2 + p^2): lines become circles through the origin."""

    def _map(q):
        r2 = np.sum(q * q, axis=1, keepdims=True)
        return q / r2

    def _jac(q):
        r2 = np.sum(q * q, axis=1)
        return 1.0 / r2**2

    return Diffeomorphism(
        ndim=2,
        name="conformal_inversion",
        map_fn=_map,
        jacobian_fn=_jac,
        singular_fn=lambda q: np.all(q == 0.0, axis=1),
        singular_distance_fn=lambda q: np.sqrt(np.sum(q * q, axis=1)),
    )


def axis_inversion() -> Diffeomorphism:
    """(q, p) -> (1/q, p): lines become hyperbolas with a vertical asymptote."""

    def _map(q):
        out = np.array(q, dtype=float, copy=True)
        out[:, 0] = 1.0 / q[:, 0]
        return out

    return Diffeomorphism(
        ndim=2,
        name="axis_inversion",
        map_fn=_map,
        jacobian_fn=lambda q: 1.0 / q[:, 0] ** 2,
        singular_fn=lambda q: q[:, 0] == 0.0,
        singular_distance_fn=lambda q: np.abs(q[:, 0]),
    )


def hyperboloid_map(n: int) -> Diffeomorphism:
    """(q, p) in R^{2n} -> (q, q*p) componentwise; Jacobian prod |q_j|."""
    if n < 1:
        raise ValueError("n must be >= 1")

    def _map(z):
        q, p = z[:, :n], z[:, n:]
        return np.concatenate([q, q * p], axis=1)

    return Diffeomorphism(
        ndim=2 * n,
        name="hyperboloid_map",
        map_fn=_map,
        jacobian_fn=lambda z: np.prod(np.abs(z[:, :n]), axis=1),
        singular_fn=lambda z: np.any(z[:, :n] == 0.0, axis=1),
        singular_distance_fn=lambda z: np.min(np.abs(z[:, :n]), axis=1),
    )


def finite_difference_jacobian(map_fn, q: np.ndarray, h: float = 1e-5) -> float:
    """Absolute determinant of the central-difference derivative of a map.

    Independent cross-check for the analytic Jacobian weights; the step is
    relative to the coordinate magnitude.
    """
    q = np.asarray(q, dtype=float)
    n = q.size
    J = np.empty((n, n))
    for j in range(n):
        step = h * max(1.0, abs(q[j]))
        e = np.zeros(n)
        e[j] = step
        hi = map_fn((q + e)[None, :])[0]
        lo = map_fn((q - e)[None, :])[0]
        J[:, j] = (hi - lo) / (2 * step)
    return abs(float(np.linalg.det(J)))


# ---------------------------------------------------------------------------
# quadric forms
# ---------------------------------------------------------------------------


class QuadricClass(Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    HYBRID = "hybrid"


@dataclass(frozen=True, eq=False)
class QuadricForm:
    """Symmetric matrix defining the pattern X = (q - mu, B (q - mu)).

    For hybrid use, ``linear_axes`` declares which coordinates B treats
    linearly; B must vanish on all rows/columns of those axes and be
    non-degenerate on the rest.
    """

    B: np.ndarray
    linear_axes: tuple[int, ...] = ()
    _eigs: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValueError("B must be a square matrix")
        scale = max(np.abs(B).max(), 1e-300)
        if not np.allclose(B, B.T, atol=1e-12 * scale):
            raise ValueError("B must be symmetric")
        B = 0.5 * (B + B.T)
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        lin = tuple(sorted(int(a) for a in self.linear_axes))
        if any(a < 0 or a >= B.shape[0] for a in lin):
            raise ValueError("linear axis index out of range")
        if len(set(lin)) != len(lin):
            raise ValueError("duplicate linear axes")
        object.__setattr__(self, "linear_axes", lin)
        if lin:
            idx = np.array(lin)
            if np.abs(B[idx, :]).max() > 1e-12 * scale:
                raise ValueError("declared linear axes must decouple from B")
        eigs = np.linalg.eigvalsh(B)
        eigs.setflags(write=False)
        object.__setattr__(self, "_eigs", eigs)

    @property
    def ndim(self) -> int:
        return self.B.shape[0]

    @property
    def quadric_axes(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.ndim) if i not in self.linear_axes)

    @property
    def B_core(self) -> np.ndarray:
        """B restricted to the non-linear coordinates."""
        idx = np.array(self.quadric_axes)
        return self.B[np.ix_(idx, idx)]

    @property
    def signature(self) -> tuple[int, int, int]:
        """(n_plus, n_minus, n_zero) counted with a relative zero threshold."""
        tol = ZERO_EIG_RTOL * max(np.abs(self._eigs).max(), 0.0)
        n_plus = int(np.sum(self._eigs > tol))
        n_minus = int(np.sum(self._eigs < -tol))
        return n_plus, n_minus, self.ndim - n_plus - n_minus

    @property
    def core_determinant(self) -> float:
        """Determinant of the non-degenerate block."""
        core = self.B_core
        if core.size == 0:
            return 1.0
        return float(np.linalg.det(core))

    def require_nondegenerate(self):
        n_plus, n_minus, n_zero = self.signature
        if n_zero > 0:
            raise ValueError(
                "B is degenerate; declare linear_axes and use the hybrid family")


def classify_quadric(form: QuadricForm) -> QuadricClass:
    """Signature-based class: definite-positive, indefinite, or degenerate."""
    n_plus, n_minus, n_zero = form.signature
    if n_zero > 0:
        return QuadricClass.HYBRID
    if n_minus == 0:
        return QuadricClass.ELLIPTIC
    if n_plus > 0:
        return QuadricClass.HYPERBOLIC
    raise ValueError("negative-definite B: negate B (and the X axis) instead")


# ---------------------------------------------------------------------------
# level families
# ---------------------------------------------------------------------------


class LevelFamily:
    """Parameterized family of codimension-one level sets g(q; params) = X."""

    tag: str
    ndim: int            # dimension of the q space
    param_dim: int       # dimension of the parameter vector
    linear_in_params: bool

    def level_values(self, points: np.ndarray, params: np.ndarray) -> np.ndarray:
        """g at each point for a single parameter vector; no singular checks."""
        return self.level_matrix(points, np.atleast_2d(params))[:, 0]

    def level_matrix(self, points: np.ndarray, params: np.ndarray) -> np.ndarray:
        """g for a block of parameter vectors, shape (n_points, n_params)."""
        raise NotImplementedError

    def level_evaluator(self, points: np.ndarray):
        """Closure mapping parameter blocks to level matrices, with the
        point-dependent work hoisted out of the per-block loop."""
        points = np.asarray(points, dtype=float)
        return lambda pblock: self.level_matrix(points, pblock)

    def jacobian_weights(self, points: np.ndarray) -> np.ndarray:
        return np.ones(len(points))

    def singular_mask(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(len(points), dtype=bool)

    def singular_distance(self, points: np.ndarray) -> np.ndarray:
        return np.full(len(points), np.inf)

    def _check(self, points: np.ndarray, params: np.ndarray):
        if points.shape[1] != self.ndim:
            raise DimensionMismatchError(
                f"points are {points.shape[1]}-d, family wants {self.ndim}-d")
        if params.shape[1] != self.param_dim:
            raise DimensionMismatchError(
                f"params are {params.shape[1]}-d, family wants {self.param_dim}-d")


@dataclass(frozen=True)
class Hyperplane(LevelFamily):
    """g(q; mu) = mu . q"""

    ndim: int
    tag: str = "hyperplane"
    linear_in_params: bool = True

    @property
    def param_dim(self) -> int:
        return self.ndim

    def level_matrix(self, points, params):
        points = np.asarray(points, dtype=float)
        params = np.asarray(params, dtype=float)
        self._check(points, params)
        return points @ params.T


@dataclass(frozen=True)
class Deformed(LevelFamily):
    """g(q; mu) = mu . phi(q) for a fixed diffeomorphism phi."""

    diffeo: Diffeomorphism
    tag: str = "deformed"
    linear_in_params: bool = True

    @property
    def ndim(self) -> int:
        return self.diffeo.ndim

    @property
    def param_dim(self) -> int:
        return self.diffeo.ndim

    def level_matrix(self, points, params):
        points = np.asarray(points, dtype=float)
        params = np.asarray(params, dtype=float)
        self._check(points, params)
        return self.diffeo.map_fn(points) @ params.T

    def level_evaluator(self, points):
        mapped = self.diffeo.map_fn(np.asarray(points, dtype=float))
        return lambda pblock: mapped @ pblock.T

    def mapped_points(self, points: np.ndarray) -> np.ndarray:
        return self.diffeo.map_fn(np.asarray(points, dtype=float))

    def jacobian_weights(self, points):
        return self.diffeo.jacobian_fn(np.asarray(points, dtype=float))

    def singular_mask(self, points):
        return self.diffeo.singular_fn(np.asarray(points, dtype=float))

    def singular_distance(self, points):
        return self.diffeo.singular_distance_fn(np.asarray(points, dtype=float))


def circle_family() -> Deformed:
    return Deformed(conformal_inversion(), tag="circle")


def hyperbola_family() -> Deformed:
    return Deformed(axis_inversion(), tag="hyperbola")


def hyperboloid_family(n: int) -> Deformed:
    return Deformed(hyperboloid_map(n), tag="hyperboloid")


@dataclass(frozen=True)
class Quadric(LevelFamily):
    """g(q; mu) = (q - mu, B (q - mu)) for a fixed non-degenerate B."""

    form: QuadricForm
    tag: str = "quadric"
    linear_in_params: bool = False

    def __post_init__(self):
        self.form.require_nondegenerate()

    @property
    def ndim(self) -> int:
        return self.form.ndim

    @property
    def param_dim(self) -> int:
        return self.form.ndim

    def level_matrix(self, points, params):
        points = np.asarray(points, dtype=float)
        params = np.asarray(params, dtype=float)
        self._check(points, params)
        B = self.form.B
        # (q-m, B(q-m)) = qBq - 2 qBm + mBm, BLAS-friendly over blocks
        qB = points @ B
        qBq = np.sum(qB * points, axis=1)
        mBm = np.sum((params @ B) * params, axis=1)
        return qBq[:, None] - 2.0 * (qB @ params.T) + mBm[None, :]

    def level_evaluator(self, points):
        points = np.asarray(points, dtype=float)
        B = self.form.B
        qB = points @ B
        qBq = np.sum(qB * points, axis=1)[:, None]
        neg2qB = -2.0 * qB

        def evaluate(pblock):
            mBm = np.sum((pblock @ B) * pblock, axis=1)
            g = neg2qB @ pblock.T
            g += qBq
            g += mBm[None, :]
            return g

        return evaluate


@dataclass(frozen=True)
class Hybrid(LevelFamily):
    """Degenerate-B transform: quadric in the core coordinates, linear in the
    declared axes.  g(q; mu) = (q' - mu', B2 (q' - mu')) + mu_lin . q_lin."""

    form: QuadricForm
    tag: str = "hybrid"
    linear_in_params: bool = False

    def __post_init__(self):
        if not self.form.linear_axes:
            raise ValueError("hybrid family requires a declared linear_axes split")
        core = QuadricForm(self.form.B_core)
        core.require_nondegenerate()

    @property
    def ndim(self) -> int:
        return self.form.ndim

    @property
    def param_dim(self) -> int:
        return self.form.ndim

    def level_matrix(self, points, params):
        points = np.asarray(points, dtype=float)
        params = np.asarray(params, dtype=float)
        self._check(points, params)
        return self.level_evaluator(points)(params)

    def level_evaluator(self, points):
        points = np.asarray(points, dtype=float)
        qa = np.array(self.form.quadric_axes)
        la = np.array(self.form.linear_axes)
        B2 = self.form.B_core
        qc, ql = points[:, qa], points[:, la]
        qB = qc @ B2
        qBq = np.sum(qB * qc, axis=1)[:, None]
        # single matmul for both the cross term and the linear part
        lhs = np.concatenate([-2.0 * qB, ql], axis=1)

        def evaluate(pblock):
            mc, ml = pblock[:, qa], pblock[:, la]
            mBm = np.sum((mc @ B2) * mc, axis=1)
            g = lhs @ np.concatenate([mc, ml], axis=1).T
            g += qBq
            g += mBm[None, :]
            return g

        return evaluate


# ---------------------------------------------------------------------------
# scalar entry points
# ---------------------------------------------------------------------------


def level_value(family: LevelFamily, q, params) -> float:
    """g(q; params) for a single point; rejects singular points."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if family.singular_mask(q)[0]:
        raise SingularPointError(f"point {q[0]} is singular for {family.tag}")
    return float(family.level_values(q, np.asarray(params, dtype=float))[0])


def jacobian_weight(family: LevelFamily, q) -> float:
    """Jacobian weight at one point: the deformation determinant for deformed
    families, exactly 1 otherwise (quadric prefactors live in the inverters)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if family.singular_mask(q)[0]:
        raise SingularPointError(f"point {q[0]} is singular for {family.tag}")
    return float(family.jacobian_weights(q)[0])


def is_singular(family: LevelFamily, q) -> bool:
    q = np.atleast_2d(np.asarray(q, dtype=float))
    return bool(family.singular_mask(q)[0])


# ---------------------------------------------------------------------------
# descriptive helpers for the plane families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleDescriptor:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class LineDescriptor:
    """Line through the origin with the given normal vector."""

    normal: tuple[float, float]


def circle_descriptor(X: float, mu: float, nu: float):
    """Geometry of the level set X (q^2+p^2) - mu q - nu p = 0.

    For X != 0 this is the circle through the origin centered at
    (mu, nu) / (2X); for X = 0 it degenerates into the line through the
    origin with normal (mu, nu).
    """
    if mu == 0.0 and nu == 0.0:
        raise ValueError("(mu, nu) must not both vanish")
    if X == 0.0:
        return LineDescriptor(normal=(float(mu), float(nu)))
    cx, cy = mu / (2.0 * X), nu / (2.0 * X)
    return CircleDescriptor(center=(cx, cy), radius=math.hypot(cx, cy))


class QuadrantClass(Enum):
    # quadrants of the frame centered on the asymptote crossing (q, p - X/nu)
    SECOND_FOURTH = "second_fourth"
    FIRST_THIRD = "first_third"


@dataclass(frozen=True)
class HyperbolaDescriptor:
    """Level set X - mu/q - nu p = 0 with asymptotes q = 0 and p = X/nu.

    In the asymptote-centered frame (q, p') with p' = p - X/nu the branches
    satisfy q p' = -mu/nu, so they occupy the second and fourth quadrants
    when mu and nu share a sign and the first and third otherwise.
    """

    asymptote_p: float
    quadrant_class: QuadrantClass


@dataclass(frozen=True)
class HorizontalLine:
    p: float


@dataclass(frozen=True)
class VerticalLine:
    q: float


def hyperbola_descriptor(X: float, mu: float, nu: float):
    """Geometry of the level set X - mu/q - nu p = 0 (degenerate cases
    collapse to horizontal or vertical lines)."""
    if mu == 0.0 and nu == 0.0:
        if X == 0.0:
            raise ValueError("mu = nu = X = 0: every point solves the equation")
        raise ValueError("mu = nu = 0 with X != 0: empty level set")
    if mu == 0.0:
        return HorizontalLine(p=X / nu)
    if nu == 0.0:
        if X == 0.0:
            raise ValueError("nu = 0 and X = 0: empty level set (mu/q never 0)")
        return VerticalLine(q=mu / X)
    qc = (QuadrantClass.SECOND_FOURTH if mu * nu > 0
          else QuadrantClass.FIRST_THIRD)
    return HyperbolaDescriptor(asymptote_p=X / nu, quadrant_class=qc)
