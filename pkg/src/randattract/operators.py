"""The random non-autonomous diffusion coefficient and its Galerkin matrices.

The coefficient is E(x, t, w) = delta + amp * g(x) * tanh(zeta(t, w)), where
zeta is an exponentially weighted functional of the shifted path.  Because the
shift acts on paths by re-indexing, zeta computed at (path, t) is bitwise the
same as zeta computed at (shifted path, 0); the assembled matrices inherit
this exact structural stationarity.

Matrices live in the Dirichlet sine basis phi_n(x) = sqrt(2) sin(n pi x) on
(0, 1); entries are -int E phi_m' phi_n' dx via composite Gauss-Legendre
quadrature (8 points on a 4M-element mesh).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import (
    ConfigurationError,
    DefinitenessError,
    NumericalError,
    ShiftRangeError,
)
from .noise import WienerPath, wiener_shift

PI_SQUARED = math.pi ** 2
_GL_POINTS = 8
_ELEMENTS_PER_MODE = 4


def one_plus_sine(x):
    """Default spatial modulation profile g(x) = 1 + sin(pi x), sup|g| = 2."""
    return 1.0 + np.sin(np.pi * x)


@dataclass(frozen=True)
class DiffusionField:
    """Random uniformly elliptic diffusion coefficient on (0, 1).

    Ellipticity requires amp * profile_sup < delta; the guaranteed floor
    delta - amp * profile_sup is reported as ``ellipticity_floor``.
    """

    delta: float = 0.5
    amp: float = 0.2
    driver_decay: float = 1.0
    driver_horizon: float = 8.0
    profile: object = one_plus_sine
    profile_sup: float = 2.0

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ConfigurationError("field.delta must be positive")
        if self.amp < 0:
            raise ConfigurationError("field.amp must be nonnegative")
        if not (self.driver_decay > 0 and self.driver_horizon > 0):
            raise ConfigurationError("driver decay and horizon must be positive")
        if self.amp * self.profile_sup >= self.delta:
            raise ConfigurationError(
                "uniform ellipticity violated: field.amp*sup|g| must be < field.delta"
            )

    @property
    def ellipticity_floor(self) -> float:
        return self.delta - self.amp * self.profile_sup

    @property
    def ellipticity_ceiling(self) -> float:
        return self.delta + self.amp * self.profile_sup

    @property
    def poincare_rate(self) -> float:
        """Guaranteed decay rate floor: ellipticity_floor * pi^2."""
        return self.ellipticity_floor * PI_SQUARED


class FractionalReference(Enum):
    FIXED_LAPLACIAN = "fixed_laplacian"
    INSTANTANEOUS = "instantaneous"


@dataclass(frozen=True)
class FractionalNormSpec:
    """Which operator's fractional powers define the norm."""

    alpha: float = 0.2
    reference: FractionalReference = FractionalReference.FIXED_LAPLACIAN

    def __post_init__(self) -> None:
        if not -0.5 <= self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in [-1/2, 1)")


@dataclass(eq=False)
class GalerkinOperator:
    """Symmetric negative definite Galerkin matrix with cached spectrum."""

    matrix: np.ndarray
    time_tag: float
    _eig: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        mat = self.matrix
        if not np.all(np.isfinite(mat)):
            raise NumericalError("non-finite Galerkin entries")
        scale = float(np.abs(mat).max())
        if float(np.abs(mat - mat.T).max()) > 1e-12 * scale:
            raise NumericalError("assembled operator is not symmetric")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigendecomposition (eigvals ascending, eigvecs) with A = Q L Q^T."""
        if self._eig is None:
            lam, q = np.linalg.eigh(self.matrix)
            scale = float(np.abs(self.matrix).max())
            resid = float(np.abs(self.matrix @ q - q * lam).max())
            if resid > 1e-10 * max(scale, 1e-300):
                raise NumericalError("eigendecomposition residual too large")
            self._eig = (lam, q)
        return self._eig

    @property
    def max_eigenvalue(self) -> float:
        return float(self.eig[0][-1])


def _driver_step_count(field: DiffusionField, dt: float) -> int:
    steps = int(round(field.driver_horizon / dt))
    if abs(field.driver_horizon - steps * dt) > 1e-9 * field.driver_horizon or steps < 1:
        raise ConfigurationError("driver_horizon must be a multiple of dt")
    return steps


@lru_cache(maxsize=32)
def _driver_weights(kappa: float, horizon: float, dt: float) -> np.ndarray:
    """Trapezoid weights for int_{-horizon}^0 exp(kappa*s) f(s) ds on the grid."""
    steps = int(round(horizon / dt))
    s = (np.arange(steps + 1) - steps) * dt
    w = np.full(steps + 1, dt)
    w[0] = w[-1] = dt / 2.0
    return w * np.exp(kappa * s)


def evaluate_driver(path: WienerPath, t: float, field: DiffusionField) -> float:
    """zeta at time t: the trapezoid of exp(kappa*s) * (shifted path mode 1).

    Evaluated literally through the shifted view, so the value at (path, t)
    is bitwise the value at (wiener_shift(path, t), 0).
    """
    shifted = wiener_shift(path, path.index_of(t))
    return _driver_at_origin(shifted, field)


def _driver_at_origin(path: WienerPath, field: DiffusionField) -> float:
    steps = _driver_step_count(field, path.dt)
    o = path.base_origin
    if o - steps < 0:
        raise ShiftRangeError(
            f"driver window needs {steps} backward steps, path has {-path.lo}"
        )
    weights = _driver_weights(field.driver_decay, field.driver_horizon, path.dt)
    segment = path.base[o - steps : o + 1, 0] - path.base[o, 0]
    return float(segment @ weights)


def evaluate_coefficient(field: DiffusionField, x, t: float, path: WienerPath | None):
    """Pointwise E(x, t, w) in [ellipticity_floor, ellipticity_ceiling]."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ConfigurationError("x must lie in [0, 1]")
    if field.amp == 0.0:
        return np.broadcast_to(np.asarray(field.delta), x.shape).copy()
    if path is None:
        raise ConfigurationError("a path is required when amp > 0")
    modulation = math.tanh(evaluate_driver(path, t, field))
    return field.delta + field.amp * field.profile(x) * modulation


@lru_cache(maxsize=16)
def _quadrature_mesh(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights: 8 points per element, 4m elements."""
    ref_x, ref_w = np.polynomial.legendre.leggauss(_GL_POINTS)
    n_el = _ELEMENTS_PER_MODE * m
    h = 1.0 / n_el
    left = np.arange(n_el) * h
    nodes = (left[:, None] + (ref_x[None, :] + 1.0) * (h / 2.0)).ravel()
    weights = np.tile(ref_w * (h / 2.0), n_el)
    return nodes, weights


@lru_cache(maxsize=16)
def _basis_derivative(m: int) -> np.ndarray:
    """phi_n'(x) = sqrt(2) n pi cos(n pi x) at the quadrature nodes; (nq, m)."""
    nodes, _ = _quadrature_mesh(m)
    n = np.arange(1, m + 1)
    return math.sqrt(2.0) * n * np.pi * np.cos(np.outer(nodes, n) * np.pi)


@lru_cache(maxsize=8)
def _stiffness_parts(field: DiffusionField, m: int) -> tuple[np.ndarray, np.ndarray]:
    """K0 = int phi_m' phi_n' dx and Kg = int g phi_m' phi_n' dx, symmetrized."""
    nodes, weights = _quadrature_mesh(m)
    dphi = _basis_derivative(m)
    k0 = dphi.T @ (weights[:, None] * dphi)
    kg = dphi.T @ ((weights * field.profile(nodes))[:, None] * dphi)
    k0 = (k0 + k0.T) / 2.0
    kg = (kg + kg.T) / 2.0
    return k0, kg


def _matrix_from_modulation(field: DiffusionField, m: int, modulation: float) -> np.ndarray:
    k0, kg = _stiffness_parts(field, m)
    if field.amp == 0.0:
        return -field.delta * k0
    return -(field.delta * k0 + (field.amp * modulation) * kg)


def assemble_operator(
    field: DiffusionField, t: float, path: WienerPath | None, m: int
) -> GalerkinOperator:
    """Galerkin matrix (A_h)_{mn} = -int E(x,t,w) phi_m' phi_n' dx at time t."""
    if m < 1:
        raise ConfigurationError("Galerkin dimension must be >= 1")
    if field.amp == 0.0:
        modulation = 0.0
    else:
        if path is None:
            raise ConfigurationError("a path is required when amp > 0")
        modulation = math.tanh(evaluate_driver(path, t, field))
    return GalerkinOperator(_matrix_from_modulation(field, m, modulation), t)


def check_spectral_bound(op: GalerkinOperator, field: DiffusionField) -> float:
    """Largest eigenvalue must stay below -floor*pi^2 (tiny slack for rounding)."""
    bound = -field.poincare_rate * (1.0 - 1e-6)
    top = op.max_eigenvalue
    if top > bound:
        raise DefinitenessError(
            f"spectral bound violated: max eigenvalue {top} > {bound}"
        )
    return top


def fixed_laplacian_symbols(m: int, alpha: float) -> np.ndarray:
    """((n pi)^2)^alpha for n = 1..m (Dirichlet Laplacian reference)."""
    n = np.arange(1, m + 1, dtype=float)
    return (n * np.pi) ** (2.0 * alpha)


def fractional_apply(op_or_dim, alpha: float, vec: np.ndarray) -> np.ndarray:
    """Apply (-A)^alpha.

    ``op_or_dim`` is a GalerkinOperator (instantaneous reference) or an int
    (FixedLaplacian reference of that dimension).  alpha = 1 is allowed here
    (it is plain -A); norm specs stay below 1.
    """
    if not -0.5 <= alpha <= 1.0:
        raise ConfigurationError("alpha must lie in [-1/2, 1]")
    vec = np.asarray(vec, dtype=float)
    if isinstance(op_or_dim, GalerkinOperator):
        lam, q = op_or_dim.eig
        if lam[-1] >= 0.0:
            raise DefinitenessError("operator has a nonnegative eigenvalue")
        if alpha == 0.0:
            return vec.copy()
        return q @ (((-lam) ** alpha) * (q.T @ vec))
    m = int(op_or_dim)
    if vec.shape[-1] != m:
        raise ConfigurationError("vector length does not match dimension")
    if alpha == 0.0:
        return vec.copy()
    return vec * fixed_laplacian_symbols(m, alpha)


def fractional_norm(
    vec: np.ndarray,
    spec: FractionalNormSpec,
    op: GalerkinOperator | None = None,
) -> float:
    """Euclidean norm of the fractional image; alpha = 0 gives the L2 norm."""
    vec = np.asarray(vec, dtype=float)
    if spec.reference is FractionalReference.INSTANTANEOUS:
        if op is None:
            raise ConfigurationError("instantaneous reference needs an operator")
        return float(np.linalg.norm(fractional_apply(op, spec.alpha, vec)))
    return float(np.linalg.norm(fractional_apply(vec.shape[-1], spec.alpha, vec)))


def driver_values(
    field: DiffusionField, path: WienerPath, k_lo: int, k_hi: int
) -> np.ndarray:
    """zeta at every grid index k in [k_lo, k_hi] on the path's fiber.

    Batched counterpart of evaluate_driver: one sliding-window dot per index,
    on the shared base array, so values agree bitwise across shifted fibers.
    """
    steps = _driver_step_count(field, path.dt)
    o = path.base_origin
    if o + k_lo - steps < 0 or o + k_hi >= path.base.shape[0]:
        raise ShiftRangeError(
            "driver windows for the requested index range leave the sampled path"
        )
    weights = _driver_weights(field.driver_decay, field.driver_horizon, path.dt)
    out = np.empty(k_hi - k_lo + 1)
    for i, k in enumerate(range(k_lo, k_hi + 1)):
        segment = path.base[o + k - steps : o + k + 1, 0] - path.base[o + k, 0]
        out[i] = segment @ weights
    return out
