"""Pathwise mild integration of the linear and semilinear problems.

The linear noise update on one grid step is

    h_{k+1} = S_k h_k + sigma S_k dw_k - sigma * (corrector over the step),

where the corrector is the trapezoid (at path resolution, with vanishing
right endpoint) of U(t_{k+1}, s) A(s) (w_{t_{k+1}} - w_s).  The semilinear
integrator adds the explicitly treated nonlinearity under the propagator
(exponential-Euler splitting); stiffness lives entirely in the propagator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import AlignmentError, ConfigurationError, NumericalError, OrderingError
from .evolution import PropagatorChain, TimeGrid, build_chain
from .noise import WienerPath
from .operators import DiffusionField, FractionalNormSpec, fractional_norm


class NonlinearityKind(Enum):
    ZERO = "zero"
    CUBIC_FISHER = "cubic_fisher"
    PURE_CUBIC = "pure_cubic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class NonlinearitySpec:
    """Scalar drift nonlinearity with its dissipativity constants.

    CubicFisher F(u) = u - u^3 satisfies F(u)u <= -0.5|u|^4 + 0.5 (Young),
    PureCubic F(u) = -u^3 satisfies it with C0 = 1, C1 = 0.
    """

    kind: NonlinearityKind
    rho: float = 3.0
    C0: float = 0.5
    C1: float = 0.5
    CF: float = 3.0
    fn: Callable | None = None

    @classmethod
    def zero(cls) -> "NonlinearitySpec":
        return cls(NonlinearityKind.ZERO, rho=1.0, C0=0.0, C1=0.0, CF=0.0)

    @classmethod
    def cubic_fisher(cls) -> "NonlinearitySpec":
        return cls(NonlinearityKind.CUBIC_FISHER, rho=3.0, C0=0.5, C1=0.5, CF=3.0)

    @classmethod
    def pure_cubic(cls) -> "NonlinearitySpec":
        return cls(NonlinearityKind.PURE_CUBIC, rho=3.0, C0=1.0, C1=0.0, CF=3.0)

    @classmethod
    def custom(cls, fn: Callable, rho: float = 3.0) -> "NonlinearitySpec":
        """Arbitrary scalar drift; used by probes (no dissipativity implied)."""
        return cls(NonlinearityKind.CUSTOM, rho=rho, C0=0.0, C1=0.0, CF=0.0, fn=fn)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.kind is NonlinearityKind.ZERO:
            return np.zeros_like(u)
        if self.kind is NonlinearityKind.CUBIC_FISHER:
            return u - u ** 3
        if self.kind is NonlinearityKind.PURE_CUBIC:
            return -(u ** 3)
        return self.fn(u)


@lru_cache(maxsize=16)
def _sine_quadrature(m: int, n_sub: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform interior nodes and basis values for de-aliased projection.

    Trapezoid on n_sub subintervals of [0,1]; sine expansions vanish at the
    boundary, so only interior nodes carry weight 1/n_sub.  Exact for
    trigonometric-polynomial integrands of sine degree < 2*n_sub.
    """
    nodes = np.arange(1, n_sub) / n_sub
    n = np.arange(1, m + 1)
    basis = math.sqrt(2.0) * np.sin(np.outer(nodes, n) * np.pi)
    return nodes, basis


def dealias_node_count(m: int, rho: float) -> int:
    return int(math.ceil(4 * rho * m))


@dataclass(frozen=True)
class SemilinearProblem:
    """du = [A(theta_t w) u + F(u) + f] dt + sigma dW on (0,1), Dirichlet."""

    field: DiffusionField
    nonlinearity: NonlinearitySpec
    forcing: np.ndarray | None
    sigma: float
    u0: np.ndarray
    blowup_threshold: float = 1e6
    norm_spec: FractionalNormSpec = field(default_factory=FractionalNormSpec)

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ConfigurationError("sigma must be nonnegative")
        if not self.blowup_threshold > 0:
            raise ConfigurationError("blowup_threshold must be positive")
        if not np.all(np.isfinite(self.u0)):
            raise ConfigurationError("u0 must be finite")
        if self.forcing is not None and not np.all(np.isfinite(self.forcing)):
            raise ConfigurationError("forcing must be finite")


@dataclass(eq=False)
class Trajectory:
    """States on a uniform grid plus a completion / blow-up status."""

    grid: TimeGrid
    states: np.ndarray  # (recorded_steps + 1, m)
    status: str = "completed"  # "completed" | "blowup"
    blowup_time: float | None = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.t0 + np.arange(self.states.shape[0]) * self.grid.dt

    def state_at(self, t: float) -> np.ndarray:
        k = self.grid.index(t)
        if k >= self.states.shape[0]:
            raise AlignmentError(f"t={t!r} is past the recorded states")
        return self.states[k]

    def l2_norms(self) -> np.ndarray:
        return np.sqrt(np.einsum("ij,ij->i", self.states, self.states))

    def fractional_norms(self, spec: FractionalNormSpec) -> np.ndarray:
        return np.array([fractional_norm(s, spec) for s in self.states])


def nemytskii(
    nonlinearity: NonlinearitySpec, vec: np.ndarray, n_sub: int | None = None
) -> np.ndarray:
    """Evaluate F pointwise on the de-aliased grid and project back.

    With n_sub >= 4*rho*m nodes the projection of a polynomial F of a
    band-limited input is exact up to rounding (no aliasing below 2*n_sub).
    """
    vec = np.asarray(vec, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise NumericalError("non-finite coefficients passed to the nonlinearity")
    if nonlinearity.kind is NonlinearityKind.ZERO:
        return np.zeros_like(vec)
    m = vec.shape[-1]
    if n_sub is None:
        n_sub = dealias_node_count(m, nonlinearity.rho)
    _, basis = _sine_quadrature(m, n_sub)
    point_values = basis @ vec
    image = nonlinearity(point_values)
    return (image @ basis) / n_sub


def corrector_integral(
    chain: PropagatorChain, path: WienerPath, t_a: float, t_b: float
) -> np.ndarray:
    """Trapezoid of U(t_b, s) A(s) (w_{t_b} - w_s) over path grid points in [t_a, t_b].

    The s = t_b endpoint integrand is zero (the increment vanishes), so the
    quadrature is proper at fixed Galerkin dimension.
    """
    ka, kb = chain.grid.index(t_a), chain.grid.index(t_b)
    if kb < ka:
        raise OrderingError("corrector needs t_b >= t_a")
    m = chain.dim
    acc = np.zeros(m)
    if kb == ka:
        return acc
    k_path0 = path.index_of(chain.grid.t0)
    kb_path = path.index_of(t_b)
    dt = chain.grid.dt
    for j in range(ka, kb):
        weight = dt / 2.0 if j == ka else dt
        increment = _embedded(path.difference(k_path0 + j, kb_path), m)
        contribution = weight * (chain.node_operator(j).matrix @ increment)
        acc = chain.steps[j] @ (acc + contribution)
    return acc


def _embedded(values: np.ndarray, m: int) -> np.ndarray:
    """Embed noise-mode coefficients into the first coordinates of R^m."""
    mw = values.shape[-1]
    if mw > m:
        raise ConfigurationError("noise mode count exceeds Galerkin dimension")
    if mw == m:
        return values
    out = np.zeros(m)
    out[:mw] = values
    return out


def linear_pathwise_step(
    chain: PropagatorChain,
    path: WienerPath,
    t_k: float,
    t_k1: float,
    h_k: np.ndarray,
    sigma: float,
) -> np.ndarray:
    """One local update of the linear pathwise mild solution."""
    k = chain.grid.index(t_k)
    if chain.grid.index(t_k1) != k + 1:
        raise AlignmentError("linear step needs consecutive grid times")
    h_k = np.asarray(h_k, dtype=float)
    if sigma == 0.0:
        return chain.steps[k] @ h_k
    kp = path.index_of(t_k)
    increment = _embedded(path.increment(kp), chain.dim)
    dt = chain.grid.dt
    noise = sigma * (increment - (dt / 2.0) * (chain.node_operator(k).matrix @ increment))
    return chain.steps[k] @ (h_k + noise)


def integrate_semilinear(
    problem: SemilinearProblem,
    chain: PropagatorChain,
    path: WienerPath | None = None,
) -> Trajectory:
    """March the pathwise mild update over the chain grid with blow-up checks."""
    if path is None:
        path = chain.path
    grid = chain.grid
    m = chain.dim
    u = np.asarray(problem.u0, dtype=float)
    if u.shape != (m,):
        raise ConfigurationError("u0 length must equal the Galerkin dimension")
    f = problem.forcing
    if f is not None and f.shape != (m,):
        raise ConfigurationError("forcing length must equal the Galerkin dimension")
    nl = problem.nonlinearity
    sigma = problem.sigma
    dt = grid.dt
    if sigma != 0.0 and path is None:
        raise ConfigurationError("a path is required when sigma > 0")
    k_path0 = path.index_of(grid.t0) if (path is not None and sigma != 0.0) else 0

    states = np.empty((grid.n_steps + 1, m))
    states[0] = u
    weights_alpha = None
    for k in range(grid.n_steps):
        stage = u
        if nl.kind is not NonlinearityKind.ZERO:
            stage = stage + dt * nemytskii(nl, u)
        if f is not None:
            stage = stage + dt * f
        if sigma != 0.0:
            increment = _embedded(path.increment(k_path0 + k), m)
            stage = stage + sigma * (
                increment - (dt / 2.0) * (chain.node_operator(k).matrix @ increment)
            )
        u = chain.steps[k] @ stage
        if not np.all(np.isfinite(u)):
            raise NumericalError("non-finite state during integration")
        states[k + 1] = u
        norm = fractional_norm(u, problem.norm_spec)
        if norm > problem.blowup_threshold:
            return Trajectory(
                grid,
                states[: k + 2].copy(),
                status="blowup",
                blowup_time=grid.t0 + (k + 1) * dt,
            )
    return Trajectory(grid, states)


def autonomous_reference(
    problem: SemilinearProblem,
    fine_path: WienerPath,
    coarse_grid: TimeGrid,
    refine: int,
    m: int,
) -> Trajectory:
    """Strong-error reference: integrate on the ``refine``-times finer grid
    (the fine path restricts to the coarse one) and restrict states back.
    """
    if refine < 1 or (refine & (refine - 1)):
        raise ConfigurationError("refine must be a power of two >= 1")
    if refine == 1:
        chain = build_chain(problem.field, fine_path, coarse_grid, m)
        return integrate_semilinear(problem, chain, fine_path)
    fine_dt = coarse_grid.dt / refine
    if abs(fine_path.dt - fine_dt) > 1e-12 * fine_dt:
        raise AlignmentError("fine path resolution must match coarse_dt / refine")
    fine_grid = TimeGrid(coarse_grid.t0, coarse_grid.n_steps * refine, fine_dt)
    chain = build_chain(problem.field, fine_path, fine_grid, m)
    fine = integrate_semilinear(problem, chain, fine_path)
    states = fine.states[::refine].copy()
    status, b_time = fine.status, fine.blowup_time
    if status == "blowup":
        keep = int(math.floor((fine.states.shape[0] - 1) / refine)) + 1
        states = fine.states[::refine][:keep].copy()
    return Trajectory(coarse_grid, states, status=status, blowup_time=b_time)


def strong_error(a: Trajectory, b: Trajectory) -> float:
    """Root-mean-square over shared grid times of the L2 state difference."""
    n = min(a.states.shape[0], b.states.shape[0])
    diff = a.states[:n] - b.states[:n]
    return float(np.sqrt(np.mean(np.einsum("ij,ij->i", diff, diff))))


def observed_order(dts: list[float], errors: list[float]) -> float:
    """Least-squares slope of log2(error) against log2(dt)."""
    x = np.log2(np.asarray(dts, dtype=float))
    y = np.log2(np.asarray(errors, dtype=float))
    x = x - x.mean()
    return float((x @ (y - y.mean())) / (x @ x))
