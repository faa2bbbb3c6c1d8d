"""The stationary Ornstein-Uhlenbeck-type state and its diagnostics.

The stationary initial state is the truncated history integral

    z0 = int_{-a}^{0} U(0, r, w) A(theta_r w) w_r dr          (trapezoid),

propagated along the shift by the local linear pathwise step with sigma = 1
(O(K) instead of re-evaluating the history integral at every output time).
The neglected tail is controlled by the exponential decay of the evolution
family and reported as ``truncation_bound``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShiftRangeError
from .evolution import (
    DecayFit,
    PropagatorChain,
    TimeGrid,
    apply,
    build_chain,
    field_rate,
    span_grid,
)
from .noise import WienerPath, wiener_shift
from .operators import (
    DiffusionField,
    FractionalNormSpec,
    FractionalReference,
    fixed_laplacian_symbols,
    fractional_norm,
)
from .pathwise import _embedded


@dataclass(frozen=True)
class StationaryState:
    """Truncated stationary state z0 with its a-posteriori tail bound."""

    z0: np.ndarray
    truncation_horizon: float
    truncation_bound: float


@dataclass(eq=False)
class OUTrajectory:
    """Z(theta_t w) on [0, T] with per-state L2 and fractional norms."""

    grid: TimeGrid
    states: np.ndarray
    l2_norms: np.ndarray
    fractional: np.ndarray
    beta: float

    def state_at(self, t: float) -> np.ndarray:
        return self.states[self.grid.index(t)]


def _history_chain(
    field: DiffusionField, path: WienerPath, a: float, m: int
) -> PropagatorChain:
    grid = span_grid(-a, 0.0, path.dt)
    if path.lo * path.dt > -a:
        raise ShiftRangeError(
            f"path must cover [-a, 0] = [{-a}, 0], has t_lo={path.t_lo}"
        )
    return build_chain(field, path, grid, m)


def construct_initial(
    field: DiffusionField,
    path: WienerPath,
    a: float,
    m: int,
    decay: DecayFit | None = None,
) -> StationaryState:
    """Trapezoid of U(0, r) A(r) w_r over [-a, 0], streamed left to right."""
    if not a > 0:
        raise ConfigurationError("truncation horizon a must be positive")
    chain = _history_chain(field, path, a, m)
    grid = chain.grid
    dt = grid.dt
    k0 = path.index_of(-a)
    acc = np.zeros(m)
    for j in range(grid.n_steps + 1):
        weight = dt / 2.0 if j in (0, grid.n_steps) else dt
        w_r = _embedded(path.value_at(k0 + j), m)
        contribution = weight * (chain.node_operator(j, cache=False).matrix @ w_r)
        if j == 0:
            acc = contribution
        else:
            acc = chain.steps[j - 1] @ acc + contribution
    rate = decay.lambda_hat if decay is not None else field_rate(field)
    c_hat = decay.C_hat if decay is not None else 1.0
    tail_norm = _max_norm_on(path, -a, -a / 2.0)
    bound = c_hat * tail_norm * math.exp(-rate * a)
    return StationaryState(acc, a, bound)


def _max_norm_on(path: WienerPath, t_lo: float, t_hi: float) -> float:
    k_lo = path.index_of(t_lo)
    k_hi = int(math.floor(t_hi / path.dt))
    vals = path.base[path.base_origin + k_lo : path.base_origin + k_hi + 1]
    vals = vals - path.base[path.base_origin]
    return float(np.sqrt(np.einsum("ij,ij->i", vals, vals)).max())


def propagate(
    state: StationaryState,
    field: DiffusionField,
    path: WienerPath,
    horizon: float,
    m: int,
    beta: float = 0.2,
    chain: PropagatorChain | None = None,
) -> OUTrajectory:
    """Z(theta_t w) on [0, horizon] via the local linear step with sigma = 1."""
    grid = span_grid(0.0, horizon, path.dt)
    if chain is None:
        chain = build_chain(field, path, grid, m)
    elif chain.grid.t0 != 0.0 or chain.grid.n_steps < grid.n_steps:
        raise ConfigurationError("supplied chain does not cover [0, horizon]")
    states = np.empty((grid.n_steps + 1, m))
    states[0] = state.z0
    z = state.z0
    dt = grid.dt
    k_path0 = path.index_of(0.0)
    for k in range(grid.n_steps):
        # same arithmetic as linear_pathwise_step with sigma = 1
        increment = _embedded(path.increment(k_path0 + k), m)
        a_inc = chain.node_operator(k, cache=False).matrix @ increment
        z = chain.steps[k] @ (z + (increment - (dt / 2.0) * a_inc))
        states[k + 1] = z
    l2 = np.sqrt(np.einsum("ij,ij->i", states, states))
    symbols = fixed_laplacian_symbols(m, beta)
    weighted = states * symbols
    frac = np.sqrt(np.einsum("ij,ij->i", weighted, weighted))
    return OUTrajectory(grid, states, l2, frac, beta)


def global_form_reference(
    state: StationaryState,
    chain: PropagatorChain,
    path: WienerPath,
    t: float,
) -> np.ndarray:
    """Z(t) by the global representation (used as a consistency reference):

        U(t,0) z0 + U(t,0) w_t - int_0^t U(t,r) A(r) (w_t - w_r) dr.
    """
    m = chain.dim
    k_t = path.index_of(t)
    base = apply(chain, t, 0.0, state.z0 + _embedded(path.value_at(k_t), m))
    from .pathwise import corrector_integral

    return base - corrector_integral(chain, path, 0.0, t)


def stationarity_residual(
    field: DiffusionField,
    path: WienerPath,
    t: float,
    s: float,
    a: float,
    m: int,
) -> float:
    """|| Z(t+s, w) - Z(t, theta_s w) ||_{L2} on aligned grids."""
    left_state = construct_initial(field, path, a, m)
    left = propagate(left_state, field, path, t + s, m)
    shifted = wiener_shift(path, path.index_of(s))
    right_state = construct_initial(field, shifted, a, m)
    right = propagate(right_state, field, shifted, t, m)
    diff = left.state_at(t + s) - right.state_at(t)
    return float(np.linalg.norm(diff))


@dataclass(frozen=True)
class StationarityEntry:
    t: float
    s: float
    residual: float
    relative: float  # residual / (1 + ||Z(t+s, w)||)
    truncation_bound: float


def stationarity_residual_table(
    field: DiffusionField,
    path: WienerPath,
    ts: list[float],
    ss: list[float],
    a: float,
    m: int,
) -> list[StationarityEntry]:
    """Residuals for the (t, s) grid, sharing one propagation per fiber."""
    left_state = construct_initial(field, path, a, m)
    horizon = max(t + s for t in ts for s in ss)
    left = propagate(left_state, field, path, horizon, m)
    entries = []
    for s in ss:
        shifted = wiener_shift(path, path.index_of(s))
        right_state = construct_initial(field, shifted, a, m)
        right = propagate(right_state, field, shifted, max(ts), m)
        for t in ts:
            diff = left.state_at(t + s) - right.state_at(t)
            residual = float(np.linalg.norm(diff))
            z_norm = float(np.linalg.norm(left.state_at(t + s)))
            entries.append(
                StationarityEntry(
                    t, s, residual, residual / (1.0 + z_norm),
                    left_state.truncation_bound,
                )
            )
    return entries


@dataclass(frozen=True)
class TemperednessRow:
    t: float
    norm: float
    discounted: tuple[float, ...]
    log_plus_over_t: float


@dataclass(frozen=True)
class TemperednessTable:
    rows: tuple[TemperednessRow, ...]
    gammas: tuple[float, ...]
    slope: float
    beta: float
    note: str = (
        "finite-horizon surrogate of the temperedness limit; "
        "computed on a sampled window only"
    )


def temperedness_diagnostic(
    field: DiffusionField,
    path: WienerPath,
    beta: float,
    gammas: list[float],
    horizon: float,
    a: float,
    m: int,
    n_ladder: int = 12,
    ladder_times: list[float] | None = None,
) -> TemperednessTable:
    """Y(t) = ||Z(theta_{-t} w)||_{X_beta} on a log-spaced ladder up to ``horizon``
    (or on explicit ``ladder_times``).

    Also reports the least-squares slope of ln+ Y against t over the upper
    half of the ladder (temperedness pushes it toward zero).
    """
    if not 0.0 <= beta < 0.5:
        raise ConfigurationError("beta must lie in [0, 1/2)")
    spec = FractionalNormSpec(alpha=beta, reference=FractionalReference.FIXED_LAPLACIAN)
    raw = (
        np.asarray(ladder_times, dtype=float)
        if ladder_times is not None
        else np.geomspace(1.0, horizon, n_ladder)
    )
    ladder = sorted({max(1, int(round(t / path.dt))) for t in raw})
    rows = []
    for k in ladder:
        t = k * path.dt
        fiber = wiener_shift(path, -k)
        z = construct_initial(field, fiber, a, m).z0
        norm = fractional_norm(z, spec)
        discounted = tuple(norm * math.exp(-g * t) for g in gammas)
        log_plus = max(math.log(norm), 0.0) if norm > 0 else 0.0
        rows.append(TemperednessRow(t, norm, discounted, log_plus / t))
    upper = [r for r in rows if r.t >= rows[-1].t / 2.0]
    ts = np.array([r.t for r in upper])
    ys = np.array([max(math.log(r.norm), 0.0) if r.norm > 0 else 0.0 for r in upper])
    if len(upper) >= 2 and np.ptp(ts) > 0:
        tc = ts - ts.mean()
        slope = float((tc @ (ys - ys.mean())) / (tc @ tc))
    else:
        slope = 0.0
    return TemperednessTable(tuple(rows), tuple(gammas), slope, beta)
