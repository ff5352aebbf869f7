"""Stellar robustness and smoothed non-Gaussianity of formation.

The distance from a target to the set of states of stellar rank at most
``k`` is ``sqrt(1 - F_k)`` where ``F_k`` is the best fidelity with a state
``S(xi) D(beta) Q(a^dag)|0>``, ``deg Q <= k``. For fixed ``(xi, beta)`` the
optimal ``Q`` is explicit (a projection onto the first ``k + 1`` Fock
levels), leaving a four-parameter optimization solved by multistart
Nelder-Mead. Reported distances are upper bounds, certified by an explicit
witness state.
"""

from __future__ import annotations

import cmath
import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from . import fock
from .analysis import stellar_rank
from .errors import BadArguments, NotConverged, RankZero
from .fock import FockState
from .gaussian import (
    CanonicalState,
    CoreState,
    PForm,
    _power_series,
    _pform_terms,
    fock_amplitudes,
    stellar_triple,
)

DEFAULT_RESTARTS = 32
DEFAULT_TOL = 1e-8
R_MAX = 5.0
BETA_MAX = 6.0
GRID_SHAPE = (17, 17, 17, 16)  # r, Re beta, Im beta, theta


def default_seed() -> int:
    return int(os.environ.get("STELLAR_SEED", "0"))


def gaussian_overlaps(target: FockState, xi: complex, beta: complex, k: int) -> np.ndarray:
    """``<target| S(xi) D(beta) |n>`` for ``n = 0..k``.

    Only the target's support enters, so the values carry no truncation error.
    """
    triple = stellar_triple(xi, beta)
    r, theta = abs(xi), cmath.phase(xi)
    c, s = math.cosh(r), math.sinh(r)
    e = cmath.exp(1j * theta)
    x, y, z = c - s * e * triple.a, s * e, s * e * triple.b - beta.conjugate()
    lognorm = triple.c + 0.25 * math.log1p(-abs(triple.a) ** 2)
    t = target.amplitudes.conj()
    out = np.empty(k + 1, dtype=complex)
    for n in range(k + 1):
        unit = np.zeros(n + 1, dtype=complex)
        unit[n] = 1.0
        pf = PForm.from_scaled(_power_series(unit, x, y, z), triple, lognorm)
        out[n] = t @ _pform_terms(pf, target.cutoff)[0]
    return out


def projection_fidelity(target: FockState, xi: complex, beta: complex, k: int) -> float:
    """Best fidelity between ``target`` and ``S(xi) D(beta) Q(a^dag)|0>`` over ``deg Q <= k``.

    Equals ``sum_{n <= k} |<n| D(beta)^dag S(xi)^dag |target>|^2``.
    """
    if k < 0:
        raise BadArguments("k must be non-negative")
    o = gaussian_overlaps(target, complex(xi), complex(beta), k)
    return float(min(1.0, np.sum(np.abs(o) ** 2)))


@dataclass(frozen=True, eq=False)
class RobustnessResult:
    """Distance from the target to rank ``<= k`` states, with its witness.

    ``value`` is an upper bound on the true distance: the witness
    ``S(xi) D(beta) |witness_core>`` is at exactly that distance from the target.
    """

    value: float
    best_fidelity: float
    witness_gaussian: tuple[complex, complex]
    witness_core: CoreState
    k: int
    restarts_used: int
    converged: bool

    def witness_state(self) -> CanonicalState:
        xi, beta = self.witness_gaussian
        return CanonicalState.from_params(self.witness_core, xi, beta)


def _as_target(target, reduce_to_core: bool) -> tuple[FockState, int]:
    if isinstance(target, CanonicalState):
        if reduce_to_core:
            # trace distance and stellar rank are Gaussian invariant
            target = target.core
        return fock_amplitudes(target), stellar_rank(target)
    if isinstance(target, CoreState):
        return target.as_fock(), target.degree
    if isinstance(target, FockState):
        return target, stellar_rank(target)
    raise TypeError(f"unsupported target type {type(target).__name__}")


def _unpack(x: np.ndarray) -> tuple[complex, complex]:
    r, theta, bre, bim = x
    return complex(r * cmath.exp(1j * theta)), complex(bre, bim)


def _grid_best(target: FockState, k: int) -> tuple[float, np.ndarray]:
    axes = [
        np.linspace(0.0, R_MAX, GRID_SHAPE[0]),
        np.linspace(-BETA_MAX, BETA_MAX, GRID_SHAPE[1]),
        np.linspace(-BETA_MAX, BETA_MAX, GRID_SHAPE[2]),
        np.linspace(0.0, 2 * np.pi, GRID_SHAPE[3], endpoint=False),
    ]
    best, arg = -1.0, None
    for r, bre, bim, theta in itertools.product(*axes):
        x = np.array([r, theta, bre, bim])
        f = projection_fidelity(target, *_unpack(x), k)
        if f > best:
            best, arg = f, x
    return best, arg


def best_lower_rank(
    target: FockState,
    k: int,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    *,
    seed: int | None = None,
    grid: bool = False,
) -> RobustnessResult:
    """Maximize :func:`projection_fidelity` at rank ``k`` from quasi-random starts."""
    if restarts < 1:
        raise BadArguments("at least one restart is required")
    sampler = qmc.Halton(d=4, scramble=True, seed=default_seed() if seed is None else seed)
    unit = sampler.random(restarts)
    starts = qmc.scale(unit, [0.0, 0.0, -BETA_MAX, -BETA_MAX], [R_MAX, 2 * np.pi, BETA_MAX, BETA_MAX])
    # the identity is a natural start: it is optimal for Fock-like targets
    starts = np.vstack([[0.0, 0.0, 0.0, 0.0], starts])
    if grid:
        _, arg = _grid_best(target, k)
        starts = np.vstack([arg, starts])
    bounds = [(0.0, R_MAX), (None, None), (-BETA_MAX, BETA_MAX), (-BETA_MAX, BETA_MAX)]

    def objective(x):
        return -projection_fidelity(target, *_unpack(x), k)

    best = None
    any_converged = False
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": tol, "fatol": tol, "maxfev": 4000})
        any_converged |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    if not any_converged:
        raise NotConverged(f"no restart met tolerance {tol:g}")

    xi, beta = _unpack(best.x)
    theta = math.remainder(cmath.phase(xi), 2 * math.pi) if xi else 0.0
    xi = abs(xi) * cmath.exp(1j * theta) if xi else 0j
    o = gaussian_overlaps(target, xi, beta, k)
    fid = float(min(1.0, np.sum(np.abs(o) ** 2)))
    value = math.sqrt(1.0 - fid)
    core = CoreState(o.conj()) if fid > 0 else CoreState.number(0)
    return RobustnessResult(value, fid, (xi, beta), core, k, len(starts), bool(best.success))


def robustness(
    target,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    *,
    seed: int | None = None,
    grid: bool = False,
    reduce_to_core: bool = False,
) -> RobustnessResult:
    """Stellar robustness upper bound: distance to the states of lower stellar rank.

    Raises:
        RankZero: for a Gaussian target.
        NotConverged: if no local search meets ``tol``.
    """
    state, rank = _as_target(target, reduce_to_core)
    if rank == 0:
        raise RankZero("a Gaussian state has no states of lower stellar rank")
    return best_lower_rank(state, rank - 1, restarts, tol, seed=seed, grid=grid)


def robustness_rank1_closed_form() -> float:
    """Exact robustness of every rank-one state ``S(xi)|1>``: ``sqrt(1 - 3 sqrt3 / (4e))``."""
    return math.sqrt(1.0 - 3.0 * math.sqrt(3.0) / (4.0 * math.e))


def fidelity_threshold(target, **kwargs) -> float:
    """Fidelity with ``target`` above which a state must have rank at least that of ``target``."""
    value = robustness(target, **kwargs).value
    return 1.0 - value**2


@dataclass(frozen=True)
class NGFResult:
    epsilon: float
    rank: int
    distances: tuple[float, ...] = field(default=())


def ngf(
    target,
    epsilon: float,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    *,
    seed: int | None = None,
    reduce_to_core: bool = False,
) -> NGFResult:
    """Smallest stellar rank of a pure state within trace distance ``epsilon``.

    ``distances[k]`` bounds the distance to rank ``<= k`` states from above;
    each level is optimized independently, then a running minimum enforces
    monotonicity (a rank ``<= k`` state also has rank ``<= k + 1``). The
    returned rank is therefore an upper bound.
    """
    if not 0 < epsilon <= 1:
        raise BadArguments("epsilon must lie in (0, 1]")
    state, rank = _as_target(target, reduce_to_core)
    distances: list[float] = []
    for k in range(rank):
        d = best_lower_rank(state, k, restarts, tol, seed=seed).value
        distances.append(min(d, distances[-1]) if distances else d)
    found = next((k for k, d in enumerate(distances) if d <= epsilon), rank)
    return NGFResult(float(epsilon), found, tuple(distances))
