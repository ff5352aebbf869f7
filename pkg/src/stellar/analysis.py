"""Stellar function, Husimi function, rank, zeros and Gaussian convertibility."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import fock
from .errors import BadArguments, RankZero
from .fock import FockState
from .gaussian import (
    DEFAULT_TAIL_TOL,
    RANK_TOL,
    CanonicalState,
    CoreState,
    _sqrt_factorials,
    GaussianTriple,
    GaussianUnitary,
    PForm,
    compose,
    core_vector,
    extract_core,
    fock_amplitudes,
    pform_fock,
    stellar_triple,
    to_p_form,
    trimmed_degree,
)

CLUSTER_TOL = 1e-7
CONVERTIBLE_TOL = 1e-9
TRUNCATION_HINT = 1e-6

__all__ = [
    "RankReport",
    "StellarDecomposition",
    "decompose",
    "extract_core",
    "gaussian_convertible",
    "group_roots",
    "husimi",
    "rank_approximant",
    "rank_report",
    "reconstruct",
    "stellar_eval",
    "stellar_rank",
    "stellar_roots",
    "to_p_form",
]


def as_p_form(state) -> PForm:
    """P-form of any supported state representation."""
    if isinstance(state, PForm):
        return state
    if isinstance(state, CanonicalState):
        return to_p_form(state)
    if isinstance(state, CoreState):
        state = state.as_fock()
    if isinstance(state, FockState):
        return PForm.from_scaled(state.amplitudes, GaussianTriple(0j, 0j, 0j), 0.0)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _poly_eval(poly: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z, dtype=complex)
    for coeff in poly[::-1]:
        out = out * z + coeff
    return out


def stellar_eval(state, alpha):
    """Stellar function ``F(alpha) = e^{|alpha|^2/2} <alpha^*|psi>``.

    Accepts scalars or arrays for ``alpha``. Fock states are summed directly
    as ``sum psi_n alpha^n / sqrt(n!)``.
    """
    z = np.asarray(alpha, dtype=complex)
    if isinstance(state, FockState):
        out = np.zeros_like(z)
        term = np.ones_like(z)
        for n, amp in enumerate(state.amplitudes):
            if n:
                term = term * z / math.sqrt(n)
            out = out + amp * term
    else:
        pf = as_p_form(state)
        a, b = pf.triple.a, pf.triple.b
        out = _poly_eval(pf.poly, z) * np.exp(-0.5 * a * z**2 + b * z + pf.lognorm)
    return out if out.ndim else complex(out)


def husimi(state, alpha):
    """Husimi function ``Q(alpha) = e^{-|alpha|^2} |F(alpha^*)|^2 / pi``."""
    z = np.asarray(alpha, dtype=complex)
    w = z.conj()
    if isinstance(state, FockState):
        # sum psi_n w^n e^{-|w|^2/2} / sqrt(n!) without overflow
        out = np.zeros_like(w)
        term = np.exp(-0.5 * np.abs(w) ** 2).astype(complex)
        for n, amp in enumerate(state.amplitudes):
            if n:
                term = term * w / math.sqrt(n)
            out = out + amp * term
        q = np.abs(out) ** 2 / math.pi
    else:
        pf = as_p_form(state)
        a, b = pf.triple.a, pf.triple.b
        expo = 2 * np.real(-0.5 * a * w**2 + b * w + pf.lognorm) - np.abs(w) ** 2
        q = np.abs(_poly_eval(pf.poly, w)) ** 2 * np.exp(expo) / math.pi
    return q if q.ndim else float(q)


# --------------------------------------------------------------------------
# rank


def stellar_rank(state, rank_tol: float = RANK_TOL) -> int:
    """Number of zeros of the stellar function, counted with multiplicity.

    Fock states report the index of their last amplitude above ``rank_tol``
    (see :func:`rank_report` for the truncation caveat). Canonical states
    report the degree of their stellar polynomial.
    """
    if isinstance(state, FockState):
        return int(np.flatnonzero(np.abs(state.amplitudes) > rank_tol)[-1])
    if isinstance(state, CoreState):
        return state.degree
    return trimmed_degree(as_p_form(state).scaled, rank_tol)


@dataclass(frozen=True)
class RankReport:
    rank: int
    # mass in the five highest levels up to the rank; a genuine finite-rank
    # state keeps weight there, while a truncated infinite-rank state
    # (amplitudes decaying into the cutoff) leaves almost none
    edge_mass: float

    @property
    def likely_truncated(self) -> bool:
        return self.edge_mass < TRUNCATION_HINT


def rank_report(state: FockState, rank_tol: float = RANK_TOL) -> RankReport:
    rank = stellar_rank(state, rank_tol)
    return RankReport(rank, fock.top_mass(state.amplitudes[: rank + 1]))


# --------------------------------------------------------------------------
# zeros


def _cluster(roots: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    # single-linkage merge of roots closer than tol * (|root| + 1)
    remaining = list(roots)
    groups: list[list[complex]] = []
    while remaining:
        group = [remaining.pop()]
        grew = True
        while grew:
            grew = False
            for z in list(remaining):
                if any(abs(z - w) <= tol * (abs(w) + 1) for w in group):
                    group.append(z)
                    remaining.remove(z)
                    grew = True
        groups.append(group)
    return [(complex(np.mean(grp)), len(grp)) for grp in groups]


def _sort_key(z: complex) -> tuple[float, float]:
    return (round(abs(z), 12), cmath.phase(z))


def polynomial_zeros(scaled, cluster_tol: float = CLUSTER_TOL, rank_tol: float = RANK_TOL) -> list[tuple[complex, int]]:
    """Zeros with multiplicities of the polynomial with scaled coefficients ``scaled``.

    ``scaled[n] = p_n sqrt(n!)`` for monomial coefficients ``p_n``. Entries
    below ``rank_tol`` relative to the largest are treated as zero, so zeros
    at the origin are split off exactly; the rest come from the companion
    matrix eigenvalues.
    """
    q = np.asarray(scaled, dtype=complex)
    deg = trimmed_degree(q, rank_tol)
    nz = np.flatnonzero(np.abs(q[: deg + 1]) > rank_tol * np.abs(q).max())
    k0 = int(nz[0])
    out: list[tuple[complex, int]] = [(0j, k0)] if k0 else []
    if deg > k0:
        monomial = q[k0 : deg + 1] / _sqrt_factorials(deg + 1)[k0:]
        out += _cluster(np.polynomial.polynomial.polyroots(monomial), cluster_tol)
    return sorted(out, key=lambda zm: _sort_key(zm[0]))


def stellar_roots(state, cluster_tol: float = CLUSTER_TOL) -> tuple[complex, ...]:
    """Zeros of the Husimi function (conjugates of the stellar zeros), with repetition.

    Raises:
        RankZero: for Gaussian input.
    """
    pf = as_p_form(state)
    if trimmed_degree(pf.scaled) < 1:
        raise RankZero("Gaussian state: the Husimi function has no zeros")
    roots: list[complex] = []
    for z, mult in polynomial_zeros(pf.scaled, cluster_tol):
        roots.extend([z.conjugate()] * mult)
    return tuple(sorted(roots, key=_sort_key))


def group_roots(roots, cluster_tol: float = CLUSTER_TOL) -> list[tuple[complex, int]]:
    """Collapse a root multiset into ``(value, multiplicity)`` pairs."""
    if not roots:
        return []
    groups = _cluster(np.asarray(roots, dtype=complex), cluster_tol)
    return sorted(groups, key=lambda zm: _sort_key(zm[0]))


# --------------------------------------------------------------------------
# decomposition into displaced photon additions


@dataclass(frozen=True, eq=False)
class StellarDecomposition:
    """``psi = (1/N) prod_n [D(beta_n) a^dag D(beta_n)^dag] |G>``."""

    roots: tuple[complex, ...]
    gaussian: GaussianUnitary
    normalization: float

    @property
    def rank(self) -> int:
        return len(self.roots)


def decompose(state: CanonicalState) -> StellarDecomposition:
    """Husimi zeros plus the residual Gaussian state and normalization.

    Roots are ordered by magnitude, then phase. A Gaussian input yields an
    empty root set and the state's own Gaussian.
    """
    pf = as_p_form(state)
    deg = trimmed_degree(pf.scaled)
    xi, beta = pf.triple.params()
    gauss = GaussianUnitary.from_params(xi, beta)
    if deg < 1:
        return StellarDecomposition((), gauss, 1.0)
    roots = stellar_roots(pf)
    lead = pf.poly[deg]
    glog = pf.triple.c + 0.25 * math.log1p(-abs(pf.triple.a) ** 2)
    norm = 1.0 / abs(lead * cmath.exp(pf.lognorm - glog))
    return StellarDecomposition(roots, gauss, norm)


def reconstruct(d: StellarDecomposition, tail_tol: float = DEFAULT_TAIL_TOL) -> FockState:
    """Fock amplitudes of ``prod (a^dag - beta_n^*) |G>`` normalized."""
    xi, beta, _ = d.gaussian.params
    triple = stellar_triple(xi, beta)
    poly = np.polynomial.polynomial.polyfromroots([z.conjugate() for z in d.roots]) if d.roots else np.ones(1)
    glog = triple.c + 0.25 * math.log1p(-abs(triple.a) ** 2)
    pf = PForm(poly, triple, glog - math.log(d.normalization))
    # the exact norm of the finite-rank state, for the tail test
    norm = float(np.linalg.norm(core_vector(pf))) ** 2
    amps, _ = pform_fock(pf, tail_tol, norm=norm)
    return fock.normalize(amps)


def to_canonical(d: StellarDecomposition) -> CanonicalState:
    xi, beta, _ = d.gaussian.params
    triple = stellar_triple(xi, beta)
    poly = np.polynomial.polynomial.polyfromroots([z.conjugate() for z in d.roots]) if d.roots else np.ones(1)
    core = extract_core(PForm(poly, triple, 0.0))
    return CanonicalState.from_params(core, xi, beta)


# --------------------------------------------------------------------------
# Gaussian convertibility


def _best_rotation(ca: np.ndarray, cb: np.ndarray) -> tuple[float, float]:
    """Angle ``phi`` maximizing ``|<ca| R(phi) |cb>|^2`` and that maximum."""
    weights = ca.conj() * cb
    n = np.arange(weights.size)

    def fid(phi):
        return abs(np.sum(weights * np.exp(1j * n * phi))) ** 2

    if fid(0.0) > 1 - 1e-14 or weights.size == 1:
        return 0.0, fid(0.0)
    grid = np.linspace(0, 2 * np.pi, 64 * weights.size, endpoint=False)
    vals = np.abs(np.exp(1j * np.outer(grid, n)) @ weights) ** 2
    i = int(np.argmax(vals))
    step = grid[1] - grid[0]
    res = minimize_scalar(lambda p: -fid(p), bounds=(grid[i] - step, grid[i] + step), method="bounded",
                          options={"xatol": 1e-13})
    phi = float(res.x) if -res.fun >= vals[i] else float(grid[i])
    return math.remainder(phi, 2 * math.pi), fid(phi)


def gaussian_convertible(
    a: CanonicalState, b: CanonicalState, tol: float = CONVERTIBLE_TOL
) -> GaussianUnitary | None:
    """A Gaussian unitary ``G`` with ``a = G b`` (up to phase), or ``None``.

    The states are compared through their core states: equal stellar rank is
    checked first, then the cores are matched up to a phase-space rotation
    ``R(phi)`` (which maps core states to core states). The returned witness
    is verified on the Fock expansions.
    """
    ca, cb = a.canonical(), b.canonical()
    if ca.rank != cb.rank:
        return None
    va, vb = ca.core.coefficients, cb.core.coefficients
    phi, f = _best_rotation(va, vb)
    if f <= 1 - tol:
        return None
    witness = compose(compose(ca.gaussian, GaussianUnitary.rotation(phi)), cb.gaussian.inverse())
    witness = GaussianUnitary(witness.u, witness.v, witness.gamma, 0.0)
    image = CanonicalState(compose(witness, cb.gaussian), cb.core)
    check = fock.fidelity(fock_amplitudes(ca, verify=False), fock_amplitudes(image, verify=False))
    if check <= 1 - max(tol, 1e-10):
        return None
    return witness


# --------------------------------------------------------------------------
# approximating sequences


def rank_approximant(state: CanonicalState, n: int, m: int) -> CanonicalState:
    """Rank-``n`` state ``G (sqrt(1 - 1/m) |C> + m^{-1/2} |n>)`` close to ``state``.

    Its trace distance to ``state`` is exactly ``m^{-1/2}``.

    Raises:
        BadArguments: if ``n`` does not exceed the core degree or ``m < 1``.
    """
    if n <= state.core.degree:
        raise BadArguments(f"target rank {n} must exceed the core degree {state.core.degree}")
    if m < 1:
        raise BadArguments("m must be at least 1")
    vec = np.zeros(n + 1, dtype=complex)
    vec[: state.core.degree + 1] = math.sqrt(1 - 1 / m) * state.core.coefficients
    vec[n] += 1 / math.sqrt(m)
    return CanonicalState(state.gaussian, CoreState(vec))
