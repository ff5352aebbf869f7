"""Single-mode Gaussian unitaries and their action in the stellar picture.

A pure state of finite stellar rank is stored as ``G|C>``: a Gaussian
unitary ``G`` acting on a core state ``C`` (a finite Fock superposition).
Its stellar function factors as

    F(alpha) = P(alpha) * exp(-a alpha^2 / 2 + b alpha + lognorm)

with ``P`` a polynomial of the same degree as ``C``. This module converts
between the two descriptions, applies photon addition and subtraction in
the polynomial picture, and expands states in the Fock basis.

Conventions
-----------
``GaussianUnitary`` stores the Heisenberg action::

    G^dag a G = u a + v a^dag + gamma,     |u|^2 - |v|^2 = 1

so that ``D(beta)`` is ``(1, 0, beta)``, ``S(r e^{it})`` is
``(cosh r, -sinh r e^{-it}, 0)`` and the rotation ``R(phi) = exp(i phi n)``
is ``(e^{i phi}, 0, 0)``. Every unitary factors as ``S(xi) D(beta) R(phi)``
up to a global phase.

Polynomials are handled in the *scaled* basis ``q_n = p_n sqrt(n!)``, where
``p_n`` are the monomial coefficients. In that basis multiplication by
``alpha`` is the creation matrix and ``d/dalpha`` the annihilation matrix,
which keeps the operator algebra well conditioned.
"""

from __future__ import annotations

import cmath
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .errors import AnnihilatedToZero, CutoffTooSmall, OracleMismatch, ZeroVector
from .fock import FockState

RANK_TOL = 1e-12
ISOMETRY_TOL = 1e-12
HARD_CAP = 512
DEFAULT_TAIL_TOL = 1e-13

# Dual-path self-check in fock_amplitudes; the test suite switches it on.
VERIFY_FOCK = os.environ.get("STELLAR_VERIFY", "0") not in ("", "0", "false")


# --------------------------------------------------------------------------
# Gaussian unitaries


@dataclass(frozen=True)
class GaussianUnitary:
    u: complex = 1.0
    v: complex = 0.0
    gamma: complex = 0.0
    # Global phase; accumulated additively under composition, which ignores
    # the metaplectic cocycle. Nothing downstream depends on it.
    phase: float = 0.0

    def __post_init__(self):
        for name in ("u", "v", "gamma"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        residual = abs(abs(self.u) ** 2 - abs(self.v) ** 2 - 1.0)
        if residual > 1e-9 * max(1.0, abs(self.u) ** 2):
            raise ValueError(f"|u|^2 - |v|^2 = 1 violated by {residual:.2e}")

    @classmethod
    def identity(cls) -> GaussianUnitary:
        return cls()

    @classmethod
    def displacement(cls, beta: complex) -> GaussianUnitary:
        return cls(1.0, 0.0, beta)

    @classmethod
    def squeeze(cls, xi: complex) -> GaussianUnitary:
        r, theta = abs(xi), cmath.phase(xi)
        return cls(math.cosh(r), -math.sinh(r) * cmath.exp(-1j * theta), 0.0)

    @classmethod
    def rotation(cls, phi: float) -> GaussianUnitary:
        return cls(cmath.exp(1j * phi), 0.0, 0.0)

    @classmethod
    def from_params(cls, xi: complex = 0.0, beta: complex = 0.0, phi: float = 0.0) -> GaussianUnitary:
        """The unitary ``S(xi) D(beta) R(phi)``."""
        return compose(compose(cls.squeeze(xi), cls.displacement(beta)), cls.rotation(phi))

    def inverse(self) -> GaussianUnitary:
        u, v, g = self.u, self.v, self.gamma
        # inverse of [[u, v], [v*, u*]] with unit determinant
        ui, vi = u.conjugate(), -v
        return GaussianUnitary(ui, vi, -(ui * g + vi * g.conjugate()), -self.phase)

    def __matmul__(self, other: GaussianUnitary) -> GaussianUnitary:
        return compose(self, other)

    @property
    def params(self) -> tuple[complex, complex, float]:
        return canonical_params(self)

    def creation_image(self) -> tuple[complex, complex, complex]:
        """Coefficients ``(x, y, z)`` with ``G a^dag G^dag = x a^dag + y a + z``."""
        inv = self.inverse()
        return inv.u.conjugate(), inv.v.conjugate(), inv.gamma.conjugate()


def compose(outer: GaussianUnitary, inner: GaussianUnitary) -> GaussianUnitary:
    """The unitary ``outer @ inner`` (``inner`` acts first)."""
    u1, v1, g1 = outer.u, outer.v, outer.gamma
    u2, v2, g2 = inner.u, inner.v, inner.gamma
    return GaussianUnitary(
        u1 * u2 + v1 * v2.conjugate(),
        u1 * v2 + v1 * u2.conjugate(),
        u1 * g2 + v1 * g2.conjugate() + g1,
        outer.phase + inner.phase,
    )


def canonical_params(g: GaussianUnitary) -> tuple[complex, complex, float]:
    """Parameters ``(xi, beta, phi)`` with ``g = S(xi) D(beta) R(phi)`` up to phase.

    ``phi`` lies in ``(-pi, pi]``; it is exactly 0 when ``u`` is real positive.
    """
    r = math.acosh(max(1.0, abs(g.u)))
    phi = cmath.phase(g.u)
    if abs(g.v) < 1e-14:
        theta = 0.0
        r = 0.0
    else:
        theta = -cmath.phase(-g.v) - phi
    theta = math.remainder(theta, 2 * math.pi)
    c, s = math.cosh(r), math.sinh(r)
    e = cmath.exp(-1j * theta)
    beta = c * g.gamma + s * e * g.gamma.conjugate()
    xi = r * cmath.exp(1j * theta) if r else 0j
    return complex(xi), complex(beta), float(phi)


def _canonical_sd(g: GaussianUnitary) -> tuple[GaussianUnitary, float]:
    """Split ``g`` into an ``S D`` unitary and the trailing rotation angle."""
    xi, beta, phi = canonical_params(g)
    sd = compose(GaussianUnitary.squeeze(xi), GaussianUnitary.displacement(beta))
    return GaussianUnitary(sd.u, sd.v, sd.gamma, g.phase), phi


# --------------------------------------------------------------------------
# stellar data of Gaussian states


@dataclass(frozen=True)
class GaussianTriple:
    """``(a, b, c)`` of ``S(xi) D(beta)|0>``: F = (1-|a|^2)^{1/4} e^{-a z^2/2 + b z + c}."""

    a: complex
    b: complex
    c: complex

    @property
    def norm_factor(self) -> float:
        return (1.0 - abs(self.a) ** 2) ** 0.25

    def params(self) -> tuple[complex, complex]:
        """Recover ``(xi, beta)`` from ``a`` and ``b``."""
        t = abs(self.a)
        if t >= 1.0:
            raise ValueError("|a| must be < 1 for a finite squeeze")
        r = math.atanh(t)
        xi = r * cmath.exp(-1j * cmath.phase(self.a)) if t > 0 else 0j
        beta = self.b * math.cosh(r)
        return complex(xi), complex(beta)


def stellar_triple(xi: complex, beta: complex) -> GaussianTriple:
    r, theta = abs(xi), cmath.phase(xi)
    a = cmath.exp(-1j * theta) * math.tanh(r)
    b = beta * math.sqrt(1.0 - abs(a) ** 2)
    c = 0.5 * a.conjugate() * beta**2 - 0.5 * abs(beta) ** 2
    return GaussianTriple(complex(a), complex(b), complex(c))


# --------------------------------------------------------------------------
# Hermite polynomials


def hermite(n: int, z: complex) -> complex:
    """Probabilists' Hermite polynomial ``He_n(z)`` by three-term recurrence."""
    if not 0 <= n <= 200:
        raise ValueError("hermite order must lie in [0, 200]")
    prev, cur = 0j, 1.0 + 0j
    for k in range(n):
        prev, cur = cur, z * cur - k * prev
    return cur


def scaled_hermite_coefficients(n_max: int, lam: complex) -> np.ndarray:
    """Monomial coefficients of ``lam^{n/2} He_n(y / sqrt(lam))`` for ``n <= n_max``.

    Row ``n`` holds the polynomial in ``y``; it obeys
    ``H_{n+1} = y H_n - n lam H_{n-1}`` and is regular at ``lam = 0``.
    """
    out = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    out[0, 0] = 1.0
    if n_max >= 1:
        out[1, 1] = 1.0
    for n in range(1, n_max):
        out[n + 1, 1:] = out[n, :-1]
        out[n + 1] -= n * lam * out[n - 1]
    return out


# --------------------------------------------------------------------------
# core and canonical states


@dataclass(frozen=True, eq=False)
class CoreState:
    """Finite Fock superposition; its stellar function is a polynomial."""

    coefficients: np.ndarray

    def __post_init__(self):
        vec = np.array(self.coefficients, dtype=complex).reshape(-1)
        if not np.any(np.abs(vec) > RANK_TOL):
            raise ZeroVector("core state needs a non-zero coefficient")
        vec = vec / np.linalg.norm(vec)
        last = int(np.flatnonzero(np.abs(vec) > RANK_TOL)[-1])
        vec = fock.canonical_phase(vec[: last + 1])
        vec.setflags(write=False)
        object.__setattr__(self, "coefficients", vec)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    @classmethod
    def number(cls, n: int) -> CoreState:
        vec = np.zeros(n + 1, dtype=complex)
        vec[n] = 1.0
        return cls(vec)

    def rotated(self, phi: float) -> CoreState:
        n = np.arange(self.coefficients.size)
        return CoreState(self.coefficients * np.exp(1j * n * phi))

    def as_fock(self) -> FockState:
        return FockState(self.coefficients)

    def __repr__(self) -> str:
        return f"CoreState({np.round(self.coefficients, 6)!r})"


@dataclass(frozen=True, eq=False)
class CanonicalState:
    """The state ``gaussian |core>``."""

    gaussian: GaussianUnitary
    core: CoreState

    @classmethod
    def from_params(cls, core, xi: complex = 0.0, beta: complex = 0.0) -> CanonicalState:
        if not isinstance(core, CoreState):
            core = CoreState(core)
        return cls(GaussianUnitary.from_params(xi, beta), core)

    @classmethod
    def from_fock(cls, state) -> CanonicalState:
        """Finite Fock superposition (a FockState or amplitude sequence) as its own core."""
        amps = state.amplitudes if isinstance(state, FockState) else state
        return cls(GaussianUnitary.identity(), CoreState(amps))

    @property
    def rank(self) -> int:
        return self.core.degree

    def canonical(self) -> CanonicalState:
        """Same state with the rotation folded into the core (``G = S D``)."""
        sd, phi = _canonical_sd(self.gaussian)
        core = self.core.rotated(phi) if phi else self.core
        return CanonicalState(sd, core)

    def params(self) -> tuple[complex, complex]:
        xi, beta, _ = canonical_params(self.gaussian)
        return xi, beta


def apply_gaussian(g: GaussianUnitary, state: CanonicalState) -> CanonicalState:
    return CanonicalState(compose(g, state.gaussian), state.core)


# --------------------------------------------------------------------------
# polynomial form


@dataclass(frozen=True, eq=False)
class PForm:
    """Stellar function ``poly(z) * exp(-a z^2 / 2 + b z + lognorm)``.

    ``poly`` holds monomial coefficients, lowest order first. ``triple.c`` is
    kept for reference; the constant term of the exponent lives in
    ``lognorm`` together with the normalization and any phase.
    """

    poly: np.ndarray
    triple: GaussianTriple
    lognorm: complex = 0.0

    def __post_init__(self):
        poly = np.array(self.poly, dtype=complex).reshape(-1)
        poly.setflags(write=False)
        object.__setattr__(self, "poly", poly)
        object.__setattr__(self, "lognorm", complex(self.lognorm))

    @property
    def scaled(self) -> np.ndarray:
        return self.poly * _sqrt_factorials(self.poly.size)

    @classmethod
    def from_scaled(cls, scaled, triple: GaussianTriple, lognorm: complex) -> PForm:
        scaled = np.asarray(scaled, dtype=complex)
        return cls(scaled / _sqrt_factorials(scaled.size), triple, lognorm)

    @property
    def degree(self) -> int:
        return trimmed_degree(self.scaled)


def _sqrt_factorials(n: int) -> np.ndarray:
    out = np.ones(n)
    for k in range(1, n):
        out[k] = out[k - 1] * math.sqrt(k)
    return out


def trimmed_degree(scaled: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    """Index of the last entry above ``rank_tol`` relative to the largest one."""
    mags = np.abs(scaled)
    top = mags.max(initial=0.0)
    if top == 0.0:
        return -1
    return int(np.flatnonzero(mags > rank_tol * top)[-1])


def _raise(vec: np.ndarray) -> np.ndarray:
    out = np.zeros(vec.size + 1, dtype=complex)
    out[1:] = vec * np.sqrt(np.arange(1, vec.size + 1))
    return out


def _lower(vec: np.ndarray) -> np.ndarray:
    out = np.zeros(vec.size, dtype=complex)
    out[:-1] = vec[1:] * np.sqrt(np.arange(1, vec.size))
    return out


def _power_series(coeffs: np.ndarray, x: complex, y: complex, z: complex) -> np.ndarray:
    """``sum_n coeffs[n] X^n / sqrt(n!) |0>`` with ``X = x a^dag + y a + z``."""
    size = coeffs.size
    w = np.zeros(size, dtype=complex)
    w[0] = 1.0
    acc = coeffs[0] * w
    for n in range(1, size):
        w = (x * _raise(w)[:size] + y * _lower(w) + z * w) / math.sqrt(n)
        acc = acc + coeffs[n] * w
    return acc


def to_p_form(state: CanonicalState) -> PForm:
    """Polynomial form of ``state``.

    With ``state = S(xi) D(beta) |C>`` the polynomial is ``C(X) 1`` where
    ``X = alpha / cosh r + sinh r e^{i theta} d/dalpha + (sinh r e^{i theta} b - beta^*)``
    is the stellar image of the conjugated creation operator.
    """
    st = state.canonical()
    xi, beta = st.params()
    r, theta = abs(xi), cmath.phase(xi)
    triple = stellar_triple(xi, beta)
    c, s = math.cosh(r), math.sinh(r)
    e = cmath.exp(1j * theta)
    # the Gaussian factor turns d/dalpha into d/dalpha - a alpha + b on P
    x = c - s * e * triple.a
    y = s * e
    z = s * e * triple.b - beta.conjugate()
    scaled = _power_series(st.core.coefficients, x, y, z)
    lognorm = triple.c + 0.25 * math.log1p(-abs(triple.a) ** 2) + 1j * st.gaussian.phase
    return PForm.from_scaled(scaled, triple, lognorm)


def _gaussian_lognorm(triple: GaussianTriple) -> complex:
    return triple.c + 0.25 * math.log1p(-abs(triple.a) ** 2)


def core_vector(pform: PForm) -> np.ndarray:
    """Unnormalized core amplitudes ``D^dag S^dag psi`` for the state ``pform``.

    The norm of the returned vector equals the norm of the state that
    ``pform`` describes.
    """
    xi, beta = pform.triple.params()
    r, theta = abs(xi), cmath.phase(xi)
    c, s = math.cosh(r), math.sinh(r)
    e = cmath.exp(1j * theta)
    scaled = pform.scaled
    vec = _power_series(scaled, c, -s * e, c * beta.conjugate() - s * e * beta)
    return vec * cmath.exp(pform.lognorm - _gaussian_lognorm(pform.triple))


def extract_core(pform: PForm) -> CoreState:
    """Unique core state of the form ``S(xi) D(beta) |C>`` for ``pform``.

    ``xi`` and ``beta`` are read off the Gaussian triple; the core polynomial
    is ``P(cosh r alpha - sinh r e^{i theta} d/dalpha + cosh r beta^* - sinh r e^{i theta} beta) 1``.
    """
    return CoreState(core_vector(pform))


def from_p_form(pform: PForm) -> CanonicalState:
    xi, beta = pform.triple.params()
    return CanonicalState.from_params(extract_core(pform), xi, beta)


def squeezed_p_form(core: CoreState, xi: complex) -> PForm:
    """P-form of ``S(xi)|core>`` via the scaled Hermite expansion.

    ``P(alpha) = sum_n c_n / sqrt(n!) lam^{n/2} He_n(alpha / (cosh r sqrt(lam)))``
    with ``lam = -e^{i theta} tanh r``; independent of :func:`to_p_form`.
    """
    r, theta = abs(xi), cmath.phase(xi)
    lam = -cmath.exp(1j * theta) * math.tanh(r)
    table = scaled_hermite_coefficients(core.degree, lam)
    poly_y = (core.coefficients / _sqrt_factorials(core.coefficients.size)) @ table
    poly = poly_y * math.cosh(r) ** -np.arange(poly_y.size)
    triple = stellar_triple(xi, 0.0)
    return PForm(poly, triple, _gaussian_lognorm(triple))


# --------------------------------------------------------------------------
# photon addition / subtraction


def photon_add(state: CanonicalState) -> CanonicalState:
    """Normalized ``a^dag |psi>``: multiplies the stellar polynomial by ``alpha``."""
    pf = to_p_form(state)
    new = PForm(np.concatenate([[0.0], pf.poly]), pf.triple, pf.lognorm)
    return from_p_form(new)


def photon_subtract(state: CanonicalState) -> CanonicalState:
    """Normalized ``a |psi>``: ``P -> P' + (b - a alpha) P``.

    Raises:
        AnnihilatedToZero: if ``<n> = ||a psi||^2`` is at most 1e-12.
    """
    pf = to_p_form(state)
    p = pf.poly
    k = np.arange(1, p.size)
    deriv = np.concatenate([p[1:] * k, [0.0]])
    times = np.concatenate([[0.0], p])
    new_poly = np.concatenate([deriv, [0.0]]) + pf.triple.b * np.concatenate([p, [0.0]]) - pf.triple.a * times
    new = PForm(new_poly, pf.triple, pf.lognorm)
    vec = core_vector(new)
    if float(np.vdot(vec, vec).real) <= 1e-12:
        raise AnnihilatedToZero("annihilation operator maps this state to zero")
    xi, beta = pf.triple.params()
    return CanonicalState.from_params(CoreState(vec), xi, beta)


# --------------------------------------------------------------------------
# Fock expansion


def gaussian_taylor(triple: GaussianTriple, cutoff: int) -> np.ndarray:
    """Scaled Taylor coefficients ``h_n = sqrt(n!) [z^n] exp(-a z^2/2 + b z)``."""
    a, b = triple.a, triple.b
    h = np.empty(cutoff + 1, dtype=complex)
    h[0] = 1.0
    if cutoff >= 1:
        h[1] = b
    for n in range(1, cutoff):
        h[n + 1] = (b * h[n] - a * math.sqrt(n) * h[n - 1]) / math.sqrt(n + 1)
    return h


def _sqrt_binomials(cutoff: int, degree: int) -> np.ndarray:
    m = np.arange(cutoff + 1)[:, None]
    k = np.arange(degree + 1)[None, :]
    valid = k <= m
    from scipy.special import gammaln

    with np.errstate(invalid="ignore"):
        logb = gammaln(m + 1) - gammaln(k + 1) - gammaln(np.where(valid, m - k, 0) + 1)
    return np.where(valid, np.exp(0.5 * logb), 0.0)


def _pform_terms(pform: PForm, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    q = pform.scaled
    deg = q.size - 1
    h = gaussian_taylor(pform.triple, cutoff)
    binom = _sqrt_binomials(cutoff, deg)
    m = np.arange(cutoff + 1)[:, None]
    k = np.arange(deg + 1)[None, :]
    idx = np.clip(m - k, 0, None)
    terms = binom * q[None, :] * h[idx]
    scale = cmath.exp(pform.lognorm)
    return scale * terms.sum(axis=1), abs(scale) * np.abs(terms).sum(axis=1)


def pform_amplitudes(pform: PForm, cutoff: int) -> np.ndarray:
    """Fock amplitudes ``psi_0..psi_cutoff`` of the stellar function ``pform``.

    ``psi_m = e^{lognorm} sum_k sqrt(C(m, k)) q_k h_{m-k}`` with ``q`` the
    scaled polynomial and ``h`` the scaled Gaussian Taylor series.
    """
    return _pform_terms(pform, cutoff)[0]


def effective_displacement(xi: complex, beta: complex) -> complex:
    """``beta'`` with ``S(xi) D(beta) = D(beta') S(xi)``."""
    r, theta = abs(xi), cmath.phase(xi)
    return complex(math.cosh(r) * beta - math.sinh(r) * cmath.exp(1j * theta) * beta.conjugate())


def _initial_cutoff(pform: PForm) -> int:
    xi, beta = pform.triple.params()
    return fock.adaptive_cutoff(effective_displacement(xi, beta), abs(xi), degree=pform.poly.size - 1)


def pform_fock(pform: PForm, tail_tol: float = DEFAULT_TAIL_TOL, *, norm: float = 1.0) -> tuple[np.ndarray, int]:
    """Amplitudes of ``pform`` at the smallest doubling cutoff with tail below ``tail_tol``.

    ``norm`` is the known squared norm of the state. The tail is accepted
    when the mass of the top five levels is below ``tail_tol`` and the norm
    deficit is below ``tail_tol`` up to a bound on the rounding error of the
    cancelling sums. Returns ``(amplitudes, cutoff)``.
    """
    n = min(_initial_cutoff(pform), HARD_CAP)
    while True:
        amps, mags = _pform_terms(pform, n)
        tail = norm - float(np.sum(np.abs(amps) ** 2))
        slack = 8 * np.finfo(float).eps * float(np.sum(mags * (np.abs(amps) + mags)) + n * norm)
        edge = fock.top_mass(amps)
        if tail < tail_tol * norm + slack and edge < tail_tol * norm:
            return amps, n
        if n >= HARD_CAP:
            raise CutoffTooSmall(f"tail mass {tail:.2e} above {tail_tol:.1e} at hard cap {HARD_CAP}")
        n = min(2 * n, HARD_CAP)


def oracle_amplitudes(state: CanonicalState, cutoff: int, *, leak_tol: float = 1e-9) -> np.ndarray:
    """Amplitudes of ``state`` through the truncated-matrix oracle."""
    xi, beta, phi = canonical_params(state.gaussian)
    ops = [("squeeze", xi), ("displacement", beta), ("rotation", phi)]
    return fock.oracle_apply(state.core.coefficients, ops, cutoff, leak_tol=leak_tol)


def fock_amplitudes(
    state: CanonicalState | CoreState | FockState,
    tail_tol: float = DEFAULT_TAIL_TOL,
    *,
    verify: bool | None = None,
) -> FockState:
    """Fock expansion of ``state`` with discarded tail mass below ``tail_tol``.

    With ``verify`` (default: module flag ``VERIFY_FOCK``) the result is
    recomputed through the matrix oracle and the two must agree to fidelity
    ``1 - 1e-10``.

    Raises:
        CutoffTooSmall: if the tail cannot be brought below ``tail_tol`` by
            the hard cap of 512 levels.
        OracleMismatch: if the self-check fails.
    """
    if isinstance(state, FockState):
        return state
    if isinstance(state, CoreState):
        return state.as_fock()
    pf = to_p_form(state)
    amps, n = pform_fock(pf, tail_tol)
    support = np.flatnonzero(amps)
    result = fock.normalize(amps[: support[-1] + 1] if support.size else amps)
    if VERIFY_FOCK if verify is None else verify:
        other = fock.normalize(oracle_amplitudes(state, n))
        f = fock.fidelity(result, other)
        if f < 1 - 1e-10:
            raise OracleMismatch(f"stellar and oracle expansions disagree: fidelity {f:.3e}")
    return result
