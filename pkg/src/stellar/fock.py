"""Truncated Fock-space states, pure-state distances and matrix oracles.

Everything here works on explicit amplitude vectors over the Fock basis.
The matrix oracles (displacement and squeezing built as exponentials of
truncated generators, densely by eigendecomposition or applied to vectors
by a sparse exponential action) are deliberately independent of the stellar-picture
algebra in :mod:`stellar.gaussian`; they exist to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .errors import CutoffTooSmall, ZeroVector

NORM_TOL = 1e-12
PHASE_TOL = 1e-12
UNITARITY_TOL = 1e-8

OperatorKind = Literal["displacement", "squeeze", "creation", "annihilation"]


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FockState:
    """Unit-norm pure state with finite support ``psi_0 .. psi_N``.

    Build instances through :func:`normalize` (or the helpers below) so the
    norm and global-phase conventions hold.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes))

    @property
    def cutoff(self) -> int:
        return self.amplitudes.size - 1

    def padded(self, cutoff: int) -> np.ndarray:
        """Amplitude vector zero-padded (never truncated) to ``cutoff``."""
        out = np.zeros(max(cutoff, self.cutoff) + 1, dtype=complex)
        out[: self.amplitudes.size] = self.amplitudes
        return out

    def mean_photon_number(self) -> float:
        n = np.arange(self.amplitudes.size)
        return float(np.sum(n * np.abs(self.amplitudes) ** 2))

    def __repr__(self) -> str:
        return f"FockState(cutoff={self.cutoff}, amplitudes={np.round(self.amplitudes, 6)!r})"


def canonical_phase(vec: np.ndarray, tol: float = PHASE_TOL) -> np.ndarray:
    """Rotate ``vec`` so its first amplitude above ``tol`` is real positive."""
    idx = np.flatnonzero(np.abs(vec) > tol)
    if idx.size == 0:
        return vec
    first = vec[idx[0]]
    return vec * (abs(first) / first)


def normalize(raw_amplitudes) -> FockState:
    """Normalize ``raw_amplitudes`` and fix the global phase.

    Raises:
        ZeroVector: if every amplitude has magnitude at most 1e-12.
    """
    vec = np.array(raw_amplitudes, dtype=complex).reshape(-1)
    if vec.size == 0 or not np.any(np.abs(vec) > NORM_TOL):
        raise ZeroVector("all amplitudes vanish; cannot normalize")
    vec = vec / np.linalg.norm(vec)
    return FockState(canonical_phase(vec))


def basis_state(n: int, cutoff: int | None = None) -> FockState:
    """The number state ``|n>``, optionally padded to ``cutoff``."""
    if n < 0:
        raise ValueError("photon number must be non-negative")
    vec = np.zeros((n if cutoff is None else max(n, cutoff)) + 1, dtype=complex)
    vec[n] = 1.0
    return FockState(vec)


def coherent_amplitudes(beta: complex, cutoff: int) -> np.ndarray:
    """Closed-form truncated coherent amplitudes ``e^{-|b|^2/2} b^n / sqrt(n!)``."""
    out = np.empty(cutoff + 1, dtype=complex)
    out[0] = math.exp(-abs(beta) ** 2 / 2)
    for n in range(1, cutoff + 1):
        out[n] = out[n - 1] * beta / math.sqrt(n)
    return out


def _pair(a: FockState, b: FockState) -> tuple[np.ndarray, np.ndarray]:
    n = max(a.cutoff, b.cutoff)
    return a.padded(n), b.padded(n)


def overlap(a: FockState, b: FockState) -> complex:
    """Inner product ``<a|b>`` (cutoffs padded to the larger one)."""
    va, vb = _pair(a, b)
    return complex(np.vdot(va, vb))


def fidelity(a: FockState, b: FockState) -> float:
    """Pure-state fidelity ``|<a|b>|^2``, clipped to [0, 1]."""
    return float(min(1.0, abs(overlap(a, b)) ** 2))


def trace_distance(a: FockState, b: FockState) -> float:
    """Pure-state trace distance ``sqrt(1 - |<a|b>|^2)``.

    Evaluated as the norm of the component of ``b`` orthogonal to ``a``,
    which avoids the cancellation in ``1 - F`` for nearby states.
    """
    va, vb = _pair(a, b)
    perp = vb - np.vdot(va, vb) * va
    return float(min(1.0, np.linalg.norm(perp)))


def cutoff_distance(state: FockState, m: int) -> float:
    """Trace distance between ``state`` and its normalized truncation at ``m``.

    For a normalized state this equals the norm of the discarded tail
    ``sqrt(sum_{n > m} |psi_n|^2)``.
    """
    if not 0 <= m <= state.cutoff:
        raise ValueError(f"truncation level {m} outside [0, {state.cutoff}]")
    tail = state.amplitudes[m + 1 :]
    return float(np.sqrt(np.sum(np.abs(tail) ** 2)))


def truncate(state: FockState, m: int) -> FockState:
    """Normalized truncation of ``state`` to levels ``0..m``."""
    return normalize(state.amplitudes[: m + 1])


def top_mass(vec: np.ndarray, levels: int = 5) -> float:
    """Probability mass carried by the highest ``levels`` entries of ``vec``."""
    return float(np.sum(np.abs(vec[-levels:]) ** 2))


# --------------------------------------------------------------------------
# matrix oracle


def creation(cutoff: int) -> np.ndarray:
    """Truncated creation operator on levels ``0..cutoff``."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), -1).astype(complex)


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)


@lru_cache(maxsize=32)
def _generator_eig(kind: str, dim: int) -> tuple[np.ndarray, np.ndarray]:
    # Eigendecomposition of i*A for the real antisymmetric unit generator A;
    # exp(s*A) = V exp(-i s w) V^dagger.
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
    ad = a.T
    if kind == "displacement":
        gen = ad - a
    else:
        gen = 0.5 * (a @ a - ad @ ad)
    w, v = np.linalg.eigh(1j * gen)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def _exp_generator(kind: str, strength: float, dim: int) -> np.ndarray:
    w, v = _generator_eig(kind, dim)
    return (v * np.exp(-1j * strength * w)) @ v.conj().T


def _rotation_diag(phi: float, dim: int) -> np.ndarray:
    return np.exp(1j * phi * np.arange(dim))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense truncated operator on levels ``0..N``."""

    entries: np.ndarray
    kind: str

    @property
    def cutoff(self) -> int:
        return self.entries.shape[0] - 1

    def apply(self, vec) -> np.ndarray:
        v = np.zeros(self.cutoff + 1, dtype=complex)
        src = np.asarray(vec, dtype=complex)
        v[: src.size] = src[: self.cutoff + 1]
        return self.entries @ v


def unitarity_residual(matrix: np.ndarray, interior: int) -> float:
    """Max-norm of ``M^dagger M - I`` restricted to the first ``interior`` levels."""
    block = matrix[:, :interior]
    gram = block.conj().T @ block
    return float(np.max(np.abs(gram - np.eye(interior))))


def _default_margin(cutoff: int) -> int:
    # Images of |k> under strong squeezing spread over ~k e^{2r} levels, so
    # only a thin block of low columns is expected to be exactly isometric at
    # a cutoff sized for the vacuum column.
    return cutoff + 1 - max(1, cutoff // 64)


def oracle_operator(
    kind: OperatorKind,
    parameter: complex = 0.0,
    cutoff: int = 20,
    *,
    margin: int | None = None,
    pad: int | None = None,
) -> OperatorMatrix:
    """Truncated-matrix version of a single-mode operator.

    ``displacement`` builds ``exp(beta a^dag - beta^* a)`` and ``squeeze``
    builds ``exp((xi a^2 - xi^* a^dag^2) / 2)``; both are exponentiated in a
    working space ``pad`` levels larger than ``cutoff`` and then cropped.
    ``creation``/``annihilation`` return the raw ladder matrices.

    Raises:
        CutoffTooSmall: if the cropped matrix restricted to columns
            ``0..cutoff - margin`` deviates from an isometry by more than 1e-8.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    if kind == "creation":
        return OperatorMatrix(creation(cutoff), kind)
    if kind == "annihilation":
        return OperatorMatrix(annihilation(cutoff), kind)
    if kind not in ("displacement", "squeeze"):
        raise ValueError(f"unknown operator kind {kind!r}")

    pad = max(20, cutoff // 2) if pad is None else pad
    dim = cutoff + 1 + pad
    z = complex(parameter)
    mag, ang = abs(z), float(np.angle(z))
    if kind == "displacement":
        # D(|b| e^{i p}) = R(p) D(|b|) R(-p)
        outer = _rotation_diag(ang, dim)
    else:
        # S(r e^{i t}) = R(-t/2) S(r) R(t/2)
        outer = _rotation_diag(-ang / 2, dim)
    core = _exp_generator(kind, mag, dim)
    full = outer[:, None] * core * outer.conj()[None, :]
    entries = np.ascontiguousarray(full[: cutoff + 1, : cutoff + 1])

    margin = _default_margin(cutoff) if margin is None else margin
    interior = max(1, cutoff + 1 - margin)
    residual = unitarity_residual(entries, interior)
    if residual > UNITARITY_TOL:
        raise CutoffTooSmall(
            f"{kind}({z:.4g}) at cutoff {cutoff}: interior unitarity residual {residual:.2e}"
        )
    return OperatorMatrix(entries, kind)


def _sparse_generator(kind: str, z: complex, dim: int) -> sparse.csr_matrix:
    root = np.sqrt(np.arange(1, dim, dtype=float))
    a = sparse.diags(root, 1, shape=(dim, dim), format="csr", dtype=complex)
    ad = a.T.tocsr()
    if kind == "displacement":
        return z * ad - z.conjugate() * a
    return 0.5 * (z * (a @ a) - z.conjugate() * (ad @ ad))


def oracle_apply(
    vec, ops: list[tuple[OperatorKind | str, complex]], cutoff: int, *, leak_tol: float = 1e-9
) -> np.ndarray:
    """Apply ``ops`` right-to-left (last entry acts first) to ``vec``.

    Supported kinds are ``displacement``, ``squeeze`` and ``rotation``
    (``c_n -> e^{i n phi} c_n``). All factors act in one working space of
    dimension ``2 * cutoff + 21`` as exponentials of the truncated sparse
    generators applied to the vector (``scipy.sparse.linalg.expm_multiply``);
    the result is cropped to ``cutoff``.

    Raises:
        CutoffTooSmall: if more than ``leak_tol`` of the norm ends up above ``cutoff``.
    """
    dim = 2 * cutoff + 21
    state = np.zeros(dim, dtype=complex)
    src = np.asarray(vec, dtype=complex)
    state[: src.size] = src
    for kind, param in reversed(ops):
        z = complex(param)
        if kind == "rotation":
            state = _rotation_diag(z.real, dim) * state
        elif kind in ("displacement", "squeeze"):
            if z != 0:
                state = expm_multiply(_sparse_generator(kind, z, dim), state)
        else:
            raise ValueError(f"unknown operator kind {kind!r}")
    leaked = float(np.sum(np.abs(state[cutoff + 1 :]) ** 2))
    if leaked > leak_tol:
        raise CutoffTooSmall(f"oracle state leaks {leaked:.2e} above cutoff {cutoff}")
    return state[: cutoff + 1]


def adaptive_cutoff(beta: complex, r: float, probe=None, *, degree: int = 0, cap: int = 512) -> int:
    """Cutoff heuristic ``max(20, 4(|beta|^2 + sinh^2 r) + 10)`` plus ``degree``.

    If ``probe(N)`` is given it must return the amplitude vector of the target
    state at cutoff ``N``; the cutoff is then doubled until the mass in the top
    five levels drops below 1e-12.
    """
    n = int(max(20, math.ceil(4 * (abs(beta) ** 2 + math.sinh(r) ** 2) + 10))) + degree
    if probe is None:
        return n
    while True:
        if top_mass(np.asarray(probe(n))) < 1e-12:
            return n
        if n >= cap:
            raise CutoffTooSmall(f"target tail still significant at cutoff {cap}")
        n = min(2 * n, cap)
