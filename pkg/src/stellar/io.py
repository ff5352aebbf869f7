"""JSON state files (format ``stellar-state/1``).

A file holds either raw Fock amplitudes::

    {"format_tag": "stellar-state/1", "fock": [[re, im], ...]}

or a canonical form ``S(r e^{i theta}) D(beta) |core>``::

    {"format_tag": "stellar-state/1", "core": [[re, im], ...],
     "gaussian": {"r": 0.5, "theta": 0.0, "beta": [re, im]}}
"""

from __future__ import annotations

import cmath
import json
import math
from pathlib import Path

import numpy as np

from . import fock
from .errors import StateFileError, StellarError
from .fock import FockState
from .gaussian import CanonicalState, CoreState, GaussianUnitary

FORMAT_TAG = "stellar-state/1"


def complex_pairs(values) -> list[list[float]]:
    return [[float(z.real) + 0.0, float(z.imag) + 0.0] for z in np.asarray(values, dtype=complex)]


def _complex(pair, what: str) -> complex:
    if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
        raise StateFileError(f"{what}: expected a [re, im] pair, got {pair!r}")
    try:
        re, im = float(pair[0]), float(pair[1])
    except (TypeError, ValueError) as exc:
        raise StateFileError(f"{what}: non-numeric entry in {pair!r}") from exc
    if not (math.isfinite(re) and math.isfinite(im)):
        raise StateFileError(f"{what}: non-finite entry in {pair!r}")
    return complex(re, im)


def _vector(entries, what: str) -> np.ndarray:
    if not isinstance(entries, list) or not entries:
        raise StateFileError(f"{what}: expected a non-empty list of [re, im] pairs")
    return np.array([_complex(p, f"{what}[{i}]") for i, p in enumerate(entries)])


def gaussian_dict(g: GaussianUnitary) -> dict:
    """``{r, theta, beta, phi}`` of ``g = S(r e^{i theta}) D(beta) R(phi)``."""
    xi, beta, phi = g.params
    theta = cmath.phase(xi) if xi else 0.0
    return {"r": abs(xi), "theta": theta, "beta": [beta.real, beta.imag], "phi": phi}


def parse_state(data) -> FockState | CanonicalState:
    """Validate a decoded state document and build the state it describes."""
    if not isinstance(data, dict):
        raise StateFileError("state file must contain a JSON object")
    tag = data.get("format_tag")
    if tag != FORMAT_TAG:
        raise StateFileError(f"unsupported format_tag {tag!r} (expected {FORMAT_TAG!r})")
    has_fock, has_core = "fock" in data, "core" in data
    if has_fock == has_core:
        raise StateFileError("exactly one of 'fock' or 'core' must be present")
    try:
        if has_fock:
            return fock.normalize(_vector(data["fock"], "fock"))
        core = CoreState(_vector(data["core"], "core"))
        g = data.get("gaussian", {"r": 0.0, "theta": 0.0, "beta": [0.0, 0.0]})
        if not isinstance(g, dict):
            raise StateFileError("gaussian must be an object with r, theta, beta")
        r = float(g.get("r", 0.0))
        theta = float(g.get("theta", 0.0))
        beta = _complex(g.get("beta", [0.0, 0.0]), "gaussian.beta")
    except StateFileError:
        raise
    except (StellarError, TypeError, ValueError) as exc:
        raise StateFileError(str(exc)) from exc
    if not (math.isfinite(r) and math.isfinite(theta)) or r < 0:
        raise StateFileError("gaussian.r must be finite and non-negative, theta finite")
    return CanonicalState.from_params(core, r * cmath.exp(1j * theta), beta)


def dump_state(state: FockState | CanonicalState | CoreState) -> dict:
    """JSON-ready document for ``state``; canonical states have their rotation folded into the core."""
    if isinstance(state, FockState):
        return {"format_tag": FORMAT_TAG, "fock": complex_pairs(state.amplitudes)}
    if isinstance(state, CoreState):
        state = CanonicalState(GaussianUnitary.identity(), state)
    st = state.canonical()
    g = gaussian_dict(st.gaussian)
    del g["phi"]
    return {"format_tag": FORMAT_TAG, "core": complex_pairs(st.core.coefficients), "gaussian": g}


def load_state(path) -> FockState | CanonicalState:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StateFileError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFileError(f"{path}: invalid JSON ({exc.msg})") from exc
    return parse_state(data)


def save_state(state, path) -> None:
    Path(path).write_text(json.dumps(dump_state(state), indent=2) + "\n")
