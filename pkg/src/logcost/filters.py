"""Adaptive filter update family built around the logarithmic cost.

The logarithmic cost J(e) = F(e) - (1/alpha) * ln(1 + alpha*F(e)) blends a
conventional cost F with its own saturation: for small errors the update
behaves like the steeper stochastic gradient of F, for large errors it
falls back to the F-gradient itself.  Instantiating F = e^2 gives LMLS
(least mean logarithmic square), F = |e| gives LLAD (least logarithmic
absolute difference).  The classical baselines (LMS, NLMS, LMF, sign
algorithm) and two robustness baselines (Huber, arctan-regularized costs)
share the same update skeleton

    w_{t+1} = w_t + mu * gain(e_t) * x_t

so everything is expressed through a scalar gain function of the error.
Normalized variants divide by regressor-dependent factors and are handled
inside step() since their gain is not a function of the error alone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

LMS = "LMS"
NLMS = "NLMS"
LMF = "LMF"
SA = "SA"
LMLS = "LMLS"
LLAD = "LLAD"
NLMLS = "NLMLS"
NLLAD = "NLLAD"
HUBER = "HUBER"
ARCTAN_SQ = "ARCTAN_SQ"
ARCTAN_ABS = "ARCTAN_ABS"

ALL_KINDS = (LMS, NLMS, LMF, SA, LMLS, LLAD, NLMLS, NLLAD, HUBER, ARCTAN_SQ, ARCTAN_ABS)
NORMALIZED_KINDS = (NLMS, NLMLS, NLLAD)
# kinds whose gain is a pure scalar function of the error
SCALAR_GAIN_KINDS = (LMS, LMF, SA, LMLS, LLAD, HUBER, ARCTAN_SQ, ARCTAN_ABS)

DEFAULT_REGRESSOR_EPS = 1e-12


class FilterDivergenceError(RuntimeError):
    """Raised when an update produces non-finite weights."""


class DegenerateRegressorError(ValueError):
    """Raised by normalized kinds when the regressor energy is below eps."""


@dataclass(frozen=True)
class AlgorithmSpec:
    """Which member of the family to run and its shape parameters.

    alpha scales the logarithmic/arctan saturation and is ignored by
    LMS, NLMS, LMF and SA.  huber_gamma is the Huber threshold and is
    only read by HUBER.
    """

    kind: str
    alpha: float = 1.0
    huber_gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown algorithm kind {self.kind!r}; expected one of {ALL_KINDS}")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be finite and > 0, got {self.alpha!r}")
        if not (np.isfinite(self.huber_gamma) and self.huber_gamma > 0):
            raise ValueError(f"huber_gamma must be finite and > 0, got {self.huber_gamma!r}")


@dataclass(frozen=True)
class Sample:
    """One regressor/desired-output pair."""

    regressor: np.ndarray
    desired: float


@dataclass
class FilterState:
    """Filter weights plus the configuration they evolve under."""

    weights: np.ndarray
    step_size: float
    spec: AlgorithmSpec

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1:
            raise ValueError("weights must be one-dimensional")
        if not (np.isfinite(self.step_size) and self.step_size > 0):
            raise ValueError(f"step_size must be finite and > 0, got {self.step_size!r}")


def compute_error(state: FilterState, sample: Sample) -> float:
    """Instantaneous error e = d - w^T x."""
    x = np.asarray(sample.regressor, dtype=float)
    if x.shape != state.weights.shape:
        raise ValueError(
            f"regressor shape {x.shape} does not match weights shape {state.weights.shape}"
        )
    return float(sample.desired - state.weights @ x)


def update_gain(spec: AlgorithmSpec, e):
    """Scalar multiplying mu * x in the weight update, as a function of e.

    Accepts a scalar or an ndarray of errors.  The constant from
    differentiating the inner cost (the 2 of e^2, the 4 of e^4) is
    absorbed into the step size, following the usual convention.
    Normalized kinds have no error-only gain and are rejected.
    """
    e = np.asarray(e, dtype=float)
    a = spec.alpha
    k = spec.kind
    if k == LMS:
        g = e.copy()
    elif k == LMF:
        g = e * e * e
    elif k == SA:
        g = np.sign(e)  # sign(0) = 0
    elif k == LMLS:
        g = a * (e * e * e) / (1.0 + a * e * e)
    elif k == LLAD:
        g = a * e / (1.0 + a * np.abs(e))
    elif k == HUBER:
        g = np.clip(e, -spec.huber_gamma, spec.huber_gamma)
    elif k == ARCTAN_SQ:
        g = a * a * e**5 / (1.0 + a * a * e**4)
    elif k == ARCTAN_ABS:
        g = a * a * e * np.abs(e) / (1.0 + a * a * e * e)
    else:
        raise ValueError(f"update_gain undefined for normalized kind {k!r}")
    if np.ndim(e) == 0:
        return float(g)
    return g


def step(state: FilterState, sample: Sample, *, eps: float = DEFAULT_REGRESSOR_EPS) -> FilterState:
    """One adaptation step; returns a new state, the input is untouched."""
    x = np.asarray(sample.regressor, dtype=float)
    e = compute_error(state, sample)
    mu = state.step_size
    k = state.spec.kind

    if k in SCALAR_GAIN_KINDS:
        w = state.weights + mu * update_gain(state.spec, e) * x
    else:
        energy = float(x @ x)
        if energy < eps:
            raise DegenerateRegressorError(
                f"regressor energy {energy:.3e} below eps={eps:.3e} for {k}"
            )
        if k == NLMS:
            w = state.weights + mu * e / (energy + eps) * x
        elif k == NLMLS:
            w = state.weights + mu * (e * e * e) / (energy * (energy + e * e)) * x
        elif k == NLLAD:
            norm = np.sqrt(energy)
            w = state.weights + mu * e / (norm * (norm + abs(e))) * x
        else:  # pragma: no cover - kinds are exhausted above
            raise ValueError(f"unhandled kind {k!r}")

    if not np.all(np.isfinite(w)):
        raise FilterDivergenceError(f"non-finite weights after {k} update (e={e!r})")
    return replace(state, weights=w)
